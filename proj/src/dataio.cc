// Copyright (c) 2026 The shubert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "shubert/dataio.h"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace shubert {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "raw audio files assume a little-endian host");

void write_pcm(const std::string& path, const Waveform& w) {
  std::vector<float> buf(w.samples.begin(), w.samples.end());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  SHUBERT_CHECK(f.good(), "cannot write " + path);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  SHUBERT_CHECK(f.good(), "short write on " + path);
}

Waveform read_pcm(const std::string& path, int sample_rate) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  SHUBERT_CHECK(f.good(), "missing audio file " + path);
  const auto bytes = static_cast<size_t>(f.tellg());
  SHUBERT_CHECK(bytes % sizeof(float) == 0 && bytes > 0,
                "audio file " + path + " is empty or not f32");
  std::vector<float> buf(bytes / sizeof(float));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(buf.begin(), buf.end());
  return w;
}

namespace {

json view_json(const ViewInfo& v) {
  json j = {{"type", std::string(to_string(v.type))}};
  j["noise_snr_db"] = v.noise_snr_db ? json(*v.noise_snr_db) : json(nullptr);
  j["speech_sir_db"] = v.speech_sir_db ? json(*v.speech_sir_db) : json(nullptr);
  j["interferer_speaker"] = v.interferer_speaker;
  j["interferer_utterance"] = v.interferer_utterance;
  j["noise_seed"] = v.noise_seed;
  return j;
}

ViewInfo view_from(const json& j) {
  ViewInfo v;
  v.type = mixture_type_from_string(j.at("type").get<std::string>());
  if (!j.at("noise_snr_db").is_null()) v.noise_snr_db = j.at("noise_snr_db").get<double>();
  if (!j.at("speech_sir_db").is_null()) v.speech_sir_db = j.at("speech_sir_db").get<double>();
  v.interferer_speaker = j.at("interferer_speaker").get<int>();
  v.interferer_utterance = j.at("interferer_utterance").get<std::string>();
  v.noise_seed = j.at("noise_seed").get<uint64_t>();
  return v;
}

}  // namespace

json manifest_record(const MixtureExample& ex) {
  const std::string base = "audio/" + ex.id;
  json paths = {{"clean", base + "_clean.f32"},
                {"view_a", base + "_view_a.f32"},
                {"view_b", base + "_view_b.f32"},
                {"enrollment", base + "_enrollment.f32"}};
  if (ex.interferer_clean) paths["interferer"] = base + "_interferer.f32";
  json j = {{"id", ex.id},
            {"paths", paths},
            {"target_speaker", ex.target_speaker},
            {"target_utterance", ex.target_utterance},
            {"enrollment_utterance", ex.enrollment_utterance},
            {"mixture_type", std::string(to_string(ex.mixture_type))},
            {"snr_db", {{"view_a", view_json(ex.info_a)},
                        {"view_b", view_json(ex.info_b)}}},
            {"normalization_gain", ex.normalization_gain},
            {"seed", ex.seed},
            {"phone_labels", ex.phone_labels}};
  j["interferer_phone_labels"] =
      ex.interferer_phone_labels ? json(*ex.interferer_phone_labels) : json(nullptr);
  return j;
}

json write_example(const std::string& dir, const MixtureExample& ex) {
  fs::create_directories(fs::path(dir) / "audio");
  json rec = manifest_record(ex);
  const json& p = rec.at("paths");
  auto put = [&](const char* key, const Waveform& w) {
    write_pcm((fs::path(dir) / p.at(key).get<std::string>()).string(), w);
  };
  put("clean", ex.clean);
  put("view_a", ex.view_a);
  put("view_b", ex.view_b);
  put("enrollment", ex.enrollment);
  if (ex.interferer_clean) put("interferer", *ex.interferer_clean);
  return rec;
}

std::vector<MixtureExample> read_manifest(const std::string& dir,
                                          int sample_rate) {
  const fs::path mpath = fs::path(dir) / "manifest.jsonl";
  std::ifstream f(mpath);
  SHUBERT_CHECK(f.good(), "missing manifest " + mpath.string());
  std::vector<MixtureExample> out;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      MixtureExample ex;
      ex.id = j.at("id").get<std::string>();
      const json& p = j.at("paths");
      auto get = [&](const char* key) {
        return read_pcm((fs::path(dir) / p.at(key).get<std::string>()).string(),
                        sample_rate);
      };
      ex.clean = get("clean");
      ex.view_a = get("view_a");
      ex.view_b = get("view_b");
      ex.enrollment = get("enrollment");
      if (p.contains("interferer")) ex.interferer_clean = get("interferer");
      ex.target_speaker = j.at("target_speaker").get<int>();
      ex.target_utterance = j.at("target_utterance").get<std::string>();
      ex.enrollment_utterance = j.at("enrollment_utterance").get<std::string>();
      ex.mixture_type =
          mixture_type_from_string(j.at("mixture_type").get<std::string>());
      ex.info_a = view_from(j.at("snr_db").at("view_a"));
      ex.info_b = view_from(j.at("snr_db").at("view_b"));
      ex.normalization_gain = j.at("normalization_gain").get<double>();
      ex.seed = j.at("seed").get<uint64_t>();
      ex.phone_labels = j.at("phone_labels").get<std::vector<int>>();
      if (!j.at("interferer_phone_labels").is_null()) {
        ex.interferer_phone_labels =
            j.at("interferer_phone_labels").get<std::vector<int>>();
      }
      SHUBERT_CHECK(ex.view_a.size() == ex.clean.size() &&
                        ex.view_b.size() == ex.clean.size(),
                    "views and clean differ in length");
      ex.interference_a = ex.view_a;
      ex.interference_b = ex.view_b;
      for (Index i = 0; i < ex.clean.size(); ++i) {
        ex.interference_a.samples[static_cast<size_t>(i)] -= ex.clean.samples[static_cast<size_t>(i)];
        ex.interference_b.samples[static_cast<size_t>(i)] -= ex.clean.samples[static_cast<size_t>(i)];
      }
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw Error(mpath.string() + " line " + std::to_string(n) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(mpath.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  SHUBERT_CHECK(!out.empty(), "manifest " + mpath.string() + " has no records");
  return out;
}

void write_label_store(const std::string& path, const LabelStore& labels) {
  std::ofstream f(path, std::ios::trunc);
  SHUBERT_CHECK(f.good(), "cannot write " + path);
  for (const auto& [id, seq] : labels) {
    f << json{{"id", id}, {"labels", seq}}.dump() << "\n";
  }
}

LabelStore read_label_store(const std::string& path) {
  std::ifstream f(path);
  SHUBERT_CHECK(f.good(), "missing label store " + path);
  LabelStore out;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("labels").get<PseudoLabelSeq>();
    } catch (const json::exception& e) {
      throw Error(path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_codebook(const std::string& path, const Codebook& cb) {
  const json header = {{"k", cb.k()},
                       {"dim", cb.dim()},
                       {"dtype", "f64"},
                       {"feature_source", cb.feature_source},
                       {"layer_index", cb.layer_index},
                       {"seed", cb.seed},
                       {"objective_history", cb.objective_history}};
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  SHUBERT_CHECK(f.good(), "cannot write " + path);
  f << header.dump() << "\n";
  f.write(reinterpret_cast<const char*>(cb.centroids.data()),
          static_cast<std::streamsize>(cb.centroids.size() * sizeof(double)));
}

Codebook read_codebook(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  SHUBERT_CHECK(f.good(), "missing codebook " + path);
  std::string line;
  std::getline(f, line);
  Codebook cb;
  try {
    const json h = json::parse(line);
    const int k = h.at("k").get<int>();
    const Index dim = h.at("dim").get<Index>();
    cb.feature_source = h.at("feature_source").get<std::string>();
    cb.layer_index = h.at("layer_index").get<int>();
    cb.seed = h.at("seed").get<uint64_t>();
    cb.objective_history = h.at("objective_history").get<std::vector<double>>();
    cb.centroids.resize(k, dim);
  } catch (const json::exception& e) {
    throw Error("corrupt codebook header in " + path + ": " + e.what());
  }
  f.read(reinterpret_cast<char*>(cb.centroids.data()),
         static_cast<std::streamsize>(cb.centroids.size() * sizeof(double)));
  SHUBERT_CHECK(f.good(), "truncated codebook " + path);
  return cb;
}

std::string interferer_key(const std::string& id) { return id + "/interferer"; }

std::string file_digest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  SHUBERT_CHECK(f.good(), "cannot open " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace shubert
