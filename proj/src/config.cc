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

#include "shubert/config.h"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace shubert {

using nlohmann::json;

void TrainConfig::validate() const {
  SHUBERT_CHECK(steps >= 0, "train.steps must be >= 0");
  SHUBERT_CHECK(lr >= 0.0, "train.lr must be >= 0");
  SHUBERT_CHECK(batch_size >= 1, "train.batch_size must be >= 1");
  SHUBERT_CHECK(warmup_steps >= 0, "train.warmup_steps must be >= 0");
  SHUBERT_CHECK(checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
  SHUBERT_CHECK(optim.beta1 >= 0.0 && optim.beta1 < 1.0,
                "train.beta1 outside [0, 1)");
  SHUBERT_CHECK(optim.beta2 >= 0.0 && optim.beta2 < 1.0,
                "train.beta2 outside [0, 1)");
  SHUBERT_CHECK(optim.eps > 0.0, "train.eps must be > 0");
  SHUBERT_CHECK(optim.clip_norm > 0.0, "train.clip_norm must be > 0");
  model.validate();
}

uint64_t TrainConfig::effective_data_seed() const {
  return data_seed != 0 ? data_seed : mix_seed(seed, 0xDA7A);
}

// ---- JSON conversion ----

namespace {

json frontend_json(const FrontendConfig& c) {
  return {{"kernels", c.kernels},
          {"strides", c.strides},
          {"dim", c.dim},
          {"ln_eps", c.ln_eps}};
}

void frontend_from(const json& j, FrontendConfig& c) {
  j.at("kernels").get_to(c.kernels);
  j.at("strides").get_to(c.strides);
  j.at("dim").get_to(c.dim);
  j.at("ln_eps").get_to(c.ln_eps);
}

json spkemb_json(const SpkEmbConfig& c) {
  return {{"dim", c.dim}, {"norm_floor", c.norm_floor}};
}

void spkemb_from(const json& j, SpkEmbConfig& c) {
  j.at("dim").get_to(c.dim);
  j.at("norm_floor").get_to(c.norm_floor);
}

json encoder_json(const EncoderConfig& c) {
  return {{"n_layers", c.n_layers},   {"satl_index", c.satl_index},
          {"dim", c.dim},             {"emb_dim", c.emb_dim},
          {"n_heads", c.n_heads},     {"ffn_dim", c.ffn_dim},
          {"ln_eps", c.ln_eps},       {"satl_both_norms", c.satl_both_norms},
          {"pos_scale", c.pos_scale}};
}

void encoder_from(const json& j, EncoderConfig& c) {
  j.at("n_layers").get_to(c.n_layers);
  j.at("satl_index").get_to(c.satl_index);
  j.at("dim").get_to(c.dim);
  j.at("emb_dim").get_to(c.emb_dim);
  j.at("n_heads").get_to(c.n_heads);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("ln_eps").get_to(c.ln_eps);
  j.at("satl_both_norms").get_to(c.satl_both_norms);
  j.at("pos_scale").get_to(c.pos_scale);
}

json head_json(const HeadConfig& c) {
  return {{"num_classes", c.num_classes},
          {"proj_dim", c.proj_dim},
          {"temperature", c.temperature},
          {"affine", c.affine}};
}

void head_from(const json& j, HeadConfig& c) {
  j.at("num_classes").get_to(c.num_classes);
  j.at("proj_dim").get_to(c.proj_dim);
  j.at("temperature").get_to(c.temperature);
  j.at("affine").get_to(c.affine);
}

json cc_json(const CCConfig& c) {
  return {{"proj_dim", c.proj_dim},
          {"frames", c.frames},
          {"lambda", c.lambda},
          {"center", c.center},
          {"norm_floor", c.norm_floor}};
}

void cc_from(const json& j, CCConfig& c) {
  j.at("proj_dim").get_to(c.proj_dim);
  j.at("frames").get_to(c.frames);
  j.at("lambda").get_to(c.lambda);
  j.at("center").get_to(c.center);
  j.at("norm_floor").get_to(c.norm_floor);
}

json mask_json(const MaskConfig& c) {
  return {{"p_start", c.p_start},
          {"span_length", c.span_length},
          {"independent_branches", c.independent_branches}};
}

void mask_from(const json& j, MaskConfig& c) {
  j.at("p_start").get_to(c.p_start);
  j.at("span_length").get_to(c.span_length);
  j.at("independent_branches").get_to(c.independent_branches);
}

json train_flat_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"lr", c.lr},
          {"warmup_steps", c.warmup_steps},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"data_seed", c.data_seed},
          {"checkpoint_every", c.checkpoint_every},
          {"one_path", c.one_path},
          {"beta1", c.optim.beta1},
          {"beta2", c.optim.beta2},
          {"eps", c.optim.eps},
          {"weight_decay", c.optim.weight_decay},
          {"clip_norm", c.optim.clip_norm}};
}

void train_flat_from(const json& j, TrainConfig& c) {
  j.at("steps").get_to(c.steps);
  j.at("lr").get_to(c.lr);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("batch_size").get_to(c.batch_size);
  j.at("seed").get_to(c.seed);
  j.at("data_seed").get_to(c.data_seed);
  j.at("checkpoint_every").get_to(c.checkpoint_every);
  j.at("one_path").get_to(c.one_path);
  j.at("beta1").get_to(c.optim.beta1);
  j.at("beta2").get_to(c.optim.beta2);
  j.at("eps").get_to(c.optim.eps);
  j.at("weight_decay").get_to(c.optim.weight_decay);
  j.at("clip_norm").get_to(c.optim.clip_norm);
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"frontend", frontend_json(c.frontend)},
          {"spkemb", spkemb_json(c.spkemb)},
          {"encoder", encoder_json(c.encoder)},
          {"head", head_json(c.head)},
          {"cc", cc_json(c.cc)},
          {"mask", mask_json(c.mask)}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  frontend_from(j.at("frontend"), c.frontend);
  spkemb_from(j.at("spkemb"), c.spkemb);
  encoder_from(j.at("encoder"), c.encoder);
  head_from(j.at("head"), c.head);
  cc_from(j.at("cc"), c.cc);
  mask_from(j.at("mask"), c.mask);
  return c;
}

json to_json(const TrainConfig& c) {
  json j = train_flat_json(c);
  j["model"] = to_json(c.model);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  train_flat_from(j, c);
  c.model = model_config_from_json(j.at("model"));
  return c;
}

json to_json(const CorpusConfig& c) {
  return {{"n_speakers", c.n_speakers},
          {"utterances_per_speaker", c.utterances_per_speaker},
          {"eval_utterances_per_speaker", c.eval_utterances_per_speaker},
          {"phone_alphabet", c.phone_alphabet},
          {"min_phones", c.min_phones},
          {"max_phones", c.max_phones},
          {"min_phone_sec", c.min_phone_sec},
          {"max_phone_sec", c.max_phone_sec},
          {"enrollment_sec", c.enrollment_sec},
          {"noise_snr_min_db", c.noise_snr_min_db},
          {"noise_snr_max_db", c.noise_snr_max_db},
          {"speech_sir_min_db", c.speech_sir_min_db},
          {"speech_sir_max_db", c.speech_sir_max_db},
          {"f0_min", c.f0_min},
          {"f0_max", c.f0_max},
          {"n_partials", c.n_partials},
          {"sample_rate", c.sample_rate},
          {"independent_view_types", c.independent_view_types},
          {"seed", c.seed}};
}

CorpusConfig corpus_config_from_json(const json& j) {
  CorpusConfig c;
  j.at("n_speakers").get_to(c.n_speakers);
  j.at("utterances_per_speaker").get_to(c.utterances_per_speaker);
  j.at("eval_utterances_per_speaker").get_to(c.eval_utterances_per_speaker);
  j.at("phone_alphabet").get_to(c.phone_alphabet);
  j.at("min_phones").get_to(c.min_phones);
  j.at("max_phones").get_to(c.max_phones);
  j.at("min_phone_sec").get_to(c.min_phone_sec);
  j.at("max_phone_sec").get_to(c.max_phone_sec);
  j.at("enrollment_sec").get_to(c.enrollment_sec);
  j.at("noise_snr_min_db").get_to(c.noise_snr_min_db);
  j.at("noise_snr_max_db").get_to(c.noise_snr_max_db);
  j.at("speech_sir_min_db").get_to(c.speech_sir_min_db);
  j.at("speech_sir_max_db").get_to(c.speech_sir_max_db);
  j.at("f0_min").get_to(c.f0_min);
  j.at("f0_max").get_to(c.f0_max);
  j.at("n_partials").get_to(c.n_partials);
  j.at("sample_rate").get_to(c.sample_rate);
  j.at("independent_view_types").get_to(c.independent_view_types);
  j.at("seed").get_to(c.seed);
  return c;
}

json to_json(const RunConfig& c) {
  json j = to_json(c.model());
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["corpus"] = to_json(c.corpus);
  j["train"] = train_flat_json(c.train);
  j["kmeans"] = {{"k", c.kmeans.k},
                 {"max_iters", c.kmeans.max_iters},
                 {"rel_tol", c.kmeans.rel_tol},
                 {"max_fit_frames", c.kmeans.max_fit_frames},
                 {"seed", c.kmeans.seed}};
  j["labels"] = {{"layer_index", c.labels.layer_index},
                 {"model_seed", c.labels.model_seed}};
  j["simulate"] = {{"n_examples", c.simulate.n_examples},
                   {"split", c.simulate.split},
                   {"force_type", c.simulate.force_type}};
  j["probe"] = {{"n_examples", c.probe.n_examples},
                {"seed", c.probe.seed},
                {"mask_seed", c.probe.mask_seed},
                {"p_start", c.probe.p_start},
                {"span_length", c.probe.span_length}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("seed") && !j.at("seed").is_null()) {
    c.seed = j.at("seed").get<uint64_t>();
  }
  c.corpus = corpus_config_from_json(j.at("corpus"));
  train_flat_from(j.at("train"), c.train);
  c.train.model = model_config_from_json(j);
  const json& k = j.at("kmeans");
  k.at("k").get_to(c.kmeans.k);
  k.at("max_iters").get_to(c.kmeans.max_iters);
  k.at("rel_tol").get_to(c.kmeans.rel_tol);
  k.at("max_fit_frames").get_to(c.kmeans.max_fit_frames);
  k.at("seed").get_to(c.kmeans.seed);
  const json& l = j.at("labels");
  l.at("layer_index").get_to(c.labels.layer_index);
  l.at("model_seed").get_to(c.labels.model_seed);
  const json& s = j.at("simulate");
  s.at("n_examples").get_to(c.simulate.n_examples);
  s.at("split").get_to(c.simulate.split);
  s.at("force_type").get_to(c.simulate.force_type);
  const json& p = j.at("probe");
  p.at("n_examples").get_to(c.probe.n_examples);
  p.at("seed").get_to(c.probe.seed);
  p.at("mask_seed").get_to(c.probe.mask_seed);
  p.at("p_start").get_to(c.probe.p_start);
  p.at("span_length").get_to(c.probe.span_length);
  return c;
}

void RunConfig::finalize() {
  if (seed) train.seed = *seed;
  corpus.geometry = model().frontend.geometry();
  train.validate();
  SHUBERT_CHECK(kmeans.k == model().head.num_classes,
                "kmeans.k must equal head.num_classes");
  SHUBERT_CHECK(kmeans.k >= 1 && kmeans.max_iters >= 1,
                "kmeans.k and kmeans.max_iters must be >= 1");
  SHUBERT_CHECK(labels.layer_index >= 0 &&
                    labels.layer_index <= model().encoder.n_layers,
                "labels.layer_index outside [0, encoder.n_layers]");
  SHUBERT_CHECK(simulate.n_examples >= 1, "simulate.n_examples must be >= 1");
  SHUBERT_CHECK(simulate.split == "train" || simulate.split == "eval",
                "simulate.split must be \"train\" or \"eval\"");
  if (!simulate.force_type.empty()) {
    mixture_type_from_string(simulate.force_type);
  }
  SHUBERT_CHECK(probe.n_examples >= 1, "probe.n_examples must be >= 1");
  SHUBERT_CHECK(probe.span_length >= 1, "probe.span_length must be >= 1");
  SHUBERT_CHECK(probe.p_start > 0.0 && probe.p_start <= 1.0,
                "probe.p_start outside (0, 1]");
}

// ---- TOML subset ----

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

json parse_scalar(const std::string& v, int line) {
  auto fail = [&]() -> json {
    throw Error("config line " + std::to_string(line) + ": bad value '" + v +
                "'");
  };
  if (v.empty()) return fail();
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return fail();
    return v.substr(1, v.size() - 2);
  }
  const bool integral = v.find_first_of(".eE") == std::string::npos ||
                        v.rfind("0x", 0) == 0;
  size_t used = 0;
  try {
    if (integral) {
      if (v.front() == '-') {
        long long x = std::stoll(v, &used, 0);
        if (used == v.size()) return x;
      } else {
        unsigned long long x = std::stoull(v, &used, 0);
        if (used == v.size()) return x;
      }
    } else {
      double x = std::stod(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  return fail();
}

json parse_value(const std::string& v, int line) {
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') {
      throw Error("config line " + std::to_string(line) + ": unterminated array");
    }
    json arr = json::array();
    std::stringstream ss(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) arr.push_back(parse_scalar(item, line));
    }
    return arr;
  }
  return parse_scalar(v, line);
}

}  // namespace

json parse_toml(const std::string& text) {
  json out = json::object();
  std::string section;
  std::stringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      SHUBERT_CHECK(s.back() == ']',
                    "config line " + std::to_string(line) + ": bad section");
      section = trim(s.substr(1, s.size() - 2));
      SHUBERT_CHECK(!section.empty(),
                    "config line " + std::to_string(line) + ": empty section");
      if (!out.contains(section)) out[section] = json::object();
      continue;
    }
    const size_t eq = s.find('=');
    SHUBERT_CHECK(eq != std::string::npos,
                  "config line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const json value = parse_value(trim(s.substr(eq + 1)), line);
    json& target = section.empty() ? out : out[section];
    SHUBERT_CHECK(!target.contains(key), "config line " +
                                             std::to_string(line) +
                                             ": duplicate key '" + key + "'");
    target[key] = value;
  }
  return out;
}

void merge_config(json& base, const json& overrides) {
  for (const auto& [name, value] : overrides.items()) {
    if (!base.contains(name)) {
      throw Error("unknown config key '" + name + "'");
    }
    json& slot = base[name];
    if (slot.is_object()) {
      SHUBERT_CHECK(value.is_object(),
                    "config section '" + name + "' must be a table");
      for (const auto& [key, v] : value.items()) {
        if (!slot.contains(key)) {
          throw Error("unknown config key '" + name + "." + key + "'");
        }
        slot[key] = v;
      }
    } else {
      slot = value;
    }
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  SHUBERT_CHECK(f.good(), "cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  json base = to_json(RunConfig{});
  merge_config(base, parse_toml(ss.str()));
  try {
    return run_config_from_json(base);
  } catch (const json::exception& e) {
    throw Error("config " + path + ": " + e.what());
  }
}

std::string config_digest(const json& j) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace shubert
