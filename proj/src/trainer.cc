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

#include "shubert/trainer.h"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

namespace shubert {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

// ---- sources ----

DynamicSource::DynamicSource(const Corpus& corpus, const LabelStore& labels,
                             uint64_t data_seed)
    : corpus_(corpus), labels_(labels), seed_(data_seed) {}

TrainItem DynamicSource::fetch(uint64_t index) const {
  TrainItem item;
  item.example = sample_indexed(corpus_, seed_, index);
  auto it = labels_.find(item.example.target_utterance);
  SHUBERT_CHECK(it != labels_.end(),
                "no labels for utterance " + item.example.target_utterance);
  item.labels = it->second;
  return item;
}

void DynamicSource::validate(const FrameGeometry& geometry) const {
  std::vector<std::string> bad;
  const int per = corpus_.utterances_in(Split::kTrain);
  for (int s = 0; s < corpus_.config().n_speakers; ++s) {
    for (int i = 0; i < per; ++i) {
      const Utterance& u = corpus_.utterance(s, i, Split::kTrain);
      auto it = labels_.find(u.id);
      if (it == labels_.end() ||
          static_cast<Index>(it->second.size()) != geometry.frames(u.audio.size())) {
        bad.push_back(u.id);
      }
    }
  }
  if (!bad.empty()) {
    std::string msg = "label store does not cover the corpus; offending ids:";
    for (size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + bad[i];
    if (bad.size() > 20) msg += " ... (" + std::to_string(bad.size()) + " total)";
    throw Error(msg);
  }
}

ManifestSource::ManifestSource(std::vector<MixtureExample> examples,
                               LabelStore labels)
    : examples_(std::move(examples)), labels_(std::move(labels)) {
  SHUBERT_CHECK(!examples_.empty(), "manifest has no examples");
}

TrainItem ManifestSource::fetch(uint64_t index) const {
  TrainItem item;
  item.example = examples_[index % examples_.size()];
  item.labels = labels_.at(item.example.id);
  return item;
}

void ManifestSource::validate(const FrameGeometry& geometry) const {
  std::vector<std::string> bad;
  for (const auto& ex : examples_) {
    auto it = labels_.find(ex.id);
    if (it == labels_.end() ||
        static_cast<Index>(it->second.size()) != geometry.frames(ex.clean.size())) {
      bad.push_back(ex.id);
    }
  }
  if (!bad.empty()) {
    std::string msg = "manifest and label store do not align; offending ids:";
    for (size_t i = 0; i < bad.size() && i < 20; ++i) msg += " " + bad[i];
    if (bad.size() > 20) msg += " ... (" + std::to_string(bad.size()) + " total)";
    throw Error(msg);
  }
}

// ---- state ----

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.params = init_model(config.model, config.seed);
  s.adam.m = zero_gradients(s.params);
  s.adam.v = zero_gradients(s.params);
  return s;
}

json to_json(const StepMetrics& m) {
  return {{"step", m.step},         {"total", m.total},
          {"ce_a", m.ce_a},         {"ce_b", m.ce_b},
          {"cc_inv", m.cc_inv},     {"cc_red", m.cc_red},
          {"grad_norm", m.grad_norm}, {"lr", m.lr},
          {"skipped", m.skipped},   {"wall_ms", m.wall_ms}};
}

double learning_rate(const TrainConfig& config, int64_t step) {
  if (config.warmup_steps > 0 && step < config.warmup_steps) {
    return config.lr * static_cast<double>(step + 1) / config.warmup_steps;
  }
  return config.lr;
}

int num_threads_from_env() {
  const char* v = std::getenv("SHUBERT_NUM_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  SHUBERT_CHECK(end != v && *end == '\0' && n >= 1,
                std::string("SHUBERT_NUM_THREADS must be a positive integer, got '") +
                    v + "'");
  return static_cast<int>(std::min<long>(n, 256));
}

namespace {

bool all_finite(const Gradients& g) {
  for (const auto& m : g) {
    if (!m.allFinite()) return false;
  }
  return true;
}

struct ExampleResult {
  Gradients grads;
  double total = 0, ce_a = 0, ce_b = 0, cc_inv = 0, cc_red = 0;
};

}  // namespace

StepMetrics train_step(TrainState& state, const TrainConfig& config,
                       const ExampleSource& source, int threads,
                       const ForwardHook& hook) {
  const auto t0 = std::chrono::steady_clock::now();
  const int batch = config.batch_size;
  const int64_t step = state.step;
  std::vector<ExampleResult> results(static_cast<size_t>(batch));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(batch));

  auto run_one = [&](int b) {
    try {
      const uint64_t index = static_cast<uint64_t>(step) * batch + b;
      TrainItem item = source.fetch(index);
      Tape tape;
      ForwardOutput f = forward_example(
          tape, config.model, state.params, item.example, item.labels,
          mix_seed(mix_seed(config.seed, static_cast<uint64_t>(step)), b),
          config.one_path);
      if (hook) hook(tape, f);
      ExampleResult& r = results[static_cast<size_t>(b)];
      r.grads = zero_gradients(state.params);
      tape.backward(f.loss.total, &r.grads);
      r.total = f.loss.total.scalar();
      r.ce_a = f.loss.ce_a.scalar();
      if (!f.loss.one_path) {
        r.ce_b = f.loss.ce_b.scalar();
        r.cc_inv = f.loss.cc_inv.scalar();
        r.cc_red = f.loss.cc_red.scalar();
      }
    } catch (...) {
      errors[static_cast<size_t>(b)] = std::current_exception();
    }
  };

  const int workers = std::max(1, std::min(threads, batch));
  if (workers == 1) {
    for (int b = 0; b < batch; ++b) run_one(b);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (int b = w; b < batch; b += workers) run_one(b);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Ordered reduction keeps the sum independent of scheduling.
  StepMetrics m;
  Gradients grads = zero_gradients(state.params);
  for (const auto& r : results) {
    add_gradients(grads, r.grads);
    m.total += r.total;
    m.ce_a += r.ce_a;
    m.ce_b += r.ce_b;
    m.cc_inv += r.cc_inv;
    m.cc_red += r.cc_red;
  }
  const double inv = 1.0 / batch;
  for (auto& g : grads) g *= inv;
  m.total *= inv;
  m.ce_a *= inv;
  m.ce_b *= inv;
  m.cc_inv *= inv;
  m.cc_red *= inv;
  m.grad_norm = global_norm(grads);
  m.lr = learning_rate(config, step);

  state.step = step + 1;
  m.step = state.step;
  if (!std::isfinite(m.total) || !std::isfinite(m.grad_norm) ||
      !all_finite(grads)) {
    ++state.skipped;
    m.skipped = true;
  } else {
    if (m.grad_norm > config.optim.clip_norm) {
      const double s = config.optim.clip_norm / m.grad_norm;
      for (auto& g : grads) g *= s;
    }
    ++state.updates;
    const OptimConfig& o = config.optim;
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.updates));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.updates));
    for (size_t i = 0; i < state.params.size(); ++i) {
      Matrix& p = state.params.at(i).value;
      Matrix& mom = state.adam.m[i];
      Matrix& vel = state.adam.v[i];
      const Matrix& g = grads[i];
      mom = o.beta1 * mom + (1.0 - o.beta1) * g;
      vel = o.beta2 * vel + (1.0 - o.beta2) * g.cwiseProduct(g);
      Matrix update =
          ((mom / bc1).array() / ((vel / bc2).array().sqrt() + o.eps)).matrix();
      if (p.rows() > 1 && o.weight_decay > 0.0) update += o.weight_decay * p;
      p -= m.lr * update;
    }
  }
  m.wall_ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
  return m;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[8] = {'S', 'H', 'B', 'T', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state,
                     const TrainConfig& config) {
  json tensors = json::array();
  uint64_t offset = 0;
  auto describe = [&](const std::string& name, const std::string& group,
                      const Matrix& m) {
    tensors.push_back({{"name", name},
                       {"group", group},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", offset}});
    offset += static_cast<uint64_t>(m.size()) * sizeof(double);
  };
  for (size_t i = 0; i < state.params.size(); ++i) {
    describe(state.params.at(i).name, "param", state.params.at(i).value);
  }
  for (size_t i = 0; i < state.params.size(); ++i) {
    describe(state.params.at(i).name, "adam_m", state.adam.m[i]);
  }
  for (size_t i = 0; i < state.params.size(); ++i) {
    describe(state.params.at(i).name, "adam_v", state.adam.v[i]);
  }
  const json cfg = to_json(config);
  const json header = {{"format", 1},
                       {"dtype", "f64"},
                       {"step", state.step},
                       {"updates", state.updates},
                       {"skipped", state.skipped},
                       {"rng", {{"seed", config.seed},
                                {"data_seed", config.effective_data_seed()},
                                {"next_step", state.step}}},
                       {"config", cfg},
                       {"config_digest", config_digest(cfg)},
                       {"tensors", tensors}};
  const std::string h = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    SHUBERT_CHECK(f.good(), "cannot write checkpoint " + path);
    f.write(kMagic, sizeof(kMagic));
    const uint64_t len = h.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(h.data(), static_cast<std::streamsize>(h.size()));
    auto put = [&](const Matrix& m) {
      f.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    };
    for (size_t i = 0; i < state.params.size(); ++i) put(state.params.at(i).value);
    for (const auto& m : state.adam.m) put(m);
    for (const auto& m : state.adam.v) put(m);
    SHUBERT_CHECK(f.good(), "short write on checkpoint " + path);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  SHUBERT_CHECK(f.good(), "cannot open checkpoint " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  SHUBERT_CHECK(f.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
                "not a checkpoint file: " + path);
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  SHUBERT_CHECK(f.good() && len < (1ULL << 30), "corrupt checkpoint header: " + path);
  std::string h(len, '\0');
  f.read(h.data(), static_cast<std::streamsize>(len));
  SHUBERT_CHECK(f.good(), "truncated checkpoint header: " + path);
  const std::streamoff payload = f.tellg();

  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& e) {
    throw Error("corrupt checkpoint header in " + path + ": " + e.what());
  }
  SHUBERT_CHECK(header.value("dtype", "") == "f64",
                "unsupported checkpoint dtype in " + path);

  LoadedCheckpoint out;
  out.config = train_config_from_json(header.at("config"));
  out.config_digest = header.at("config_digest").get<std::string>();
  SHUBERT_CHECK(out.config_digest == config_digest(header.at("config")),
                "config digest mismatch in " + path);
  TrainState& s = out.state;
  s.step = header.at("step").get<int64_t>();
  s.updates = header.at("updates").get<int64_t>();
  s.skipped = header.at("skipped").get<int64_t>();

  // Layout and names must match what the config builds.
  s.params = init_model(out.config.model, out.config.seed);
  s.adam.m = zero_gradients(s.params);
  s.adam.v = zero_gradients(s.params);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const std::string group = t.at("group").get<std::string>();
    SHUBERT_CHECK(s.params.contains(name),
                  "checkpoint tensor " + name + " not in model");
    const int idx = s.params.get(name).index;
    Matrix* dst = group == "param"    ? &s.params.at(static_cast<size_t>(idx)).value
                  : group == "adam_m" ? &s.adam.m[static_cast<size_t>(idx)]
                  : group == "adam_v" ? &s.adam.v[static_cast<size_t>(idx)]
                                      : nullptr;
    SHUBERT_CHECK(dst != nullptr, "unknown tensor group " + group);
    const auto shape = t.at("shape").get<std::vector<Index>>();
    SHUBERT_CHECK(shape.size() == 2 && shape[0] == dst->rows() &&
                      shape[1] == dst->cols(),
                  "shape mismatch for " + name + " in " + path);
    f.seekg(payload + static_cast<std::streamoff>(t.at("offset").get<uint64_t>()));
    f.read(reinterpret_cast<char*>(dst->data()),
           static_cast<std::streamsize>(dst->size() * sizeof(double)));
    SHUBERT_CHECK(f.good(), "truncated payload for " + name + " in " + path);
    seen.emplace(name, group);
  }
  SHUBERT_CHECK(seen.size() == 3 * s.params.size(),
                "checkpoint " + path + " is missing tensors");
  return out;
}

// ---- run loop ----

RunResult run_pretrain(const TrainConfig& config, const ExampleSource& source,
                       TrainState start, const RunOptions& options) {
  config.validate();
  source.validate(config.model.frontend.geometry());
  RunResult out;
  out.state = std::move(start);
  TrainState& s = out.state;

  namespace fs = std::filesystem;
  std::ofstream metrics;
  auto ckpt_path = [&](int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_%06lld.bin",
                  static_cast<long long>(step));
    return (fs::path(options.out_dir) / buf).string();
  };
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    std::ofstream(fs::path(options.out_dir) / "train_config.json")
        << to_json(config).dump(2) << "\n";
    metrics.open(fs::path(options.out_dir) / "metrics.jsonl", std::ios::app);
    SHUBERT_CHECK(metrics.good(), "cannot open metrics log in " + options.out_dir);
    if (s.step == 0) save_checkpoint(ckpt_path(0), s, config);
  }

  while (s.step < config.steps) {
    StepMetrics m = train_step(s, config, source, options.threads);
    if (metrics.is_open()) metrics << to_json(m).dump() << "\n" << std::flush;
    if (options.on_step) options.on_step(m);
    out.metrics.push_back(m);
    if (!options.out_dir.empty() && config.checkpoint_every > 0 &&
        s.step % config.checkpoint_every == 0) {
      save_checkpoint(ckpt_path(s.step), s, config);
    }
  }
  if (!options.out_dir.empty()) {
    save_checkpoint((fs::path(options.out_dir) / "final.bin").string(), s,
                    config);
  }
  return out;
}

}  // namespace shubert
