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

// Run configuration: every module section with defaults, a TOML-subset file
// reader and JSON round-trip.
//
// Accepted file syntax: `[section]` headers, `key = value` lines, `#`
// comments. Values are integers, floats, booleans, double-quoted strings or
// flat arrays of integers. Unknown sections and keys are rejected.

#ifndef SHUBERT_CONFIG_H_
#define SHUBERT_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "shubert/mixsim.h"
#include "shubert/model.h"
#include "shubert/quantizer.h"

namespace shubert {

struct OptimConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
};

struct TrainConfig {
  int steps = 2000;
  double lr = 5e-4;
  int warmup_steps = 200;
  int batch_size = 8;
  uint64_t seed = 1;
  // Seed of the dynamic mixing stream; 0 derives it from `seed`.
  uint64_t data_seed = 0;
  int checkpoint_every = 500;
  bool one_path = false;
  OptimConfig optim;
  ModelConfig model;

  void validate() const;
  uint64_t effective_data_seed() const;
};

struct LabelConfig {
  // Encoder depth of the bootstrap feature model (0 = frontend output).
  int layer_index = 2;
  uint64_t model_seed = 101;
};

struct SimulateConfig {
  int n_examples = 64;
  std::string split = "train";
  // Empty: types drawn uniformly.
  std::string force_type;
};

struct ProbeConfig {
  int n_examples = 200;
  uint64_t seed = 7;
  uint64_t mask_seed = 1234;
  double p_start = 0.08;
  int span_length = 10;
};

struct RunConfig {
  std::optional<uint64_t> seed;
  CorpusConfig corpus;
  TrainConfig train;
  KMeansConfig kmeans;
  LabelConfig labels;
  SimulateConfig simulate;
  ProbeConfig probe;

  // Propagates the top-level seed, derives the corpus frame geometry from the
  // frontend and validates every section.
  void finalize();
  ModelConfig& model() { return train.model; }
  const ModelConfig& model() const { return train.model; }
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

// Parses the TOML subset into nested JSON (section -> key -> value).
nlohmann::json parse_toml(const std::string& text);
// Applies `overrides` (section -> key -> value) on top of `base`, rejecting
// unknown sections and keys.
void merge_config(nlohmann::json& base, const nlohmann::json& overrides);
RunConfig load_run_config(const std::string& path);

// 64-bit FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_digest(const nlohmann::json& j);

}  // namespace shubert

#endif  // SHUBERT_CONFIG_H_
