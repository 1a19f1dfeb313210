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

// Dual-path training loop, AdamW, checkpoints and metrics.
//
// Every random choice of step s is derived from (seed, s), and per-example
// gradients are reduced in batch order, so a run is bitwise reproducible for
// any thread count and a resumed run continues exactly where it stopped.

#ifndef SHUBERT_TRAINER_H_
#define SHUBERT_TRAINER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "shubert/config.h"
#include "shubert/mixsim.h"
#include "shubert/model.h"

namespace shubert {

struct TrainItem {
  MixtureExample example;
  PseudoLabelSeq labels;
};

class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  // Example for global position `index` (= step * batch_size + b).
  virtual TrainItem fetch(uint64_t index) const = 0;
  // Throws listing the ids whose labels are missing or misaligned.
  virtual void validate(const FrameGeometry& geometry) const = 0;
};

// Fresh dual-view mixture per index from the cached utterance pool; labels
// are keyed by target utterance id.
class DynamicSource : public ExampleSource {
 public:
  DynamicSource(const Corpus& corpus, const LabelStore& labels,
                uint64_t data_seed);
  TrainItem fetch(uint64_t index) const override;
  void validate(const FrameGeometry& geometry) const override;

 private:
  const Corpus& corpus_;
  const LabelStore& labels_;
  uint64_t seed_;
};

// Fixed example list, cycled; labels keyed by example id.
class ManifestSource : public ExampleSource {
 public:
  ManifestSource(std::vector<MixtureExample> examples, LabelStore labels);
  TrainItem fetch(uint64_t index) const override;
  void validate(const FrameGeometry& geometry) const override;
  size_t size() const { return examples_.size(); }

 private:
  std::vector<MixtureExample> examples_;
  LabelStore labels_;
};

struct AdamState {
  Gradients m;
  Gradients v;
};

struct TrainState {
  ParameterSet params;
  AdamState adam;
  int64_t step = 0;     // steps attempted
  int64_t updates = 0;  // optimizer updates applied
  int64_t skipped = 0;  // non-finite steps
};

TrainState init_train_state(const TrainConfig& config);

struct StepMetrics {
  int64_t step = 0;
  double total = 0.0;
  double ce_a = 0.0;
  double ce_b = 0.0;
  double cc_inv = 0.0;
  double cc_red = 0.0;
  double grad_norm = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
  bool skipped = false;
};

nlohmann::json to_json(const StepMetrics& m);

double learning_rate(const TrainConfig& config, int64_t step);

// Worker count from SHUBERT_NUM_THREADS (default 1, clamped to >= 1).
int num_threads_from_env();

// Per-example hook applied after the forward pass; used by tests to inspect
// the graph or to inject a loss.
using ForwardHook = std::function<void(Tape&, ForwardOutput&)>;

// One optimizer step on batch `state.step`. A non-finite loss or gradient
// leaves parameters and moments untouched and bumps `skipped`; the step
// counter always advances.
StepMetrics train_step(TrainState& state, const TrainConfig& config,
                       const ExampleSource& source, int threads = 1,
                       const ForwardHook& hook = {});

// ---- checkpoints ----
// Layout: 8-byte magic "SHBTCKPT", u64 little-endian header length, JSON
// header, then raw little-endian f64 payloads at the header's offsets.
void save_checkpoint(const std::string& path, const TrainState& state,
                     const TrainConfig& config);

struct LoadedCheckpoint {
  TrainState state;
  TrainConfig config;
  std::string config_digest;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// ---- run loop ----
struct RunOptions {
  std::string out_dir;  // empty: nothing written
  int threads = 1;
  // Called after every step.
  std::function<void(const StepMetrics&)> on_step;
};

struct RunResult {
  TrainState state;
  std::vector<StepMetrics> metrics;
};

// Runs from `start` (fresh or resumed) until config.steps. Writes
// metrics.jsonl (appended), ckpt_<step>.bin every checkpoint_every steps and
// final.bin. With steps == 0 only the initial checkpoint is written.
RunResult run_pretrain(const TrainConfig& config, const ExampleSource& source,
                       TrainState start, const RunOptions& options);

}  // namespace shubert

#endif  // SHUBERT_TRAINER_H_
