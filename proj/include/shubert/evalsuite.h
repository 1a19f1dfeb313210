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

// Evaluation probes: enrollment-swap selectivity, view invariance and the
// tiny-model gradient check.

#ifndef SHUBERT_EVALSUITE_H_
#define SHUBERT_EVALSUITE_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "shubert/config.h"
#include "shubert/labels.h"
#include "shubert/model.h"

namespace shubert {

// One probe item. Only the mixture and the enrollments are encoded; the
// labels come from the clean sources.
struct ProbeExample {
  std::string id;
  Waveform mixture;
  Waveform enrollment_a;
  std::optional<Waveform> enrollment_b;
  PseudoLabelSeq labels_a;
  std::optional<PseudoLabelSeq> labels_b;
};

struct ProbeReport {
  double target_masked_accuracy = 0.0;
  std::optional<double> interferer_masked_accuracy;
  std::optional<double> swap_consistency;
  std::optional<double> collision_rate;
  std::optional<double> mean_view_cosine;
  int n_examples = 0;
  int n_skipped = 0;  // items without dual labels when dual labels are needed
  Index masked_frames = 0;
};

nlohmann::json to_json(const ProbeReport& r);

// Held-out two-talker probe items: view A of eval-split examples with the
// type forced to two_talker, labelled through `label_model` and `codebook`.
// Speaker B's enrollment is another eval utterance of the interferer.
// Probe item from a mixture example. Two-talker examples also get the
// interferer's labels and an enrollment drawn from another of its eval
// utterances; others carry target labels only.
ProbeExample make_probe_example(const Corpus& corpus,
                                const LabelModel& label_model,
                                const Codebook& codebook,
                                const MixtureExample& ex);
std::vector<ProbeExample> build_probe_set(const Corpus& corpus,
                                          const LabelModel& label_model,
                                          const Codebook& codebook, int n,
                                          uint64_t seed);

// Fixed probe mask for item `index`; never empty.
MaskPlan probe_mask(Index frames, const ProbeConfig& probe, uint64_t index);

// Micro-averaged masked-frame accuracies against both talkers' labels with
// enrollment A, and the fraction of items whose prediction follows B's labels
// once the enrollment is swapped to B. Items lacking B's labels contribute
// to the target accuracy only.
ProbeReport selectivity_probe(const ModelConfig& config,
                              const ParameterSet& params,
                              const std::vector<ProbeExample>& examples,
                              const ProbeConfig& probe, int threads = 1);

// Mean over frames and examples of cosine(c_t, c~_t) between the unmasked
// contextual representations of the two views.
double invariance_metric(const ModelConfig& config, const ParameterSet& params,
                         const std::vector<MixtureExample>& examples,
                         int threads = 1);

// Held-out dual-view examples (eval split, types drawn as in training).
std::vector<MixtureExample> build_invariance_set(const Corpus& corpus, int n,
                                                 uint64_t seed);

// Gradient check of the full two-path loss on a 2-layer, D=16, K=8 model over
// one synthetic batch of `batch` examples.
GradReport gradcheck_tiny(uint64_t seed, double eps = 1e-5,
                          double tolerance = 1e-4, int batch = 2);

// Runs `fn(i)` for i in [0, n) on `threads` workers; exceptions propagate.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace shubert

#endif  // SHUBERT_EVALSUITE_H_
