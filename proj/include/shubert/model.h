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

// The full selective pre-training model: shared frontend, mask, speaker
// embedder, speaker adapted encoder, prediction head and projection block,
// plus the dual-path forward used for training.

#ifndef SHUBERT_MODEL_H_
#define SHUBERT_MODEL_H_

#include <cstdint>
#include <vector>

#include "shubert/frontend.h"
#include "shubert/masking.h"
#include "shubert/mixsim.h"
#include "shubert/objective.h"
#include "shubert/sate.h"
#include "shubert/spkemb.h"

namespace shubert {

struct ModelConfig {
  FrontendConfig frontend;
  SpkEmbConfig spkemb;
  EncoderConfig encoder;
  HeadConfig head;
  CCConfig cc;
  MaskConfig mask;

  // Throws on inconsistent dimensions between sub-configs.
  void validate() const;
};

ParameterSet init_model(const ModelConfig& config, uint64_t seed);

struct ForwardOutput {
  LossBreakdown loss;
  Var embedding;
  Var contextual_a;
  Var contextual_b;  // unset in one-path mode
  MaskPlan plan_a;
  MaskPlan plan_b;
  std::vector<int> cc_frames;
};

// Draws a mask plan, re-drawing (then forcing one span) so training never
// sees an empty mask.
MaskPlan plan_training_mask(Index frames, const MaskConfig& config,
                            std::mt19937_64& rng);

// Dual-path forward on one example: both views go through the same frontend
// and encoder parameters, conditioned on the enrollment embedding, and both
// predict `labels` at masked frames. `one_path` drops branch B and the
// cross-correlation loss.
ForwardOutput forward_example(Tape& tape, const ModelConfig& config,
                              const ParameterSet& params,
                              const MixtureExample& example,
                              const PseudoLabelSeq& labels, uint64_t seed,
                              bool one_path = false);

// Inference-time contextual representation C of `input` conditioned on `e`.
Matrix contextual(const ModelConfig& config, const ParameterSet& params,
                  const Waveform& input, const RowVector& e,
                  const MaskPlan& plan);

// Argmax label per frame, plus the contextual matrix.
std::vector<int> predict_labels(const ModelConfig& config,
                                const ParameterSet& params,
                                const Waveform& input, const RowVector& e,
                                const MaskPlan& plan);

// Hidden states after `layers` encoder layers, unmasked, self-enrolled on the
// same waveform; used as clustering features.
Matrix layer_features(const ModelConfig& config, const ParameterSet& params,
                      const Waveform& clean, int layers);

}  // namespace shubert

#endif  // SHUBERT_MODEL_H_
