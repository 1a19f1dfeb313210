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

#ifndef SHUBERT_FRONTEND_H_
#define SHUBERT_FRONTEND_H_

#include <random>
#include <string>
#include <vector>

#include "shubert/mixsim.h"
#include "shubert/numerics.h"

namespace shubert {

// Waveform-to-frames convolutional encoder: strided conv + GELU per layer,
// followed by a per-frame layer norm.
struct FrontendConfig {
  std::vector<int> kernels = {16, 8, 5, 2};
  std::vector<int> strides = {8, 4, 5, 2};
  int dim = 64;
  double ln_eps = 1e-5;

  void validate() const;
  int hop() const;
  int receptive_field() const;
  FrameGeometry geometry() const { return {hop(), receptive_field()}; }
};

struct FrameMatrix {
  Matrix frames;  // T x D
  double frame_rate = 50.0;

  Index num_frames() const { return frames.rows(); }
};

void init_frontend(ParameterSet& params, const FrontendConfig& config,
                   std::mt19937_64& rng, const std::string& prefix = "frontend");

// Differentiable T x D output; throws when the waveform is shorter than the
// receptive field.
Var encode_frames(Tape& tape, const Waveform& w, const FrontendConfig& config,
                  const ParameterSet& params,
                  const std::string& prefix = "frontend");

FrameMatrix encode_frames(const Waveform& w, const FrontendConfig& config,
                          const ParameterSet& params,
                          const std::string& prefix = "frontend");

}  // namespace shubert

#endif  // SHUBERT_FRONTEND_H_
