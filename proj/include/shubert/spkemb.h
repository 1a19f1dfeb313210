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

// Speaker embedding e from enrollment audio.

#ifndef SHUBERT_SPKEMB_H_
#define SHUBERT_SPKEMB_H_

#include <random>
#include <string>

#include "shubert/frontend.h"
#include "shubert/numerics.h"

namespace shubert {

struct SpeakerEmbedding {
  RowVector vector;  // unit L2 norm

  Index dim() const { return vector.size(); }
};

struct SpkEmbConfig {
  int dim = 32;
  double norm_floor = 1e-8;
};

// Frozen unit-norm Gaussian vector keyed by (speaker_id, seed).
SpeakerEmbedding oracle_embedding(int speaker_id, uint64_t seed, int dim = 32);

void init_spkemb(ParameterSet& params, int feature_dim,
                 const SpkEmbConfig& config, std::mt19937_64& rng,
                 const std::string& prefix = "spkemb");

// Mean-pools frame features, projects to E and L2-normalises. Returns 1 x E.
Var embed_features(Var frames, const SpkEmbConfig& config,
                   const ParameterSet& params,
                   const std::string& prefix = "spkemb");

// Frontend -> embed_features. Throws on enrollment shorter than one frame.
Var embed_enrollment(Tape& tape, const Waveform& enrollment,
                     const FrontendConfig& frontend, const SpkEmbConfig& config,
                     const ParameterSet& params);

SpeakerEmbedding embed_enrollment(const Waveform& enrollment,
                                  const FrontendConfig& frontend,
                                  const SpkEmbConfig& config,
                                  const ParameterSet& params);

}  // namespace shubert

#endif  // SHUBERT_SPKEMB_H_
