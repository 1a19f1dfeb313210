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

#include "shubert/spkemb.h"

#include <cmath>

namespace shubert {

SpeakerEmbedding oracle_embedding(int speaker_id, uint64_t seed, int dim) {
  SHUBERT_CHECK(speaker_id >= 0, "oracle_embedding: negative speaker id");
  SHUBERT_CHECK(dim >= 1, "oracle_embedding: dim must be >= 1");
  std::mt19937_64 rng(
      mix_seed(seed ^ 0x5BEA4E11ULL, static_cast<uint64_t>(speaker_id)));
  std::normal_distribution<double> n(0.0, 1.0);
  SpeakerEmbedding e;
  e.vector.resize(dim);
  for (int i = 0; i < dim; ++i) e.vector(i) = n(rng);
  e.vector /= e.vector.norm();
  return e;
}

void init_spkemb(ParameterSet& params, int feature_dim,
                 const SpkEmbConfig& config, std::mt19937_64& rng,
                 const std::string& prefix) {
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(feature_dim));
  Matrix w(feature_dim, config.dim);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  params.add(prefix + ".proj.weight", std::move(w));
  params.add(prefix + ".proj.bias", Matrix::Zero(1, config.dim));
}

Var embed_features(Var frames, const SpkEmbConfig& config,
                   const ParameterSet& params, const std::string& prefix) {
  SHUBERT_CHECK(frames.rows() >= 1, "speaker embedding needs >= 1 frame");
  Tape& t = *frames.tape;
  Var pooled = mean_rows(frames);
  Var proj = add(matmul(pooled, t.param(params.get(prefix + ".proj.weight"))),
                 t.param(params.get(prefix + ".proj.bias")));
  return l2_normalize_rows(proj, config.norm_floor);
}

Var embed_enrollment(Tape& tape, const Waveform& enrollment,
                     const FrontendConfig& frontend, const SpkEmbConfig& config,
                     const ParameterSet& params) {
  SHUBERT_CHECK(enrollment.size() >= frontend.receptive_field(),
                "enrollment too short: " + std::to_string(enrollment.size()) +
                    " samples, need at least " +
                    std::to_string(frontend.receptive_field()));
  return embed_features(encode_frames(tape, enrollment, frontend, params),
                        config, params);
}

SpeakerEmbedding embed_enrollment(const Waveform& enrollment,
                                  const FrontendConfig& frontend,
                                  const SpkEmbConfig& config,
                                  const ParameterSet& params) {
  Tape tape;
  Var e = embed_enrollment(tape, enrollment, frontend, config, params);
  return {e.value().row(0)};
}

}  // namespace shubert
