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

// Speaker adapted transformer encoder.
//
// A stack of pre-norm transformer layers. The layer at `satl_index` swaps its
// layer norms for conditional layer norms whose scale is modulated by the
// speaker embedding:
//
//   out = (x - mean) / sqrt(var + eps) * (w(e) * gamma + b(e)) + beta
//
// with w(.) and b(.) affine maps E -> D. All other layers use the plain
// (x - mean) / sqrt(var + eps) * gamma + beta.

#ifndef SHUBERT_SATE_H_
#define SHUBERT_SATE_H_

#include <random>
#include <string>

#include "shubert/numerics.h"

namespace shubert {

struct EncoderConfig {
  int n_layers = 4;
  int satl_index = 0;
  int dim = 64;
  int emb_dim = 32;
  int n_heads = 4;
  int ffn_dim = 256;
  double ln_eps = 1e-5;
  // Conditional norm on both the pre-attention and pre-FFN norms of the SATL;
  // false conditions only the pre-attention norm.
  bool satl_both_norms = true;
  double pos_scale = 0.1;

  void validate() const;
};

void init_encoder(ParameterSet& params, const EncoderConfig& config,
                  std::mt19937_64& rng, const std::string& prefix = "sate");

// Names of one layer norm's parameters; `cond_*` exist only on SATL norms.
struct NormParams {
  std::string gamma, beta, cond_w_weight, cond_w_bias, cond_b_weight,
      cond_b_bias;
};
NormParams norm_param_names(const std::string& prefix, int layer, int which);

// Vanilla per-row layer norm with affine gamma/beta (1 x D each).
Var layer_norm(Var x, Var gamma, Var beta, double eps);

// Conditional layer norm. `e` is 1 x E; projections are E x D weights with
// 1 x D biases.
Var cond_layer_norm(Var x, Var e, Var gamma, Var beta, Var w_weight,
                    Var w_bias, Var b_weight, Var b_bias, double eps);

// Fixed sinusoidal table, frames x dim.
Matrix sinusoidal_positions(Index frames, int dim);

enum class Conditioning { kSpeaker, kVanilla };

// Runs the first `n_layers` layers (all when negative). The final layer norm
// is applied only when the whole stack runs. kVanilla ignores `e` and uses
// plain layer norm everywhere.
Var encode(Var masked_frames, Var e, const EncoderConfig& config,
           const ParameterSet& params, Conditioning mode = Conditioning::kSpeaker,
           int n_layers = -1, const std::string& prefix = "sate");

}  // namespace shubert

#endif  // SHUBERT_SATE_H_
