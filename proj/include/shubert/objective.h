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

// Training objectives: masked pseudo-label cross-entropy on each branch and
// the cross-correlation loss tying the two branches together.

#ifndef SHUBERT_OBJECTIVE_H_
#define SHUBERT_OBJECTIVE_H_

#include <random>
#include <string>
#include <vector>

#include "shubert/masking.h"
#include "shubert/numerics.h"
#include "shubert/quantizer.h"

namespace shubert {

struct HeadConfig {
  int num_classes = 32;  // K, must match the codebook
  int proj_dim = 32;
  double temperature = 0.1;
  // Plain affine D -> K head instead of cosine-to-codeword.
  bool affine = false;
};

struct CCConfig {
  int proj_dim = 32;  // D_z
  int frames = 64;    // N
  double lambda = 5e-3;
  bool center = true;
  double norm_floor = 1e-8;
};

void init_head(ParameterSet& params, int dim, const HeadConfig& config,
               std::mt19937_64& rng, const std::string& prefix = "head");
void init_lpb(ParameterSet& params, int dim, const CCConfig& config,
              std::mt19937_64& rng, const std::string& prefix = "lpb");

// T x K logits: cosine(project(c_t), codeword_k) / temperature.
Var predict_logits(Var contextual, const HeadConfig& config,
                   const ParameterSet& params,
                   const std::string& prefix = "head");

// -(1/|O|) sum_{t in O} log softmax(logits_t)[u_t]. Throws on an empty plan.
Var masked_ce(Var logits, const PseudoLabelSeq& labels, const MaskPlan& plan);

struct ProjectedPair {
  Var z;
  Var z_tilde;
  std::vector<int> frames;  // sorted indices shared by both branches
};

// N frame indices without replacement (N clamped to T), sorted.
std::vector<int> sample_frames(Index frames, int n, std::mt19937_64& rng);

ProjectedPair project_and_sample(Var c, Var c_tilde, const CCConfig& config,
                                 const ParameterSet& params,
                                 std::mt19937_64& rng,
                                 const std::string& prefix = "lpb");

struct CCResult {
  Var loss;
  Var invariance;  // sum_i (1 - R_ii)^2
  Var redundancy;  // sum_i sum_{j != i} R_ij^2
  Var r;           // D_z x D_z cross-correlation
  double lambda = 0.0;
};

CCResult cc_loss(Var z, Var z_tilde, const CCConfig& config);

struct LossBreakdown {
  Var total;
  Var ce_a;
  Var ce_b;
  Var cc_inv;
  Var cc_red;
  bool one_path = false;
};

// ce_a + ce_b + cc (two-path) or ce_a alone (one-path, `cc` ignored).
LossBreakdown total_loss(Var ce_a, Var ce_b, const CCResult& cc);
LossBreakdown one_path_loss(Var ce_a);

}  // namespace shubert

#endif  // SHUBERT_OBJECTIVE_H_
