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

#ifndef SHUBERT_MASKING_H_
#define SHUBERT_MASKING_H_

#include <random>
#include <vector>

#include "shubert/numerics.h"

namespace shubert {

struct MaskConfig {
  double p_start = 0.08;
  int span_length = 10;
  // Draw an independent plan for the second branch instead of sharing one.
  bool independent_branches = false;
};

// Masked frame set O: the union of [start, start + span_length) clipped to
// [0, frames).
struct MaskPlan {
  std::vector<int> masked;  // sorted, unique
  std::vector<int> span_starts;
  int span_length = 1;
  Index frames = 0;

  bool empty() const { return masked.empty(); }
};

// Each frame independently starts a span with probability p_start.
MaskPlan plan_mask(Index frames, double p_start, int span_length,
                   std::mt19937_64& rng);
MaskPlan plan_from_starts(Index frames, std::vector<int> starts,
                          int span_length);
// Inference plan: nothing masked.
MaskPlan no_mask(Index frames);

// Rows of H listed in the plan are replaced by the 1 x D mask embedding.
Var apply_mask(Var frames, const MaskPlan& plan, Var mask_embed);

}  // namespace shubert

#endif  // SHUBERT_MASKING_H_
