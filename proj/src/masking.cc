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

#include "shubert/masking.h"

#include <algorithm>

namespace shubert {

MaskPlan plan_from_starts(Index frames, std::vector<int> starts,
                          int span_length) {
  SHUBERT_CHECK(frames >= 1, "mask: frame count must be >= 1");
  SHUBERT_CHECK(span_length >= 1, "mask: span length must be >= 1");
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());
  std::vector<char> hit(static_cast<size_t>(frames), 0);
  for (int s : starts) {
    SHUBERT_CHECK(s >= 0 && s < frames, "mask: span start out of range");
    const Index end = std::min<Index>(frames, s + span_length);
    for (Index t = s; t < end; ++t) hit[static_cast<size_t>(t)] = 1;
  }
  MaskPlan plan;
  plan.span_starts = std::move(starts);
  plan.span_length = span_length;
  plan.frames = frames;
  for (Index t = 0; t < frames; ++t) {
    if (hit[static_cast<size_t>(t)]) plan.masked.push_back(static_cast<int>(t));
  }
  return plan;
}

MaskPlan plan_mask(Index frames, double p_start, int span_length,
                   std::mt19937_64& rng) {
  SHUBERT_CHECK(p_start >= 0.0 && p_start <= 1.0,
                "mask: p_start must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> starts;
  for (Index t = 0; t < frames; ++t) {
    // Always consume one draw per frame so plans for equal T stay aligned.
    if (u(rng) < p_start) starts.push_back(static_cast<int>(t));
  }
  return plan_from_starts(frames, std::move(starts), span_length);
}

MaskPlan no_mask(Index frames) { return plan_from_starts(frames, {}, 1); }

Var apply_mask(Var frames, const MaskPlan& plan, Var mask_embed) {
  SHUBERT_CHECK(plan.frames == frames.rows(),
                "mask: plan built for " + std::to_string(plan.frames) +
                    " frames, input has " + std::to_string(frames.rows()));
  if (plan.masked.empty()) return frames;
  return replace_rows(frames, plan.masked, mask_embed);
}

}  // namespace shubert
