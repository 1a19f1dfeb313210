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

#include <random>

#include "doctest.h"
#include "shubert/masking.h"

using namespace shubert;

TEST_CASE("p_start 0 masks nothing, p_start 1 with span 1 masks everything") {
  std::mt19937_64 rng(1);
  CHECK(plan_mask(50, 0.0, 10, rng).empty());
  MaskPlan all = plan_mask(50, 1.0, 1, rng);
  REQUIRE(all.masked.size() == 50);
  for (int t = 0; t < 50; ++t) CHECK(all.masked[static_cast<size_t>(t)] == t);
}

TEST_CASE("spans are unions clipped to the sequence") {
  MaskPlan p = plan_from_starts(20, {3}, 5);
  CHECK(p.masked == std::vector<int>{3, 4, 5, 6, 7});
  MaskPlan overlap = plan_from_starts(10, {6, 2, 4}, 3);
  CHECK(overlap.masked == std::vector<int>{2, 3, 4, 5, 6, 7, 8});
  MaskPlan tail = plan_from_starts(10, {8}, 5);
  CHECK(tail.masked == std::vector<int>{8, 9});
  CHECK_THROWS_AS(plan_from_starts(10, {10}, 2), Error);
  CHECK_THROWS_AS(plan_from_starts(10, {-1}, 2), Error);
}

TEST_CASE("masked fraction matches the span-start model") {
  // P(frame masked) = 1 - (1 - p)^span away from the left edge.
  std::mt19937_64 rng(11);
  const double p = 0.08;
  const int span = 10;
  double masked = 0.0, total = 0.0;
  for (int i = 0; i < 400; ++i) {
    MaskPlan plan = plan_mask(200, p, span, rng);
    for (int t : plan.masked) {
      if (t >= span) masked += 1.0;
    }
    total += 200 - span;
  }
  const double expect = 1.0 - std::pow(1.0 - p, span);
  CHECK(masked / total == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("plans are deterministic for a seed") {
  std::mt19937_64 a(5), b(5);
  CHECK(plan_mask(80, 0.1, 4, a).masked == plan_mask(80, 0.1, 4, b).masked);
}

TEST_CASE("apply_mask replaces exactly the planned rows") {
  Tape t;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Matrix h(6, 3);
  for (Index i = 0; i < h.size(); ++i) h.data()[i] = n(rng);
  Matrix m(1, 3);
  m << 7, 8, 9;
  Var hv = t.constant(h);
  Var mv = t.constant(m);

  CHECK(apply_mask(hv, no_mask(6), mv).value() == h);

  Matrix one = apply_mask(hv, plan_from_starts(6, {2}, 1), mv).value();
  for (Index r = 0; r < 6; ++r) {
    if (r == 2) {
      CHECK(one.row(r) == m);
    } else {
      CHECK(one.row(r) == h.row(r));
    }
  }

  Matrix full = apply_mask(hv, plan_from_starts(6, {0}, 6), mv).value();
  for (Index r = 0; r < 6; ++r) CHECK(full.row(r) == m);

  CHECK_THROWS_AS(apply_mask(hv, no_mask(5), mv), Error);
}

TEST_CASE("single-frame input") {
  std::mt19937_64 rng(3);
  MaskPlan p = plan_mask(1, 1.0, 10, rng);
  CHECK(p.masked == std::vector<int>{0});
}
