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

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "shubert/objective.h"

using namespace shubert;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

ParameterSet identity_head(const Matrix& codewords) {
  ParameterSet ps;
  const Index d = codewords.cols();
  ps.add("head.proj.weight", Matrix::Identity(d, d));
  ps.add("head.proj.bias", Matrix::Zero(1, d));
  ps.add("head.codewords", codewords);
  return ps;
}

}  // namespace

TEST_CASE("logit of a frame equal to its codeword is 1/temperature") {
  std::mt19937_64 rng(1);
  const Matrix cw = randn(5, 4, rng);
  ParameterSet ps = identity_head(cw);
  HeadConfig hc;
  hc.num_classes = 5;
  hc.proj_dim = 4;
  Tape t;
  const Matrix logits =
      predict_logits(t.constant(cw.row(3)), hc, ps).value();
  CHECK(logits(0, 3) == doctest::Approx(10.0).epsilon(1e-12));
  Index arg;
  logits.row(0).maxCoeff(&arg);
  CHECK(arg == 3);
}

TEST_CASE("frame orthogonal to all codewords has zero logits") {
  Matrix cw = Matrix::Zero(3, 4);
  cw(0, 0) = 1;
  cw(1, 1) = 2;
  cw(2, 0) = -1;
  cw(2, 1) = 1;
  ParameterSet ps = identity_head(cw);
  HeadConfig hc;
  hc.num_classes = 3;
  hc.proj_dim = 4;
  Matrix x = Matrix::Zero(1, 4);
  x(0, 2) = 1.5;
  x(0, 3) = -0.5;
  Tape t;
  CHECK(predict_logits(t.constant(x), hc, ps).value().isZero(0.0));
  // A zero frame hits the norm floor instead of dividing by zero.
  CHECK(predict_logits(t.constant(Matrix::Zero(1, 4)), hc, ps).value().isZero(0.0));
}

TEST_CASE("logit argmax matches a brute-force cosine scan") {
  std::mt19937_64 rng(2);
  ParameterSet ps;
  HeadConfig hc;
  hc.num_classes = 6;
  hc.proj_dim = 3;
  init_head(ps, 5, hc, rng);
  const Matrix c = randn(20, 5, rng);
  Tape t;
  const Matrix logits = predict_logits(t.constant(c), hc, ps).value();
  const Matrix proj = c * ps.get("head.proj.weight").value +
                      ps.get("head.proj.bias").value.replicate(20, 1);
  const Matrix& cw = ps.get("head.codewords").value;
  for (Index r = 0; r < 20; ++r) {
    Index best = 0;
    double best_cos = -2.0;
    for (Index k = 0; k < cw.rows(); ++k) {
      const double cs = proj.row(r).dot(cw.row(k)) / (proj.row(r).norm() * cw.row(k).norm());
      if (cs > best_cos) {
        best_cos = cs;
        best = k;
      }
    }
    Index arg;
    logits.row(r).maxCoeff(&arg);
    CHECK(arg == best);
  }
}

TEST_CASE("masked CE worked examples") {
  Tape t;
  {
    Matrix l = Matrix::Zero(3, 4);
    l(1, 2) = 100.0;
    const MaskPlan p = plan_from_starts(3, {1}, 1);
    CHECK(masked_ce(t.constant(l), {0, 2, 0}, p).scalar() < 1e-8);
  }
  {
    const MaskPlan p = plan_from_starts(5, {0}, 5);
    const double ce = masked_ce(t.constant(Matrix::Zero(5, 32)), {0, 5, 9, 31, 2}, p).scalar();
    CHECK(std::abs(ce - std::log(32.0)) < 1e-12);
  }
  {
    Matrix l(1, 2);
    l << 0.3, 0.3;
    const MaskPlan p = plan_from_starts(1, {0}, 1);
    CHECK(masked_ce(t.constant(l), {1}, p).scalar() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-15));
  }
}

TEST_CASE("masked CE ignores unmasked frames and rejects bad input") {
  std::mt19937_64 rng(3);
  Matrix l = randn(6, 4, rng);
  const MaskPlan p = plan_from_starts(6, {2}, 2);
  Tape t;
  const double a = masked_ce(t.constant(l), {0, 1, 2, 3, 0, 1}, p).scalar();
  Matrix l2 = l;
  l2.row(0).setConstant(50.0);
  l2.row(5).setConstant(-7.0);
  const double b = masked_ce(t.constant(l2), {3, 3, 2, 3, 1, 1}, p).scalar();
  CHECK(a == b);
  CHECK_THROWS_AS(masked_ce(t.constant(l), {0, 1, 2, 3, 0, 1}, no_mask(6)), Error);
  CHECK_THROWS_AS(masked_ce(t.constant(l), {0, 1, 2}, p), Error);
}

TEST_CASE("frame sampling") {
  std::mt19937_64 a(4), b(4);
  const std::vector<int> s1 = sample_frames(50, 16, a);
  const std::vector<int> s2 = sample_frames(50, 16, b);
  CHECK(s1 == s2);
  CHECK(s1.size() == 16);
  CHECK(std::is_sorted(s1.begin(), s1.end()));
  CHECK(std::adjacent_find(s1.begin(), s1.end()) == s1.end());
  std::vector<int> all(10);
  std::iota(all.begin(), all.end(), 0);
  CHECK(sample_frames(10, 64, a) == all);
  CHECK(sample_frames(10, 10, a) == all);
}

TEST_CASE("identical branches project to identical Z") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  CCConfig cc;
  cc.proj_dim = 4;
  cc.frames = 6;
  init_lpb(ps, 8, cc, rng);
  const Matrix c = randn(10, 8, rng);
  Tape t;
  ProjectedPair pair = project_and_sample(t.constant(c), t.constant(c), cc, ps, rng);
  CHECK(pair.z.value() == pair.z_tilde.value());
  CHECK(pair.frames.size() == 6);
}

TEST_CASE("CC loss worked examples") {
  Tape t;
  CCConfig raw;
  raw.center = false;
  Matrix z(2, 2);
  z << 1, 1, -1, 1;
  CCResult r = cc_loss(t.constant(z), t.constant(z), raw);
  CHECK(r.r.value() == Matrix::Identity(2, 2));
  CHECK(r.loss.scalar() == 0.0);

  std::mt19937_64 rng(6);
  const Matrix a = randn(12, 5, rng);
  for (bool center : {false, true}) {
    CCConfig c;
    c.center = center;
    CCResult neg = cc_loss(t.constant(a), t.constant(-a), c);
    CHECK(neg.invariance.scalar() == doctest::Approx(4.0 * 5).epsilon(1e-12));
    for (Index i = 0; i < 5; ++i) {
      CHECK(neg.r.value()(i, i) == doctest::Approx(-1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("CC loss on identical inputs: zero invariance, lambda-weighted redundancy") {
  std::mt19937_64 rng(7);
  CCConfig c;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix z = randn(16, 8, rng, 3.0);
    Tape t;
    CCResult r = cc_loss(t.constant(z), t.constant(z), c);
    CHECK(r.invariance.scalar() == 0.0);
    CHECK(r.loss.scalar() == c.lambda * r.redundancy.scalar());
    CHECK((r.r.value().array().abs() <= 1.0 + 1e-6).all());
  }
}

TEST_CASE("CC loss is invariant to column scaling and paired row order") {
  std::mt19937_64 rng(8);
  const Matrix z = randn(10, 4, rng);
  const Matrix zt = z + randn(10, 4, rng, 0.5);
  Matrix scale = Matrix::Zero(4, 4);
  scale.diagonal() << 2.0, 0.5, 7.0, 1.3;
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(10);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 10, rng);
  CCConfig c;
  Tape t;
  const double base = cc_loss(t.constant(z), t.constant(zt), c).loss.scalar();
  const double scaled = cc_loss(t.constant(z * scale), t.constant(zt * scale), c).loss.scalar();
  const double permuted =
      cc_loss(t.constant(perm * z), t.constant(perm * zt), c).loss.scalar();
  CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("constant column hits the norm floor instead of dividing by zero") {
  Matrix z(4, 2);
  z << 1, 3, -2, 3, 0.5, 3, 4, 3;
  Tape t;
  CCResult r = cc_loss(t.constant(z), t.constant(z), CCConfig{});
  CHECK(r.r.value().allFinite());
  CHECK(std::abs(r.r.value()(1, 1)) < 1e-6);
}

TEST_CASE("lambda = 0 leaves CE terms plus the invariance term") {
  std::mt19937_64 rng(9);
  CCConfig c;
  c.lambda = 0.0;
  Tape t;
  Var ce_a = t.constant(Matrix::Constant(1, 1, 1.25));
  Var ce_b = t.constant(Matrix::Constant(1, 1, 0.5));
  CCResult cc = cc_loss(t.constant(randn(8, 3, rng)), t.constant(randn(8, 3, rng)), c);
  LossBreakdown l = total_loss(ce_a, ce_b, cc);
  CHECK(l.total.scalar() == doctest::Approx(1.75 + cc.invariance.scalar()).epsilon(1e-15));
  CHECK_FALSE(l.one_path);
  LossBreakdown one = one_path_loss(ce_a);
  CHECK(one.total.scalar() == 1.25);
  CHECK(one.one_path);
}

TEST_CASE("projection and CC loss pass grad_check") {
  std::mt19937_64 rng(10);
  ParameterSet ps;
  CCConfig cc;
  cc.proj_dim = 4;
  cc.frames = 8;
  init_lpb(ps, 6, cc, rng);
  HeadConfig hc;
  hc.num_classes = 5;
  hc.proj_dim = 3;
  init_head(ps, 6, hc, rng);
  ps.add("c", randn(12, 6, rng));
  ps.add("ct", randn(12, 6, rng));
  const PseudoLabelSeq labels = {0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 0, 1};
  const MaskPlan plan = plan_from_starts(12, {2, 7}, 3);
  auto loss = [&](Tape& t) {
    std::mt19937_64 r(3);
    Var c = t.param(ps.get("c"));
    Var ct = t.param(ps.get("ct"));
    ProjectedPair z = project_and_sample(c, ct, cc, ps, r);
    return total_loss(masked_ce(predict_logits(c, hc, ps), labels, plan),
                      masked_ce(predict_logits(ct, hc, ps), labels, plan),
                      cc_loss(z.z, z.z_tilde, cc))
        .total;
  };
  GradReport rep = grad_check(loss, ps, 1e-5);
  INFO("max rel error " << rep.max_rel_error);
  CHECK(rep.pass);
}
