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
#include <random>
#include <vector>

#include "doctest.h"
#include "shubert/numerics.h"

using namespace shubert;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng,
                     double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces an arbitrary-shaped output to a scalar with fixed random weights so
// every output element contributes a distinct gradient.
Var weighted_sum(Var y, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Var w = y.tape->constant(random_matrix(y.rows(), y.cols(), rng));
  return sum(mul(y, w));
}

void expect_pass(const GradReport& r) {
  INFO("max rel error " << r.max_rel_error << " failure '" << r.failure
                        << "'");
  CHECK(r.failure.empty());
  CHECK(r.pass);
  CHECK(r.max_rel_error < 1e-4);
}

}  // namespace

TEST_CASE("grad_check: sum of squares is exact") {
  ParameterSet ps;
  Matrix theta(1, 3);
  theta << 1, 2, 3;
  ps.add("theta", theta);
  auto loss = [&](Tape& t) { return sum(square(t.param(ps.get("theta")))); };

  Tape t;
  Var l = loss(t);
  Gradients g = zero_gradients(ps);
  t.backward(l, &g);
  CHECK(g[0](0, 0) == 2.0);
  CHECK(g[0](0, 1) == 4.0);
  CHECK(g[0](0, 2) == 6.0);

  GradReport r = grad_check(loss, ps, 1e-5);
  CHECK(r.pass);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("grad_check: constant loss has zero gradients") {
  ParameterSet ps;
  ps.add("a", Matrix::Ones(2, 2));
  auto loss = [&](Tape& t) {
    t.param(ps.get("a"));
    return t.constant(Matrix::Constant(1, 1, 4.2));
  };
  Tape t;
  Var l = loss(t);
  Gradients g = zero_gradients(ps);
  t.backward(l, &g);
  CHECK(g[0].isZero(0.0));
  GradReport r = grad_check(loss, ps, 1e-5);
  CHECK(r.pass);
  CHECK(r.max_rel_error == 0.0);
}

TEST_CASE("grad_check: non-finite loss is reported") {
  ParameterSet ps;
  Matrix a(1, 2);
  a << -1.0, 2.0;
  ps.add("a", a);
  auto loss = [&](Tape& t) { return sum(log(t.param(ps.get("a")))); };
  GradReport r = grad_check(loss, ps, 1e-5);
  CHECK_FALSE(r.pass);
  CHECK_FALSE(r.failure.empty());
}

TEST_CASE("primitives pass grad_check on random small shapes") {
  std::mt19937_64 rng(11);
  ParameterSet ps;
  ps.add("a", random_matrix(4, 5, rng));
  ps.add("b", random_matrix(4, 5, rng));
  ps.add("row", random_matrix(1, 5, rng));
  ps.add("m", random_matrix(5, 3, rng));
  ps.add("pos", (random_matrix(4, 5, rng).array().abs() + 0.5).matrix());
  auto P = [&](Tape& t, const char* n) { return t.param(ps.get(n)); };

  struct Case {
    const char* name;
    LossFn fn;
  };
  std::vector<Case> cases = {
      {"add_broadcast",
       [&](Tape& t) { return weighted_sum(add(P(t, "a"), P(t, "row")), 1); }},
      {"sub",
       [&](Tape& t) { return weighted_sum(sub(P(t, "a"), P(t, "b")), 2); }},
      {"mul_broadcast",
       [&](Tape& t) { return weighted_sum(mul(P(t, "a"), P(t, "row")), 3); }},
      {"div",
       [&](Tape& t) { return weighted_sum(div(P(t, "a"), P(t, "pos")), 4); }},
      {"matmul",
       [&](Tape& t) { return weighted_sum(matmul(P(t, "a"), P(t, "m")), 5); }},
      {"matmul_nt",
       [&](Tape& t) {
         return weighted_sum(matmul_nt(P(t, "a"), P(t, "b")), 6);
       }},
      {"matmul_tn",
       [&](Tape& t) {
         return weighted_sum(matmul_tn(P(t, "a"), P(t, "b")), 7);
       }},
      {"gelu", [&](Tape& t) { return weighted_sum(gelu(P(t, "a")), 8); }},
      {"exp_log",
       [&](Tape& t) {
         return weighted_sum(add(exp(P(t, "a")), log(P(t, "pos"))), 9);
       }},
      {"sqrt", [&](Tape& t) { return weighted_sum(sqrt(P(t, "pos")), 10); }},
      {"softmax",
       [&](Tape& t) { return weighted_sum(softmax_rows(P(t, "a")), 11); }},
      {"log_softmax",
       [&](Tape& t) { return weighted_sum(log_softmax_rows(P(t, "a")), 12); }},
      {"row_mean_var",
       [&](Tape& t) {
         return add(weighted_sum(row_mean(P(t, "a")), 13),
                    weighted_sum(row_var(P(t, "b")), 14));
       }},
      {"layer_norm",
       [&](Tape& t) {
         return weighted_sum(normalize_rows_moments(P(t, "a"), 1e-5), 15);
       }},
      {"elementwise_affine",
       [&](Tape& t) {
         return weighted_sum(add(mul(P(t, "a"), P(t, "row")), P(t, "row")),
                             16);
       }},
      {"cosine",
       [&](Tape& t) {
         return weighted_sum(cosine_similarity(P(t, "a"), P(t, "b"), 1e-8),
                             17);
       }},
      {"column_correlation",
       [&](Tape& t) {
         return weighted_sum(column_correlation(P(t, "a"), P(t, "b"), 1e-8),
                             25);
       }},
      {"normalize_cols",
       [&](Tape& t) {
         return weighted_sum(l2_normalize_cols(P(t, "a"), 1e-8), 18);
       }},
      {"gather_pick",
       [&](Tape& t) {
         std::vector<int> rows = {3, 0, 3};
         std::vector<int> cols = {1, 4, 2};
         return add(weighted_sum(gather_rows(P(t, "a"), rows), 19),
                    weighted_sum(pick(P(t, "b"), rows, cols), 20));
       }},
      {"replace_rows",
       [&](Tape& t) {
         std::vector<int> rows = {1, 2};
         return weighted_sum(replace_rows(P(t, "a"), rows, P(t, "row")), 21);
       }},
      {"concat_slice",
       [&](Tape& t) {
         std::vector<Var> parts = {slice_cols(P(t, "a"), 1, 2), P(t, "b")};
         std::vector<Var> rows = {P(t, "a"), slice_rows(P(t, "b"), 2, 2)};
         return add(weighted_sum(concat_cols(parts), 22),
                    weighted_sum(concat_rows(rows), 23));
       }},
      {"mean_pool",
       [&](Tape& t) {
         return add(weighted_sum(mean_rows(P(t, "a")), 24),
                    mean(square(P(t, "b"))));
       }},
  };
  for (const auto& c : cases) {
    INFO(c.name);
    expect_pass(grad_check(c.fn, ps, 1e-5));
  }
}

TEST_CASE("conv1d matches a direct loop and passes grad_check") {
  std::mt19937_64 rng(5);
  const int kernel = 4, stride = 3, cin = 2, cout = 3;
  ParameterSet ps;
  ps.add("x", random_matrix(17, cin, rng));
  ps.add("w", random_matrix(kernel * cin, cout, rng));
  ps.add("b", random_matrix(1, cout, rng));

  Tape t;
  Var y = conv1d(t.param(ps.get("x")), t.param(ps.get("w")),
                 t.param(ps.get("b")), kernel, stride);
  const Matrix& x = ps.get("x").value;
  const Matrix& w = ps.get("w").value;
  REQUIRE(y.rows() == (17 - kernel) / stride + 1);
  for (Index f = 0; f < y.rows(); ++f) {
    for (int o = 0; o < cout; ++o) {
      double acc = ps.get("b").value(0, o);
      for (int j = 0; j < kernel; ++j) {
        for (int c = 0; c < cin; ++c) {
          acc += x(f * stride + j, c) * w(j * cin + c, o);
        }
      }
      CHECK(y.value()(f, o) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
  auto loss = [&](Tape& t) {
    return weighted_sum(conv1d(t.param(ps.get("x")), t.param(ps.get("w")),
                               t.param(ps.get("b")), kernel, stride),
                        31);
  };
  expect_pass(grad_check(loss, ps, 1e-5));
}

TEST_CASE("conv1d rejects input shorter than the kernel") {
  Tape t;
  Var x = t.constant(Matrix::Zero(3, 1));
  Var w = t.constant(Matrix::Zero(4, 2));
  Var b = t.constant(Matrix::Zero(1, 2));
  CHECK_THROWS_AS(conv1d(x, w, b, 4, 2), Error);
}

TEST_CASE("parameter leaves are shared within one tape") {
  ParameterSet ps;
  ps.add("w", Matrix::Ones(2, 2));
  Tape t;
  Var a = t.param(ps.get("w"));
  Var b = t.param(ps.get("w"));
  CHECK(a.id == b.id);
  Gradients g = zero_gradients(ps);
  t.backward(sum(add(a, b)), &g);
  CHECK(g[0].isApprox(Matrix::Constant(2, 2, 2.0)));
}

TEST_CASE("forward and backward are bitwise deterministic") {
  std::mt19937_64 rng(3);
  ParameterSet ps;
  ps.add("a", random_matrix(6, 4, rng));
  ps.add("m", random_matrix(4, 4, rng));
  auto run = [&]() {
    Tape t;
    Var h = gelu(matmul(t.param(ps.get("a")), t.param(ps.get("m"))));
    Var l = sum(softmax_rows(normalize_rows_moments(h, 1e-5)));
    Gradients g = zero_gradients(ps);
    t.backward(weighted_sum(h, 4), &g);
    return std::make_pair(l.scalar(), g);
  };
  auto [l1, g1] = run();
  auto [l2, g2] = run();
  CHECK(l1 == l2);
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("broadcast shape errors are rejected") {
  Tape t;
  Var a = t.constant(Matrix::Zero(3, 4));
  Var b = t.constant(Matrix::Zero(2, 4));
  CHECK_THROWS_AS(add(a, b), Error);
  CHECK_THROWS_AS(matmul(a, a), Error);
}

TEST_CASE("column_correlation of a matrix with itself has a unit diagonal") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Tape t;
    Matrix m = random_matrix(7, 5, rng, 3.0);
    Var r = column_correlation(t.constant(m), t.constant(m), 1e-8);
    for (Index i = 0; i < 5; ++i) CHECK(r.value()(i, i) == 1.0);
    CHECK((r.value().array().abs() <= 1.0 + 1e-12).all());
  }
}
