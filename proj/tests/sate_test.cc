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
#include "shubert/sate.h"

using namespace shubert;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.n_layers = 2;
  c.dim = 16;
  c.emb_dim = 8;
  c.n_heads = 2;
  c.ffn_dim = 32;
  return c;
}

// Randomizes every parameter that is not a conditioning projection.
ParameterSet random_encoder(const EncoderConfig& c, uint64_t seed,
                            bool randomize_cond) {
  ParameterSet ps;
  std::mt19937_64 rng(seed);
  init_encoder(ps, c, rng);
  for (size_t i = 0; i < ps.size(); ++i) {
    Parameter& p = ps.at(i);
    const bool cond = p.name.find(".cond_") != std::string::npos;
    if (cond && !randomize_cond) continue;
    p.value = randn(p.value.rows(), p.value.cols(), rng, 0.3);
  }
  return ps;
}

}  // namespace

TEST_CASE("identity conditioning reduces to vanilla layer norm bitwise") {
  std::mt19937_64 rng(1);
  Tape t;
  Var x = t.constant(randn(5, 6, rng));
  Var e = t.constant(randn(1, 3, rng));
  Var gamma = t.constant(randn(1, 6, rng));
  Var beta = t.constant(randn(1, 6, rng));
  Var zero_w = t.constant(Matrix::Zero(3, 6));
  Var ones = t.constant(Matrix::Ones(1, 6));
  Var zeros = t.constant(Matrix::Zero(1, 6));
  const Matrix cond =
      cond_layer_norm(x, e, gamma, beta, zero_w, ones, zero_w, zeros, 1e-5).value();
  const Matrix plain = layer_norm(x, gamma, beta, 1e-5).value();
  CHECK(cond == plain);
}

TEST_CASE("zero conditional scale outputs beta on every row") {
  std::mt19937_64 rng(2);
  Tape t;
  Var x = t.constant(randn(4, 5, rng));
  Var e = t.constant(randn(1, 3, rng));
  Matrix beta = randn(1, 5, rng);
  Var zero_w = t.constant(Matrix::Zero(3, 5));
  Var zeros = t.constant(Matrix::Zero(1, 5));
  const Matrix out = cond_layer_norm(x, e, t.constant(randn(1, 5, rng)),
                                     t.constant(beta), zero_w, zeros, zero_w,
                                     zeros, 1e-5)
                         .value();
  for (Index r = 0; r < 4; ++r) CHECK(out.row(r) == beta);
}

TEST_CASE("hand-computed conditional layer norm row") {
  Tape t;
  Matrix x(1, 2);
  x << 2, 4;
  Var e = t.constant(Matrix::Zero(1, 1));
  Var zero_w = t.constant(Matrix::Zero(1, 2));
  Var two = t.constant(Matrix::Constant(1, 2, 2.0));
  Var zeros = t.constant(Matrix::Zero(1, 2));
  Var ones = t.constant(Matrix::Ones(1, 2));
  // w(e) = 2, b(e) = 0, gamma = 1 -> scale 2. eps is negligible.
  const Matrix out =
      cond_layer_norm(t.constant(x), e, ones, zeros, zero_w, two, zero_w, zeros, 1e-300)
          .value();
  CHECK(out(0, 0) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(out(0, 1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("encoder at init equals the vanilla encoder bitwise") {
  const EncoderConfig c = small_config();
  ParameterSet ps = random_encoder(c, 3, /*randomize_cond=*/false);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tape t;
    Var h = t.constant(randn(7, c.dim, rng));
    Var e = t.constant(randn(1, c.emb_dim, rng));
    const Matrix a = encode(h, e, c, ps, Conditioning::kSpeaker).value();
    const Matrix b = encode(h, e, c, ps, Conditioning::kVanilla).value();
    CHECK(a == b);
  }
}

TEST_CASE("single-frame input gives a finite 1 x D output") {
  const EncoderConfig c = small_config();
  ParameterSet ps = random_encoder(c, 5, true);
  std::mt19937_64 rng(6);
  Tape t;
  const Matrix out =
      encode(t.constant(randn(1, c.dim, rng)), t.constant(randn(1, c.emb_dim, rng)),
             c, ps)
          .value();
  CHECK(out.rows() == 1);
  CHECK(out.cols() == c.dim);
  CHECK(out.allFinite());
}

TEST_CASE("encoder is deterministic and sensitive to the speaker embedding") {
  const EncoderConfig c = small_config();
  ParameterSet ps = random_encoder(c, 7, true);
  std::mt19937_64 rng(8);
  const Matrix h = randn(6, c.dim, rng);
  const Matrix e1 = randn(1, c.emb_dim, rng);
  const Matrix e2 = randn(1, c.emb_dim, rng);
  auto run = [&](const Matrix& e) {
    Tape t;
    return Matrix(encode(t.constant(h), t.constant(e), c, ps).value());
  };
  CHECK(run(e1) == run(e1));
  CHECK((run(e1) - run(e2)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gradient reaches the speaker embedding through the SATL") {
  const EncoderConfig c = small_config();
  ParameterSet ps = random_encoder(c, 9, true);
  std::mt19937_64 rng(10);
  Tape t;
  Var e = t.input(randn(1, c.emb_dim, rng));
  Var out = encode(t.constant(randn(5, c.dim, rng)), e, c, ps);
  t.backward(sum(mul(out, t.constant(randn(5, c.dim, rng)))), nullptr);
  REQUIRE(t.grad(e).size() == c.emb_dim);
  CHECK(t.grad(e).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("positions make the encoder order-aware") {
  const EncoderConfig c = small_config();
  ParameterSet ps = random_encoder(c, 11, true);
  std::mt19937_64 rng(12);
  const Matrix h = randn(6, c.dim, rng);
  const Matrix e = randn(1, c.emb_dim, rng);
  Matrix swapped = h;
  swapped.row(0).swap(swapped.row(1));
  Tape t;
  const Matrix a = encode(t.constant(h), t.constant(e), c, ps).value();
  const Matrix b = encode(t.constant(swapped), t.constant(e), c, ps).value();
  CHECK((a.row(0) - b.row(1)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("encoder shape errors") {
  const EncoderConfig c = small_config();
  ParameterSet ps = random_encoder(c, 13, true);
  Tape t;
  CHECK_THROWS_AS(encode(t.constant(Matrix::Zero(4, c.dim + 1)),
                         t.constant(Matrix::Zero(1, c.emb_dim)), c, ps),
                  Error);
  CHECK_THROWS_AS(encode(t.constant(Matrix::Zero(4, c.dim)),
                         t.constant(Matrix::Zero(1, c.emb_dim + 2)), c, ps),
                  Error);
}

TEST_CASE("only the SATL carries conditioning parameters") {
  EncoderConfig c = small_config();
  c.satl_index = 1;
  ParameterSet ps;
  std::mt19937_64 rng(1);
  init_encoder(ps, c, rng);
  CHECK(ps.contains("sate.layer1.ln1.cond_w.weight"));
  CHECK(ps.contains("sate.layer1.ln2.cond_b.bias"));
  CHECK_FALSE(ps.contains("sate.layer0.ln1.cond_w.weight"));
  CHECK(ps.get("sate.layer1.ln1.cond_w.bias").value == Matrix::Ones(1, c.dim));
  CHECK(ps.get("sate.layer1.ln1.cond_b.bias").value.isZero(0.0));
  CHECK(ps.get("sate.layer1.ln1.cond_w.weight").value.isZero(0.0));
}
