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

#include <algorithm>
#include <limits>
#include <random>

#include "doctest.h"
#include "shubert/quantizer.h"

using namespace shubert;

namespace {

Matrix randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

int brute_nearest(const RowVector& x, const Matrix& c) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < c.rows(); ++k) {
    double d = 0.0;
    for (Index j = 0; j < c.cols(); ++j) {
      const double diff = x(j) - c(k, j);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

void check_monotone(const Codebook& cb) {
  for (size_t i = 1; i < cb.objective_history.size(); ++i) {
    CHECK(cb.objective_history[i] <= cb.objective_history[i - 1]);
  }
}

}  // namespace

TEST_CASE("duplicated points cluster exactly") {
  std::mt19937_64 rng(1);
  const Matrix distinct = randn(4, 3, rng);
  Matrix pts(40, 3);
  for (Index i = 0; i < 40; ++i) pts.row(i) = distinct.row(i % 4);
  const Codebook cb = fit_kmeans(pts, 4, 50, 7);
  // Means of repeated values are exact only up to rounding.
  CHECK(kmeans_objective(pts, cb.centroids) < 1e-24);
  for (Index k = 0; k < 4; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < 4; ++j) {
      best = std::min(best, (cb.centroids.row(j) - distinct.row(k)).cwiseAbs().maxCoeff());
    }
    CHECK(best < 1e-12);
  }
}

TEST_CASE("1-D {0,1,9,10} with K=2 matches the best 2-partition") {
  Matrix pts(4, 1);
  pts << 0, 1, 9, 10;
  // Oracle: exhaustive search over all non-trivial 2-partitions.
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < 15; ++mask) {
    double s[2] = {0, 0}, n[2] = {0, 0};
    for (int i = 0; i < 4; ++i) {
      s[(mask >> i) & 1] += pts(i, 0);
      n[(mask >> i) & 1] += 1;
    }
    double obj = 0.0;
    for (int i = 0; i < 4; ++i) {
      const int g = (mask >> i) & 1;
      const double d = pts(i, 0) - s[g] / n[g];
      obj += d * d;
    }
    best = std::min(best, obj);
  }
  CHECK(best == 1.0);
  const Codebook cb = fit_kmeans(pts, 2, 50, 3);
  CHECK(kmeans_objective(pts, cb.centroids) == doctest::Approx(best).epsilon(1e-12));
  std::vector<double> c = {cb.centroids(0, 0), cb.centroids(1, 0)};
  std::sort(c.begin(), c.end());
  CHECK(c[0] == 0.5);
  CHECK(c[1] == 9.5);
}

TEST_CASE("K = N gives zero objective") {
  std::mt19937_64 rng(2);
  const Matrix pts = randn(6, 2, rng);
  const Codebook cb = fit_kmeans(pts, 6, 20, 1);
  CHECK(kmeans_objective(pts, cb.centroids) == 0.0);
}

TEST_CASE("N < K is rejected") {
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(fit_kmeans(randn(3, 2, rng), 4, 10, 1), Error);
}

TEST_CASE("assignment matches an exhaustive scan and breaks ties low") {
  std::mt19937_64 rng(4);
  const Matrix pts = randn(300, 5, rng);
  const Codebook cb = fit_kmeans(pts, 7, 100, 9);
  check_monotone(cb);
  const Matrix batch = randn(100, 5, rng);
  const PseudoLabelSeq labels = assign_labels(batch, cb);
  for (Index i = 0; i < batch.rows(); ++i) {
    CHECK(labels[static_cast<size_t>(i)] == brute_nearest(batch.row(i), cb.centroids));
  }

  Codebook tie;
  tie.centroids = Matrix::Zero(6, 2);
  for (Index k = 0; k < 6; ++k) tie.centroids(k, 0) = 100.0 + k;
  tie.centroids.row(2) << -1.0, 0.0;
  tie.centroids.row(5) << 1.0, 0.0;
  Matrix x = Matrix::Zero(1, 2);
  CHECK(assign_labels(x, tie)[0] == 2);
  Matrix at = tie.centroids.row(4);
  CHECK(assign_labels(at, tie)[0] == 4);
  CHECK_THROWS_AS(assign_labels(Matrix::Zero(1, 3), tie), Error);
}

TEST_CASE("fitting is deterministic for a seed") {
  std::mt19937_64 rng(5);
  const Matrix pts = randn(200, 3, rng);
  const Codebook a = fit_kmeans(pts, 5, 50, 11);
  const Codebook b = fit_kmeans(pts, 5, 50, 11);
  CHECK(a.centroids == b.centroids);
  CHECK(a.objective_history == b.objective_history);
}

TEST_CASE("empty clusters are re-seeded and centroids stay distinct") {
  // Far outliers plus a dense blob: Lloyd iterations empty clusters easily.
  std::mt19937_64 rng(6);
  Matrix pts = randn(60, 2, rng) * 0.01;
  pts.row(0) << 50, 50;
  pts.row(1) << -50, 50;
  const Codebook cb = fit_kmeans(pts, 8, 100, 2);
  check_monotone(cb);
  for (Index i = 0; i < cb.k(); ++i) {
    for (Index j = i + 1; j < cb.k(); ++j) {
      CHECK(cb.centroids.row(i) != cb.centroids.row(j));
    }
  }
  CHECK(cb.centroids.allFinite());
}
