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

#include "shubert/quantizer.h"

#include <cmath>
#include <limits>
#include <random>

namespace shubert {

namespace {

// Exact squared distances, computed per pair so tie-breaking is not disturbed
// by the cancellation of the |x|^2 - 2xc + |c|^2 expansion.
void nearest(const Matrix& x, const Matrix& c, std::vector<int>& label,
             std::vector<double>& dist) {
  const Index n = x.rows();
  label.assign(static_cast<size_t>(n), 0);
  dist.assign(static_cast<size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index j = 0; j < c.rows(); ++j) {
      const double d = (x.row(i) - c.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    label[static_cast<size_t>(i)] = arg;
    dist[static_cast<size_t>(i)] = best;
  }
}

double total(const std::vector<double>& d) {
  double s = 0.0;
  for (double v : d) s += v;
  return s;
}

}  // namespace

double kmeans_objective(const Matrix& features, const Matrix& centroids) {
  std::vector<int> lab;
  std::vector<double> dist;
  nearest(features, centroids, lab, dist);
  return total(dist);
}

Codebook fit_kmeans(const Matrix& features, int k, int max_iters,
                    uint64_t seed, double rel_tol) {
  const Index n = features.rows();
  SHUBERT_CHECK(k >= 1, "kmeans: K must be >= 1");
  SHUBERT_CHECK(n >= k, "kmeans: need N >= K (N=" + std::to_string(n) +
                            ", K=" + std::to_string(k) + ")");
  SHUBERT_CHECK(features.allFinite(), "kmeans: non-finite features");
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  Matrix c(k, features.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  c.row(0) = features.row(first(rng));
  std::vector<double> d2(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    d2[static_cast<size_t>(i)] = (features.row(i) - c.row(0)).squaredNorm();
  }
  for (int j = 1; j < k; ++j) {
    const double sum = total(d2);
    Index pick = 0;
    if (sum > 0.0) {
      std::uniform_real_distribution<double> u(0.0, sum);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2[static_cast<size_t>(pick)];
        if (r <= 0.0) break;
      }
      // Rounding can land on an already-chosen point; walk to a positive one.
      while (d2[static_cast<size_t>(pick)] == 0.0 && pick + 1 < n) ++pick;
    } else {
      pick = first(rng);
    }
    c.row(j) = features.row(pick);
    for (Index i = 0; i < n; ++i) {
      d2[static_cast<size_t>(i)] =
          std::min(d2[static_cast<size_t>(i)],
                   (features.row(i) - c.row(j)).squaredNorm());
    }
  }

  Codebook cb;
  cb.seed = seed;
  std::vector<int> label;
  std::vector<double> dist;
  nearest(features, c, label, dist);
  double obj = total(dist);
  // Centroid means of duplicated points can land an ulp away from them.
  const double slack = 1e-12 * features.squaredNorm();
  cb.objective_history.push_back(obj);

  for (int iter = 0; iter < max_iters; ++iter) {
    Matrix sums = Matrix::Zero(k, features.cols());
    std::vector<Index> counts(static_cast<size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(label[static_cast<size_t>(i)]) += features.row(i);
      ++counts[static_cast<size_t>(label[static_cast<size_t>(i)])];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<size_t>(j)] > 0) {
        c.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<size_t>(j)]);
      }
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<size_t>(j)] > 0) continue;
      Index far = 0;
      for (Index i = 1; i < n; ++i) {
        if (dist[static_cast<size_t>(i)] > dist[static_cast<size_t>(far)]) far = i;
      }
      c.row(j) = features.row(far);
      dist[static_cast<size_t>(far)] = 0.0;
    }
    nearest(features, c, label, dist);
    const double next = total(dist);
    if (next > obj * (1.0 + 1e-12) + slack) {
      throw Error("kmeans: objective increased from " + std::to_string(obj) +
                  " to " + std::to_string(next));
    }
    cb.objective_history.push_back(next);
    const double change = obj > 0.0 ? (obj - next) / obj : 0.0;
    obj = next;
    if (change < rel_tol) break;
  }
  cb.centroids = std::move(c);
  return cb;
}

PseudoLabelSeq assign_labels(const Matrix& features, const Codebook& cb) {
  SHUBERT_CHECK(features.cols() == cb.dim(),
                "assign_labels: feature dim " + std::to_string(features.cols()) +
                    " != codebook dim " + std::to_string(cb.dim()));
  std::vector<int> label;
  std::vector<double> dist;
  nearest(features, cb.centroids, label, dist);
  return label;
}

}  // namespace shubert
