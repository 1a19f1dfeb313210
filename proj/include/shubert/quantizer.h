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

// Offline k-means pseudo-labels.

#ifndef SHUBERT_QUANTIZER_H_
#define SHUBERT_QUANTIZER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shubert/common.h"

namespace shubert {

struct Codebook {
  Matrix centroids;  // K x D_f
  std::string feature_source;
  uint64_t seed = 0;
  int layer_index = 0;
  // Lloyd objective after every assignment pass, first entry after seeding.
  std::vector<double> objective_history;

  int k() const { return static_cast<int>(centroids.rows()); }
  Index dim() const { return centroids.cols(); }
};

using PseudoLabelSeq = std::vector<int>;

struct KMeansConfig {
  int k = 32;
  int max_iters = 100;
  double rel_tol = 1e-6;
  // Number of frames sampled from the pool for fitting (0 = all).
  Index max_fit_frames = 20000;
  uint64_t seed = 17;
};

// Lloyd's algorithm with k-means++ seeding. Throws when N < K. An empty
// cluster is re-seeded at the point farthest from its current centroid.
// Objective monotonicity is checked on every pass and violations throw.
Codebook fit_kmeans(const Matrix& features, int k, int max_iters, uint64_t seed,
                    double rel_tol = 1e-6);

// Sum of squared distances from each row to its nearest centroid.
double kmeans_objective(const Matrix& features, const Matrix& centroids);

// Nearest centroid by squared Euclidean distance, ties -> lowest index.
PseudoLabelSeq assign_labels(const Matrix& features, const Codebook& cb);

// Labels keyed by example or utterance id.
using LabelStore = std::map<std::string, PseudoLabelSeq>;

}  // namespace shubert

#endif  // SHUBERT_QUANTIZER_H_
