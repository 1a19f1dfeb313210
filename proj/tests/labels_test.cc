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

#include "doctest.h"
#include "shubert/dataio.h"
#include "shubert/labels.h"
#include "tiny_fixture.h"

using namespace shubert;
using namespace shubert::testing;

TEST_CASE("label sequences align with frames and are regenerated identically") {
  const ModelConfig mc = tiny_model();
  Corpus corpus(tiny_corpus(mc));
  const LabelModel lm = tiny_label_model(mc);
  const auto items = train_items(corpus);
  const LabelBuild a = build_labels(items, lm, tiny_kmeans());
  const LabelBuild b = build_labels(items, lm, tiny_kmeans());
  CHECK(a.labels == b.labels);
  CHECK(a.codebook.centroids == b.codebook.centroids);
  CHECK(a.codebook.feature_source == "encoder_layer_1");
  CHECK(a.codebook.k() == 8);
  const FrameGeometry g = mc.frontend.geometry();
  REQUIRE(a.labels.size() == items.size());
  for (const auto& it : items) {
    const PseudoLabelSeq& l = a.labels.at(it.id);
    CHECK(static_cast<Index>(l.size()) == g.frames(it.clean->size()));
    CHECK(l == label_waveform(lm, a.codebook, *it.clean));
    for (int x : l) CHECK((x >= 0 && x < 8));
  }
  // Objective history never increases.
  const auto& h = a.codebook.objective_history;
  for (size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] * (1 + 1e-12));

  TempDir dir("labels_regen");
  write_label_store(dir / "a.jsonl", a.labels);
  write_label_store(dir / "b.jsonl", b.labels);
  CHECK(file_digest(dir / "a.jsonl") == file_digest(dir / "b.jsonl"));
}

TEST_CASE("frontend features are usable as the label source") {
  const ModelConfig mc = tiny_model();
  Corpus corpus(tiny_corpus(mc));
  LabelModel lm = tiny_label_model(mc);
  lm.layer_index = 0;
  const LabelBuild a = build_labels(train_items(corpus), lm, tiny_kmeans());
  CHECK(a.codebook.feature_source == "frontend");
  CHECK(a.codebook.centroids.cols() == mc.frontend.dim);
}

TEST_CASE("label entropy") {
  LabelStore uniform{{"a", {0, 1, 2, 3}}, {"b", {3, 2, 1, 0}}};
  CHECK(label_entropy(uniform, 4) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  LabelStore single{{"a", {2, 2, 2}}};
  CHECK(label_entropy(single, 4) == 0.0);
}

TEST_CASE("too few frames for K is an error") {
  const ModelConfig mc = tiny_model();
  Corpus corpus(tiny_corpus(mc));
  const LabelModel lm = tiny_label_model(mc);
  auto items = train_items(corpus);
  items.resize(1);
  KMeansConfig k = tiny_kmeans();
  k.k = 5000;
  CHECK_THROWS_AS(build_labels(items, lm, k), Error);
}
