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

#include "shubert/labels.h"

#include <cmath>
#include <numeric>
#include <random>

namespace shubert {

std::vector<LabelItem> corpus_label_items(const Corpus& corpus, Split split) {
  std::vector<LabelItem> items;
  for (int s = 0; s < corpus.config().n_speakers; ++s) {
    for (int i = 0; i < corpus.utterances_in(split); ++i) {
      const Utterance& u = corpus.utterance(s, i, split);
      items.push_back({u.id, &u.audio});
    }
  }
  return items;
}

Matrix label_features(const LabelModel& model, const Waveform& clean) {
  return layer_features(model.config, model.params, clean, model.layer_index);
}

PseudoLabelSeq label_waveform(const LabelModel& model, const Codebook& cb,
                              const Waveform& clean) {
  return assign_labels(label_features(model, clean), cb);
}

LabelBuild build_labels(const std::vector<LabelItem>& items,
                        const LabelModel& model, const KMeansConfig& kmeans) {
  SHUBERT_CHECK(!items.empty(), "build_labels: no items");
  SHUBERT_CHECK(model.layer_index >= 0 &&
                    model.layer_index <= model.config.encoder.n_layers,
                "build_labels: layer index out of range");
  const FrameGeometry geom = model.config.frontend.geometry();
  std::vector<Matrix> feats;
  feats.reserve(items.size());
  Index total = 0;
  for (const auto& item : items) {
    SHUBERT_CHECK(item.clean != nullptr, "build_labels: missing audio for " +
                                             item.id);
    Matrix f = label_features(model, *item.clean);
    if (f.rows() != geom.frames(item.clean->size())) {
      throw Error("build_labels: frame count mismatch for example " + item.id);
    }
    total += f.rows();
    feats.push_back(std::move(f));
  }

  // Seeded frame subset for fitting.
  std::vector<std::pair<size_t, Index>> refs;
  refs.reserve(static_cast<size_t>(total));
  for (size_t i = 0; i < feats.size(); ++i) {
    for (Index t = 0; t < feats[i].rows(); ++t) refs.emplace_back(i, t);
  }
  std::mt19937_64 rng(mix_seed(kmeans.seed, 0xF17));
  if (kmeans.max_fit_frames > 0 &&
      static_cast<Index>(refs.size()) > kmeans.max_fit_frames) {
    for (Index i = 0; i < kmeans.max_fit_frames; ++i) {
      std::uniform_int_distribution<size_t> pick(static_cast<size_t>(i),
                                                 refs.size() - 1);
      std::swap(refs[static_cast<size_t>(i)], refs[pick(rng)]);
    }
    refs.resize(static_cast<size_t>(kmeans.max_fit_frames));
  }
  const Index dim = feats.front().cols();
  Matrix fit(static_cast<Index>(refs.size()), dim);
  for (size_t r = 0; r < refs.size(); ++r) {
    fit.row(static_cast<Index>(r)) = feats[refs[r].first].row(refs[r].second);
  }

  LabelBuild out;
  out.codebook = fit_kmeans(fit, kmeans.k, kmeans.max_iters, kmeans.seed,
                            kmeans.rel_tol);
  out.codebook.layer_index = model.layer_index;
  out.codebook.feature_source =
      model.layer_index == 0
          ? "frontend"
          : "encoder_layer_" + std::to_string(model.layer_index);
  for (size_t i = 0; i < items.size(); ++i) {
    out.labels[items[i].id] = assign_labels(feats[i], out.codebook);
  }
  return out;
}

double label_entropy(const LabelStore& labels, int k) {
  std::vector<double> hist(static_cast<size_t>(k), 0.0);
  double n = 0.0;
  for (const auto& [id, seq] : labels) {
    for (int u : seq) {
      hist[static_cast<size_t>(u)] += 1.0;
      n += 1.0;
    }
  }
  double h = 0.0;
  for (double c : hist) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace shubert
