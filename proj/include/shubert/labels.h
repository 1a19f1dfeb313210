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

// Pseudo-label generation from clean speech through a feature model.

#ifndef SHUBERT_LABELS_H_
#define SHUBERT_LABELS_H_

#include <string>
#include <vector>

#include "shubert/mixsim.h"
#include "shubert/model.h"
#include "shubert/quantizer.h"

namespace shubert {

// Feature model used for labelling: a model and the encoder depth whose
// output is clustered (0 = frontend output).
struct LabelModel {
  ModelConfig config;
  ParameterSet params;
  int layer_index = 2;
};

struct LabelItem {
  std::string id;
  const Waveform* clean = nullptr;
};

struct LabelBuild {
  Codebook codebook;
  LabelStore labels;
};

// Every utterance of one corpus split, keyed by utterance id.
std::vector<LabelItem> corpus_label_items(const Corpus& corpus, Split split);

Matrix label_features(const LabelModel& model, const Waveform& clean);

PseudoLabelSeq label_waveform(const LabelModel& model, const Codebook& cb,
                              const Waveform& clean);

// Extracts features for every item, fits k-means on a seeded frame subset and
// labels every item. Throws naming the item id when its frame count does not
// match the frontend framing.
LabelBuild build_labels(const std::vector<LabelItem>& items,
                        const LabelModel& model, const KMeansConfig& kmeans);

// Shannon entropy (nats) of the pooled label histogram.
double label_entropy(const LabelStore& labels, int k);

}  // namespace shubert

#endif  // SHUBERT_LABELS_H_
