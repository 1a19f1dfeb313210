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


#ifndef SHUBERT_TESTS_TINY_FIXTURE_H_
#define SHUBERT_TESTS_TINY_FIXTURE_H_

#include <filesystem>
#include <string>
#include <vector>

#include "shubert/config.h"
#include "shubert/labels.h"
#include "shubert/mixsim.h"

namespace shubert::testing {

inline ModelConfig tiny_model() {
  ModelConfig mc;
  mc.frontend.dim = 16;
  mc.encoder.dim = 16;
  mc.encoder.n_layers = 2;
  mc.encoder.n_heads = 2;
  mc.encoder.ffn_dim = 32;
  mc.encoder.emb_dim = 8;
  mc.spkemb.dim = 8;
  mc.head.num_classes = 8;
  mc.head.proj_dim = 8;
  mc.cc.proj_dim = 8;
  mc.cc.frames = 8;
  mc.mask.p_start = 0.2;
  mc.mask.span_length = 3;
  return mc;
}

inline CorpusConfig tiny_corpus(const ModelConfig& mc, uint64_t seed = 3) {
  CorpusConfig cc;
  cc.n_speakers = 4;
  cc.utterances_per_speaker = 3;
  cc.eval_utterances_per_speaker = 2;
  cc.min_phones = 3;
  cc.max_phones = 5;
  cc.enrollment_sec = 0.25;
  cc.seed = seed;
  cc.geometry = mc.frontend.geometry();
  return cc;
}

inline TrainConfig tiny_train(int steps = 4) {
  TrainConfig t;
  t.model = tiny_model();
  t.steps = steps;
  t.batch_size = 2;
  t.warmup_steps = 2;
  t.lr = 1e-3;
  t.seed = 5;
  t.checkpoint_every = 2;
  return t;
}

inline std::vector<LabelItem> train_items(const Corpus& corpus) {
  return corpus_label_items(corpus, Split::kTrain);
}

inline LabelModel tiny_label_model(const ModelConfig& mc) {
  return {mc, init_model(mc, 101), 1};
}

inline KMeansConfig tiny_kmeans() {
  KMeansConfig k;
  k.k = 8;
  k.max_iters = 30;
  return k;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("shubert_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string str() const { return path_.string(); }
  std::string operator/(const std::string& f) const { return (path_ / f).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace shubert::testing

#endif  // SHUBERT_TESTS_TINY_FIXTURE_H_
