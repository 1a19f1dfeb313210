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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "shubert/dataio.h"
#include "tiny_fixture.h"

using namespace shubert;
using namespace shubert::testing;

namespace {

void check_close(const Waveform& a, const Waveform& b) {
  REQUIRE(a.size() == b.size());
  for (Index i = 0; i < a.size(); ++i) {
    // Stored as float32.
    CHECK(std::abs(a.samples[static_cast<size_t>(i)] - b.samples[static_cast<size_t>(i)]) <= 1e-7);
  }
}

}  // namespace

TEST_CASE("pcm files round trip at float32 precision") {
  TempDir dir("pcm");
  Waveform w;
  for (int i = 0; i < 1000; ++i) w.samples.push_back(std::sin(0.01 * i) * 0.9);
  write_pcm(dir / "a.f32", w);
  CHECK(std::filesystem::file_size(dir / "a.f32") == 4000);
  check_close(w, read_pcm(dir / "a.f32"));
  CHECK_THROWS_AS(read_pcm(dir / "missing.f32"), Error);
  {
    std::ofstream f(dir / "odd.f32", std::ios::binary);
    f << "abc";
  }
  CHECK_THROWS_AS(read_pcm(dir / "odd.f32"), Error);
}

TEST_CASE("manifest round trip keeps every field") {
  TempDir dir("manifest");
  const ModelConfig mc = tiny_model();
  Corpus corpus(tiny_corpus(mc));
  std::vector<MixtureExample> ex;
  {
    std::ofstream m(dir / "manifest.jsonl");
    SampleOptions two;
    two.force_type_a = MixtureType::kTwoTalker;
    for (int i = 0; i < 4; ++i) {
      ex.push_back(sample_indexed(corpus, 2, static_cast<uint64_t>(i),
                                  i % 2 ? two : SampleOptions{}));
      m << write_example(dir.str(), ex.back()).dump() << "\n";
    }
  }
  const std::vector<MixtureExample> back = read_manifest(dir.str());
  REQUIRE(back.size() == ex.size());
  for (size_t i = 0; i < ex.size(); ++i) {
    CHECK(back[i].id == ex[i].id);
    CHECK(back[i].target_utterance == ex[i].target_utterance);
    CHECK(back[i].enrollment_utterance == ex[i].enrollment_utterance);
    CHECK(back[i].target_speaker == ex[i].target_speaker);
    CHECK(back[i].mixture_type == ex[i].mixture_type);
    CHECK(back[i].phone_labels == ex[i].phone_labels);
    CHECK(back[i].interferer_phone_labels == ex[i].interferer_phone_labels);
    CHECK(back[i].seed == ex[i].seed);
    CHECK(back[i].normalization_gain == ex[i].normalization_gain);
    CHECK(back[i].info_a.speech_sir_db == ex[i].info_a.speech_sir_db);
    CHECK(back[i].info_b.noise_snr_db == ex[i].info_b.noise_snr_db);
    CHECK(back[i].info_a.interferer_utterance == ex[i].info_a.interferer_utterance);
    check_close(back[i].clean, ex[i].clean);
    check_close(back[i].view_a, ex[i].view_a);
    check_close(back[i].view_b, ex[i].view_b);
    check_close(back[i].enrollment, ex[i].enrollment);
    CHECK(back[i].interferer_clean.has_value() == ex[i].interferer_clean.has_value());
    for (Index t = 0; t < back[i].clean.size(); ++t) {
      const size_t k = static_cast<size_t>(t);
      CHECK(back[i].clean.samples[k] + back[i].interference_a.samples[k] ==
            doctest::Approx(back[i].view_a.samples[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("manifest errors name the file and line") {
  TempDir dir("manifest_bad");
  CHECK_THROWS_AS(read_manifest(dir.str()), Error);
  {
    std::ofstream m(dir / "manifest.jsonl");
    m << "{\"id\": \"x\"}\n";
  }
  try {
    read_manifest(dir.str());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("label store and codebook round trip exactly") {
  TempDir dir("labels");
  LabelStore ls{{"a", {0, 1, 2}}, {"b/interferer", {3}}};
  write_label_store(dir / "labels.jsonl", ls);
  CHECK(read_label_store(dir / "labels.jsonl") == ls);

  Codebook cb;
  cb.centroids = Matrix::Random(4, 3);
  cb.centroids(0, 0) = 1.0 / 3.0;
  cb.feature_source = "encoder_layer_2";
  cb.seed = 17;
  cb.layer_index = 2;
  cb.objective_history = {3.0, 2.0, 1.5};
  write_codebook(dir / "codebook.bin", cb);
  const Codebook back = read_codebook(dir / "codebook.bin");
  CHECK(back.centroids == cb.centroids);
  CHECK(back.feature_source == cb.feature_source);
  CHECK(back.seed == cb.seed);
  CHECK(back.layer_index == cb.layer_index);
  CHECK(back.objective_history == cb.objective_history);
  CHECK(interferer_key("u1") == "u1/interferer");
}

TEST_CASE("file digest is content based") {
  TempDir dir("digest");
  {
    std::ofstream(dir / "a") << "hello";
    std::ofstream(dir / "b") << "hello";
    std::ofstream(dir / "c") << "hellp";
  }
  CHECK(file_digest(dir / "a") == file_digest(dir / "b"));
  CHECK(file_digest(dir / "a") != file_digest(dir / "c"));
}
