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

// Toy speech corpus and dynamic mixing.
//
// Speakers are harmonic sources with a fixed fundamental and a timbre vector;
// phones are spectral envelopes over the harmonic stack. A MixtureExample
// carries a clean target utterance, two independently corrupted views of it,
// and a separate enrollment utterance of the same speaker.

#ifndef SHUBERT_MIXSIM_H_
#define SHUBERT_MIXSIM_H_

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "shubert/common.h"

namespace shubert {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  Index size() const { return static_cast<Index>(samples.size()); }
};

double rms(const Waveform& w);
double peak(const Waveform& w);

// Frame layout of the convolutional frontend: frame t covers samples
// [t*hop, t*hop + receptive_field).
struct FrameGeometry {
  int hop = 320;
  int receptive_field = 360;

  // Number of frames for a waveform of `len` samples; 0 when too short.
  Index frames(Index len) const;
  Index frame_center(Index t) const { return t * hop + receptive_field / 2; }
};

struct SpeakerProfile {
  int speaker_id = 0;
  double f0 = 100.0;
  std::vector<double> harmonic_weights;
};

enum class MixtureType { kNoisy = 0, kTwoTalker = 1, kNoisyTwoTalker = 2 };

std::string_view to_string(MixtureType t);
MixtureType mixture_type_from_string(std::string_view s);

struct CorpusConfig {
  int n_speakers = 16;
  int utterances_per_speaker = 48;       // training split
  int eval_utterances_per_speaker = 16;  // held-out split
  int phone_alphabet = 12;
  int min_phones = 8;
  int max_phones = 16;
  double min_phone_sec = 0.06;
  double max_phone_sec = 0.12;
  double enrollment_sec = 1.0;
  double noise_snr_min_db = -5.0;
  double noise_snr_max_db = 5.0;
  double speech_sir_min_db = -5.0;
  double speech_sir_max_db = 5.0;
  double f0_min = 90.0;
  double f0_max = 300.0;
  int n_partials = 40;
  int sample_rate = 16000;
  // When false both views share the mixture type drawn for view A.
  bool independent_view_types = true;
  uint64_t seed = 1;
  FrameGeometry geometry;
};

struct Utterance {
  std::string id;
  int speaker_id = 0;
  std::vector<int> phones;
  double phone_sec = 0.1;
  Waveform audio;
  std::vector<int> frame_phones;  // one phone id per frontend frame
};

// Per-view record of how the interference was built.
struct ViewInfo {
  MixtureType type = MixtureType::kNoisy;
  std::optional<double> noise_snr_db;
  std::optional<double> speech_sir_db;
  int interferer_speaker = -1;
  std::string interferer_utterance;
  uint64_t noise_seed = 0;
};

struct MixtureExample {
  std::string id;
  std::string target_utterance;
  Waveform clean;
  Waveform view_a;
  Waveform view_b;
  Waveform enrollment;
  int target_speaker = 0;
  std::string enrollment_utterance;
  MixtureType mixture_type = MixtureType::kNoisy;  // type of view A
  ViewInfo info_a;
  ViewInfo info_b;
  std::vector<int> phone_labels;
  // Interfering talker of view A (two-talker types only), cropped to the
  // mixture length and at the same scale as `clean`.
  std::optional<Waveform> interferer_clean;
  std::optional<std::vector<int>> interferer_phone_labels;
  // Scaled interferences, so view_x == clean + interference_x.
  Waveform interference_a;
  Waveform interference_b;
  // Gain applied to clean, views and interferences to bound the peak.
  double normalization_gain = 1.0;
  uint64_t seed = 0;
};

// Renders phones as windowed harmonic stacks at the speaker's f0. Throws on
// an empty sequence, a phone outside [0, alphabet) or a phone shorter than
// 40 ms.
std::pair<Waveform, std::vector<int>> synth_utterance(
    const SpeakerProfile& profile, const std::vector<int>& phones,
    double phone_sec, uint64_t seed, int phone_alphabet = 12,
    int sample_rate = 16000, const FrameGeometry& geometry = {});

// Gain g such that g*interference sits snr_db below the signal RMS.
double interference_gain(const Waveform& signal, const Waveform& interference,
                         double snr_db);
// signal + g*interference. Lengths must match; silent interference throws.
Waveform mix_at_snr(const Waveform& signal, const Waveform& interference,
                    double snr_db);

// Crops (from `offset`) or loops `w` to exactly `len` samples.
Waveform fit_length(const Waveform& w, Index len, Index offset);

// Pink noise (Kellet filter) with a first-order spectral tilt `tilt` in
// (-1, 1); unit RMS.
Waveform pink_noise(Index len, double tilt, uint64_t seed,
                    int sample_rate = 16000);

enum class Split { kTrain, kEval };

// Deterministic speaker set and utterance pool derived from a CorpusConfig.
class Corpus {
 public:
  explicit Corpus(CorpusConfig config);

  const CorpusConfig& config() const { return config_; }
  const std::vector<SpeakerProfile>& speakers() const { return speakers_; }
  int utterances_in(Split split) const;
  const Utterance& utterance(int speaker, int index, Split split) const;
  const Utterance* find(std::string_view id) const;

 private:
  CorpusConfig config_;
  std::vector<SpeakerProfile> speakers_;
  std::vector<Utterance> train_;
  std::vector<Utterance> eval_;
};

struct SampleOptions {
  Split split = Split::kTrain;
  // Forces view A's mixture type (used for probe sets).
  std::optional<MixtureType> force_type_a;
  // Use the same interference for both views (identity test).
  bool identical_views = false;
};

// Draws one dual-view example. Throws when a two-talker type is requested from
// a single-speaker corpus.
MixtureExample sample_example(const Corpus& corpus, std::mt19937_64& rng,
                              const SampleOptions& options = {});

// Example `index` of a set, with its own rng seeded from (seed, index).
MixtureExample sample_indexed(const Corpus& corpus, uint64_t seed,
                              uint64_t index,
                              const SampleOptions& options = {});

}  // namespace shubert

#endif  // SHUBERT_MIXSIM_H_
