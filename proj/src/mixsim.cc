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

#include "shubert/mixsim.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

namespace shubert {

namespace {

constexpr double kPeakCeiling = 0.99;
constexpr double kRampSec = 0.008;
constexpr double kUtteranceRms = 0.1;

struct Formants {
  double f1, f2, f3;
};

// The phone alphabet is fixed: formant targets depend only on the phone id.
Formants phone_formants(int phone) {
  std::mt19937_64 rng(mix_seed(0x5EEDF0E0ULL, static_cast<uint64_t>(phone)));
  std::uniform_real_distribution<double> u1(250.0, 900.0);
  std::uniform_real_distribution<double> u2(900.0, 2500.0);
  std::uniform_real_distribution<double> u3(2500.0, 3800.0);
  return {u1(rng), u2(rng), u3(rng)};
}

double envelope(const Formants& f, double hz) {
  auto bump = [](double x, double c, double bw) {
    const double d = (x - c) / bw;
    return std::exp(-d * d);
  };
  return bump(hz, f.f1, 120.0) + 0.7 * bump(hz, f.f2, 180.0) +
         0.35 * bump(hz, f.f3, 250.0) + 0.03;
}

Waveform scaled(const Waveform& w, double g) {
  Waveform out = w;
  for (double& s : out.samples) s *= g;
  return out;
}

Waveform zeros_like(const Waveform& w) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.size(), 0.0);
  return out;
}

void add_into(Waveform& into, const Waveform& w) {
  for (size_t i = 0; i < into.samples.size(); ++i) {
    into.samples[i] += w.samples[i];
  }
}

Index phone_samples(double phone_sec, int sample_rate) {
  return static_cast<Index>(std::lround(phone_sec * sample_rate));
}

int phone_at_sample(const Utterance& u, Index sample, int sample_rate) {
  const Index per = phone_samples(u.phone_sec, sample_rate);
  const Index len = u.audio.size();
  Index pos = ((sample % len) + len) % len;
  Index k = std::min<Index>(pos / per, static_cast<Index>(u.phones.size()) - 1);
  return u.phones[static_cast<size_t>(k)];
}

template <typename T>
T uniform(std::mt19937_64& rng, T lo, T hi) {
  if constexpr (std::is_integral_v<T>) {
    return std::uniform_int_distribution<T>(lo, hi)(rng);
  } else {
    return std::uniform_real_distribution<T>(lo, hi)(rng);
  }
}

}  // namespace

double rms(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double s = 0.0;
  for (double x : w.samples) s += x * x;
  return std::sqrt(s / static_cast<double>(w.samples.size()));
}

double peak(const Waveform& w) {
  double p = 0.0;
  for (double x : w.samples) p = std::max(p, std::abs(x));
  return p;
}

Index FrameGeometry::frames(Index len) const {
  if (len < receptive_field) return 0;
  return (len - receptive_field) / hop + 1;
}

std::string_view to_string(MixtureType t) {
  switch (t) {
    case MixtureType::kNoisy:
      return "noisy";
    case MixtureType::kTwoTalker:
      return "two_talker";
    case MixtureType::kNoisyTwoTalker:
      return "noisy_two_talker";
  }
  return "unknown";
}

MixtureType mixture_type_from_string(std::string_view s) {
  if (s == "noisy") return MixtureType::kNoisy;
  if (s == "two_talker") return MixtureType::kTwoTalker;
  if (s == "noisy_two_talker") return MixtureType::kNoisyTwoTalker;
  throw Error("unknown mixture type: " + std::string(s));
}

std::pair<Waveform, std::vector<int>> synth_utterance(
    const SpeakerProfile& profile, const std::vector<int>& phones,
    double phone_sec, uint64_t seed, int phone_alphabet, int sample_rate,
    const FrameGeometry& geometry) {
  SHUBERT_CHECK(!phones.empty(), "synth_utterance: empty phone sequence");
  SHUBERT_CHECK(phone_sec >= 0.04 - 1e-12,
                "synth_utterance: phone duration below 40 ms");
  SHUBERT_CHECK(profile.f0 > 0.0, "synth_utterance: f0 must be positive");
  for (int p : phones) {
    SHUBERT_CHECK(p >= 0 && p < phone_alphabet,
                  "synth_utterance: unknown phone id " + std::to_string(p));
  }

  const Index per = phone_samples(phone_sec, sample_rate);
  const Index total = per * static_cast<Index>(phones.size());
  const double nyquist_guard = 0.45 * sample_rate;
  int n_harm = 0;
  while (n_harm < static_cast<int>(profile.harmonic_weights.size()) &&
         (n_harm + 1) * profile.f0 < nyquist_guard) {
    ++n_harm;
  }
  SHUBERT_CHECK(n_harm >= 1, "synth_utterance: no partial below Nyquist");

  std::mt19937_64 rng(seed);
  std::vector<std::complex<double>> osc(n_harm);
  std::vector<std::complex<double>> step(n_harm);
  for (int h = 0; h < n_harm; ++h) {
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double w = 2.0 * std::numbers::pi * (h + 1) * profile.f0 / sample_rate;
    osc[h] = std::polar(1.0, phase);
    step[h] = std::polar(1.0, w);
  }

  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(static_cast<size_t>(total), 0.0);
  const Index ramp = std::min<Index>(
      static_cast<Index>(kRampSec * sample_rate), per / 2);
  std::vector<double> amp(n_harm);
  for (size_t k = 0; k < phones.size(); ++k) {
    const Formants f = phone_formants(phones[k]);
    double max_upper = 0.0;
    for (int h = 0; h < n_harm; ++h) {
      amp[h] = profile.harmonic_weights[h] * envelope(f, (h + 1) * profile.f0);
      if (h > 0) max_upper = std::max(max_upper, amp[h]);
    }
    // Fundamental dominates; the phone lives in the upper partials' shape.
    const double jitter = uniform(rng, 0.85, 1.15);
    for (int h = 1; h < n_harm; ++h) amp[h] *= 0.7 / max_upper;
    amp[0] = 1.0;

    const Index start = static_cast<Index>(k) * per;
    for (Index n = 0; n < per; ++n) {
      double s = 0.0;
      for (int h = 0; h < n_harm; ++h) {
        s += amp[h] * osc[h].imag();
        osc[h] *= step[h];
      }
      double win = 1.0;
      if (n < ramp) {
        win = 0.5 - 0.5 * std::cos(std::numbers::pi * (n + 0.5) / ramp);
      } else if (n >= per - ramp) {
        win = 0.5 - 0.5 * std::cos(std::numbers::pi * (per - n - 0.5) / ramp);
      }
      out.samples[static_cast<size_t>(start + n)] = jitter * win * s;
    }
    // Renormalise the oscillators so rounding drift cannot accumulate.
    for (auto& z : osc) z /= std::abs(z);
  }
  const double r = rms(out);
  if (r > 0.0) {
    for (double& s : out.samples) s *= kUtteranceRms / r;
  }

  std::vector<int> labels;
  const Index frames = geometry.frames(total);
  labels.reserve(static_cast<size_t>(frames));
  for (Index t = 0; t < frames; ++t) {
    const Index k = std::min<Index>(geometry.frame_center(t) / per,
                                    static_cast<Index>(phones.size()) - 1);
    labels.push_back(phones[static_cast<size_t>(k)]);
  }
  return {std::move(out), std::move(labels)};
}

double interference_gain(const Waveform& signal, const Waveform& interference,
                         double snr_db) {
  const double rn = rms(interference);
  SHUBERT_CHECK(rn > 0.0, "mix_at_snr: interference is silent");
  return rms(signal) / rn * std::pow(10.0, -snr_db / 20.0);
}

Waveform mix_at_snr(const Waveform& signal, const Waveform& interference,
                    double snr_db) {
  SHUBERT_CHECK(signal.size() == interference.size(),
                "mix_at_snr: length mismatch (" +
                    std::to_string(signal.size()) + " vs " +
                    std::to_string(interference.size()) + ")");
  const double g = interference_gain(signal, interference, snr_db);
  Waveform out = signal;
  for (size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] += g * interference.samples[i];
  }
  return out;
}

Waveform fit_length(const Waveform& w, Index len, Index offset) {
  SHUBERT_CHECK(w.size() > 0, "fit_length: empty waveform");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(static_cast<size_t>(len));
  for (Index i = 0; i < len; ++i) {
    out.samples[static_cast<size_t>(i)] =
        w.samples[static_cast<size_t>((offset + i) % w.size())];
  }
  return out;
}

Waveform pink_noise(Index len, double tilt, uint64_t seed, int sample_rate) {
  SHUBERT_CHECK(tilt > -1.0 && tilt < 1.0, "pink_noise: tilt outside (-1,1)");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> white(0.0, 1.0);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0, prev = 0;
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(static_cast<size_t>(len));
  const Index warmup = 2048;
  for (Index i = -warmup; i < len; ++i) {
    const double w = white(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
    prev = pink + tilt * prev;
    if (i >= 0) out.samples[static_cast<size_t>(i)] = prev;
  }
  const double r = rms(out);
  if (r > 0.0) {
    for (double& s : out.samples) s /= r;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(CorpusConfig config) : config_(std::move(config)) {
  const CorpusConfig& c = config_;
  SHUBERT_CHECK(c.n_speakers >= 1, "corpus needs at least one speaker");
  SHUBERT_CHECK(c.utterances_per_speaker >= 2,
                "corpus needs two utterances per speaker (target + enrollment)");
  SHUBERT_CHECK(c.min_phones >= 1 && c.max_phones >= c.min_phones,
                "bad phone count range");
  SHUBERT_CHECK(c.min_phone_sec >= 0.04 && c.max_phone_sec >= c.min_phone_sec,
                "bad phone duration range");
  if (c.n_speakers > 1) {
    SHUBERT_CHECK((c.f0_max - c.f0_min) / (c.n_speakers - 1) >= 10.0,
                  "f0 range too narrow for 10 Hz speaker spacing");
  }

  std::mt19937_64 rng(mix_seed(c.seed, 0xC0FFEE));
  std::vector<double> f0s;
  for (int s = 0; s < c.n_speakers; ++s) {
    f0s.push_back(c.n_speakers == 1
                      ? c.f0_min
                      : c.f0_min + s * (c.f0_max - c.f0_min) / (c.n_speakers - 1));
  }
  std::shuffle(f0s.begin(), f0s.end(), rng);
  std::normal_distribution<double> lognorm(0.0, 0.5);
  for (int s = 0; s < c.n_speakers; ++s) {
    SpeakerProfile p;
    p.speaker_id = s;
    p.f0 = f0s[static_cast<size_t>(s)];
    const double rolloff = uniform(rng, 0.0, 1.0);
    for (int h = 0; h < c.n_partials; ++h) {
      p.harmonic_weights.push_back(std::exp(lognorm(rng)) *
                                   std::pow(h + 1.0, -rolloff));
    }
    speakers_.push_back(std::move(p));
  }

  auto make = [&](int spk, int index, const char* tag) {
    std::mt19937_64 urng(
        mix_seed(c.seed, static_cast<uint64_t>(spk) * 1000003ULL + index));
    Utterance u;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "spk%02d_%s%04d", spk, tag, index);
    u.id = buf;
    u.speaker_id = spk;
    const int n = uniform(urng, c.min_phones, c.max_phones);
    for (int i = 0; i < n; ++i) {
      u.phones.push_back(uniform(urng, 0, c.phone_alphabet - 1));
    }
    u.phone_sec = uniform(urng, c.min_phone_sec, c.max_phone_sec);
    auto [audio, labels] =
        synth_utterance(speakers_[static_cast<size_t>(spk)], u.phones,
                        u.phone_sec, urng(), c.phone_alphabet, c.sample_rate,
                        c.geometry);
    u.audio = std::move(audio);
    u.frame_phones = std::move(labels);
    return u;
  };
  for (int s = 0; s < c.n_speakers; ++s) {
    for (int i = 0; i < c.utterances_per_speaker; ++i) {
      train_.push_back(make(s, i, "u"));
    }
    for (int i = 0; i < c.eval_utterances_per_speaker; ++i) {
      eval_.push_back(make(s, c.utterances_per_speaker + i, "e"));
    }
  }
}

int Corpus::utterances_in(Split split) const {
  return split == Split::kTrain ? config_.utterances_per_speaker
                                : config_.eval_utterances_per_speaker;
}

const Utterance& Corpus::utterance(int speaker, int index, Split split) const {
  const int per = utterances_in(split);
  SHUBERT_CHECK(speaker >= 0 && speaker < config_.n_speakers && index >= 0 &&
                    index < per,
                "utterance index out of range");
  const auto& pool = split == Split::kTrain ? train_ : eval_;
  return pool[static_cast<size_t>(speaker * per + index)];
}

const Utterance* Corpus::find(std::string_view id) const {
  for (const auto* pool : {&train_, &eval_}) {
    for (const auto& u : *pool) {
      if (u.id == id) return &u;
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Dynamic mixing

namespace {

struct BuiltView {
  Waveform interference;
  ViewInfo info;
  std::optional<Waveform> interferer_source;
  std::optional<std::vector<int>> interferer_labels;
};

BuiltView build_view(const Corpus& corpus, const Waveform& clean,
                     int target_speaker, MixtureType type, Split split,
                     std::mt19937_64& rng) {
  const CorpusConfig& c = corpus.config();
  BuiltView v;
  v.info.type = type;
  v.interference = zeros_like(clean);
  const bool speech = type != MixtureType::kNoisy;
  const bool noise = type != MixtureType::kTwoTalker;
  if (speech) {
    SHUBERT_CHECK(c.n_speakers >= 2,
                  "two-talker mixture requested from a single-speaker corpus");
    int other = uniform(rng, 0, c.n_speakers - 2);
    if (other >= target_speaker) ++other;
    const int idx = uniform(rng, 0, corpus.utterances_in(split) - 1);
    const Utterance& u = corpus.utterance(other, idx, split);
    const Index len = clean.size();
    const Index offset =
        u.audio.size() > len ? uniform<Index>(rng, 0, u.audio.size() - len) : 0;
    Waveform src = fit_length(u.audio, len, offset);
    const double sir = uniform(rng, c.speech_sir_min_db, c.speech_sir_max_db);
    Waveform part = scaled(src, interference_gain(clean, src, sir));
    add_into(v.interference, part);

    std::vector<int> labels;
    const Index frames = c.geometry.frames(len);
    for (Index t = 0; t < frames; ++t) {
      labels.push_back(
          phone_at_sample(u, offset + c.geometry.frame_center(t), c.sample_rate));
    }
    v.info.speech_sir_db = sir;
    v.info.interferer_speaker = other;
    v.info.interferer_utterance = u.id;
    v.interferer_source = std::move(part);
    v.interferer_labels = std::move(labels);
  }
  if (noise) {
    const double snr = uniform(rng, c.noise_snr_min_db, c.noise_snr_max_db);
    const double tilt = uniform(rng, -0.6, 0.6);
    v.info.noise_seed = rng();
    Waveform n = pink_noise(clean.size(), tilt, v.info.noise_seed, c.sample_rate);
    add_into(v.interference, scaled(n, interference_gain(clean, n, snr)));
    v.info.noise_snr_db = snr;
  }
  return v;
}

MixtureType draw_type(std::mt19937_64& rng) {
  return static_cast<MixtureType>(uniform(rng, 0, 2));
}

}  // namespace

MixtureExample sample_example(const Corpus& corpus, std::mt19937_64& rng,
                              const SampleOptions& options) {
  const CorpusConfig& c = corpus.config();
  const Split split = options.split;
  MixtureExample ex;

  const int spk = uniform(rng, 0, c.n_speakers - 1);
  const int per = corpus.utterances_in(split);
  SHUBERT_CHECK(per >= 2, "split needs two utterances per speaker");
  const int idx = uniform(rng, 0, per - 1);
  const Utterance& target = corpus.utterance(spk, idx, split);
  ex.target_speaker = spk;
  ex.target_utterance = target.id;
  ex.clean = target.audio;
  ex.phone_labels = target.frame_phones;

  // Enrollment: a different utterance with a different phone sequence.
  const Utterance* enroll = nullptr;
  for (int attempt = 0; attempt < 64 && enroll == nullptr; ++attempt) {
    int j = uniform(rng, 0, per - 2);
    if (j >= idx) ++j;
    const Utterance& cand = corpus.utterance(spk, j, split);
    if (cand.phones != target.phones) enroll = &cand;
  }
  SHUBERT_CHECK(enroll != nullptr, "no distinct enrollment utterance for " +
                                       target.id);
  const Index enroll_len =
      static_cast<Index>(std::lround(c.enrollment_sec * c.sample_rate));
  const Index enroll_off =
      enroll->audio.size() > enroll_len
          ? uniform<Index>(rng, 0, enroll->audio.size() - enroll_len)
          : 0;
  ex.enrollment = fit_length(enroll->audio, enroll_len, enroll_off);
  ex.enrollment_utterance = enroll->id;

  const MixtureType type_a =
      options.force_type_a ? *options.force_type_a : draw_type(rng);
  const MixtureType drawn_b = draw_type(rng);
  const MixtureType type_b = c.independent_view_types ? drawn_b : type_a;

  BuiltView va = build_view(corpus, ex.clean, spk, type_a, split, rng);
  BuiltView vb = options.identical_views
                     ? va
                     : build_view(corpus, ex.clean, spk, type_b, split, rng);
  ex.mixture_type = type_a;
  ex.info_a = va.info;
  ex.info_b = vb.info;

  double top = peak(ex.clean);
  Waveform raw_a = ex.clean, raw_b = ex.clean;
  add_into(raw_a, va.interference);
  add_into(raw_b, vb.interference);
  top = std::max({top, peak(raw_a), peak(raw_b)});
  const double g = top > kPeakCeiling ? kPeakCeiling / top : 1.0;
  ex.normalization_gain = g;
  ex.clean = scaled(ex.clean, g);
  ex.interference_a = scaled(va.interference, g);
  ex.interference_b = scaled(vb.interference, g);
  ex.view_a = ex.clean;
  add_into(ex.view_a, ex.interference_a);
  ex.view_b = ex.clean;
  add_into(ex.view_b, ex.interference_b);
  if (va.interferer_source) {
    ex.interferer_clean = scaled(*va.interferer_source, g);
    ex.interferer_phone_labels = va.interferer_labels;
  }

  const double ep = peak(ex.enrollment);
  if (ep > kPeakCeiling) ex.enrollment = scaled(ex.enrollment, kPeakCeiling / ep);
  return ex;
}

MixtureExample sample_indexed(const Corpus& corpus, uint64_t seed,
                              uint64_t index, const SampleOptions& options) {
  const uint64_t s = mix_seed(seed, index);
  std::mt19937_64 rng(s);
  MixtureExample ex = sample_example(corpus, rng, options);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ex%06llu",
                static_cast<unsigned long long>(index));
  ex.id = buf;
  ex.seed = s;
  return ex;
}

}  // namespace shubert
