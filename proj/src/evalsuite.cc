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

#include "shubert/evalsuite.h"

#include <exception>
#include <thread>

namespace shubert {

using nlohmann::json;

json to_json(const ProbeReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  return {{"target_masked_accuracy", r.target_masked_accuracy},
          {"interferer_masked_accuracy", opt(r.interferer_masked_accuracy)},
          {"swap_consistency", opt(r.swap_consistency)},
          {"collision_rate", opt(r.collision_rate)},
          {"mean_view_cosine", opt(r.mean_view_cosine)},
          {"n_examples", r.n_examples},
          {"n_skipped", r.n_skipped},
          {"masked_frames", r.masked_frames}};
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, n));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  auto guarded = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (int i = 0; i < n; ++i) guarded(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (int i = w; i < n; i += workers) guarded(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ProbeExample make_probe_example(const Corpus& corpus,
                                const LabelModel& label_model,
                                const Codebook& codebook,
                                const MixtureExample& ex) {
  const CorpusConfig& c = corpus.config();
  ProbeExample p;
  p.id = ex.id;
  p.mixture = ex.view_a;
  p.enrollment_a = ex.enrollment;
  p.labels_a = label_waveform(label_model, codebook, ex.clean);
  if (!ex.interferer_clean) return p;
  p.labels_b = label_waveform(label_model, codebook, *ex.interferer_clean);

  // Enrollment for B: another eval utterance of the interferer.
  std::mt19937_64 rng(mix_seed(ex.seed, 0xB));
  const int other = ex.info_a.interferer_speaker;
  const int per = corpus.utterances_in(Split::kEval);
  const Utterance* pick = nullptr;
  for (int attempt = 0; attempt < 64 && pick == nullptr; ++attempt) {
    std::uniform_int_distribution<int> u(0, per - 1);
    const Utterance& cand = corpus.utterance(other, u(rng), Split::kEval);
    if (cand.id != ex.info_a.interferer_utterance) pick = &cand;
  }
  SHUBERT_CHECK(pick != nullptr, "no enrollment for interferer of " + ex.id);
  const Index len = static_cast<Index>(std::lround(c.enrollment_sec * c.sample_rate));
  p.enrollment_b = fit_length(pick->audio, len, 0);
  return p;
}

std::vector<ProbeExample> build_probe_set(const Corpus& corpus,
                                          const LabelModel& label_model,
                                          const Codebook& codebook, int n,
                                          uint64_t seed) {
  SHUBERT_CHECK(n >= 1, "probe set needs at least one example");
  SampleOptions opts;
  opts.split = Split::kEval;
  opts.force_type_a = MixtureType::kTwoTalker;
  std::vector<ProbeExample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(make_probe_example(
        corpus, label_model, codebook,
        sample_indexed(corpus, seed, static_cast<uint64_t>(i), opts)));
  }
  return out;
}

MaskPlan probe_mask(Index frames, const ProbeConfig& probe, uint64_t index) {
  std::mt19937_64 rng(mix_seed(probe.mask_seed, index));
  MaskConfig mc;
  mc.p_start = probe.p_start;
  mc.span_length = probe.span_length;
  return plan_training_mask(frames, mc, rng);
}

namespace {

struct ItemCounts {
  Index masked = 0;
  Index hit_a = 0;
  Index hit_b = 0;
  Index collide = 0;
  bool dual = false;
  bool swapped_wins = false;
  bool swap_evaluated = false;
};

Index count_hits(const std::vector<int>& pred, const PseudoLabelSeq& labels,
                 const MaskPlan& plan) {
  Index n = 0;
  for (int t : plan.masked) {
    if (pred[static_cast<size_t>(t)] == labels[static_cast<size_t>(t)]) ++n;
  }
  return n;
}

}  // namespace

ProbeReport selectivity_probe(const ModelConfig& config,
                              const ParameterSet& params,
                              const std::vector<ProbeExample>& examples,
                              const ProbeConfig& probe, int threads) {
  SHUBERT_CHECK(!examples.empty(), "selectivity_probe: no examples");
  std::vector<ItemCounts> counts(examples.size());
  parallel_for(static_cast<int>(examples.size()), threads, [&](int i) {
    const ProbeExample& p = examples[static_cast<size_t>(i)];
    ItemCounts& c = counts[static_cast<size_t>(i)];
    const Index frames = config.frontend.geometry().frames(p.mixture.size());
    SHUBERT_CHECK(static_cast<Index>(p.labels_a.size()) == frames,
                  "probe example " + p.id + ": label/frame count mismatch");
    const MaskPlan plan = probe_mask(frames, probe, static_cast<uint64_t>(i));
    const SpeakerEmbedding ea =
        embed_enrollment(p.enrollment_a, config.frontend, config.spkemb, params);
    const std::vector<int> pred =
        predict_labels(config, params, p.mixture, ea.vector, plan);
    c.masked = static_cast<Index>(plan.masked.size());
    c.hit_a = count_hits(pred, p.labels_a, plan);
    if (!p.labels_b) return;
    SHUBERT_CHECK(static_cast<Index>(p.labels_b->size()) == frames,
                  "probe example " + p.id + ": interferer label count mismatch");
    c.dual = true;
    c.hit_b = count_hits(pred, *p.labels_b, plan);
    for (int t : plan.masked) {
      if (p.labels_a[static_cast<size_t>(t)] == (*p.labels_b)[static_cast<size_t>(t)]) {
        ++c.collide;
      }
    }
    if (p.enrollment_b) {
      const SpeakerEmbedding eb = embed_enrollment(*p.enrollment_b, config.frontend,
                                                   config.spkemb, params);
      const std::vector<int> pred_b =
          predict_labels(config, params, p.mixture, eb.vector, plan);
      c.swap_evaluated = true;
      c.swapped_wins =
          count_hits(pred_b, *p.labels_b, plan) > count_hits(pred_b, p.labels_a, plan);
    }
  });

  ProbeReport r;
  Index masked = 0, hit_a = 0, dual_masked = 0, hit_b = 0, collide = 0;
  int swaps = 0, swap_n = 0;
  for (const auto& c : counts) {
    masked += c.masked;
    hit_a += c.hit_a;
    if (c.dual) {
      dual_masked += c.masked;
      hit_b += c.hit_b;
      collide += c.collide;
    } else {
      ++r.n_skipped;
    }
    if (c.swap_evaluated) {
      ++swap_n;
      if (c.swapped_wins) ++swaps;
    }
  }
  r.n_examples = static_cast<int>(examples.size());
  r.masked_frames = masked;
  r.target_masked_accuracy = static_cast<double>(hit_a) / static_cast<double>(masked);
  if (dual_masked > 0) {
    r.interferer_masked_accuracy =
        static_cast<double>(hit_b) / static_cast<double>(dual_masked);
    r.collision_rate = static_cast<double>(collide) / static_cast<double>(dual_masked);
  }
  if (swap_n > 0) r.swap_consistency = static_cast<double>(swaps) / swap_n;
  return r;
}

double invariance_metric(const ModelConfig& config, const ParameterSet& params,
                         const std::vector<MixtureExample>& examples,
                         int threads) {
  SHUBERT_CHECK(!examples.empty(), "invariance_metric: no examples");
  std::vector<double> sums(examples.size(), 0.0);
  std::vector<Index> frames(examples.size(), 0);
  parallel_for(static_cast<int>(examples.size()), threads, [&](int i) {
    const MixtureExample& ex = examples[static_cast<size_t>(i)];
    const SpeakerEmbedding e =
        embed_enrollment(ex.enrollment, config.frontend, config.spkemb, params);
    const Index t = config.frontend.geometry().frames(ex.view_a.size());
    const Matrix a = contextual(config, params, ex.view_a, e.vector, no_mask(t));
    const Matrix b = contextual(config, params, ex.view_b, e.vector, no_mask(t));
    SHUBERT_CHECK(a.rows() == b.rows(), "invariance_metric: view lengths differ");
    double s = 0.0;
    for (Index r = 0; r < a.rows(); ++r) {
      const double na = a.row(r).norm(), nb = b.row(r).norm();
      s += a.row(r).dot(b.row(r)) /
           (std::max(na, config.spkemb.norm_floor) * std::max(nb, config.spkemb.norm_floor));
    }
    sums[static_cast<size_t>(i)] = s;
    frames[static_cast<size_t>(i)] = a.rows();
  });
  double total = 0.0;
  Index n = 0;
  for (size_t i = 0; i < sums.size(); ++i) {
    total += sums[i];
    n += frames[i];
  }
  return total / static_cast<double>(n);
}

std::vector<MixtureExample> build_invariance_set(const Corpus& corpus, int n,
                                                 uint64_t seed) {
  SampleOptions opts;
  opts.split = Split::kEval;
  std::vector<MixtureExample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(sample_indexed(corpus, seed, static_cast<uint64_t>(i), opts));
  }
  return out;
}

GradReport gradcheck_tiny(uint64_t seed, double eps, double tolerance,
                          int batch) {
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

  CorpusConfig cc;
  cc.n_speakers = 3;
  cc.utterances_per_speaker = 3;
  cc.eval_utterances_per_speaker = 2;
  cc.min_phones = 3;
  cc.max_phones = 4;
  cc.enrollment_sec = 0.2;
  cc.seed = seed;
  cc.geometry = mc.frontend.geometry();
  Corpus corpus(cc);

  std::vector<MixtureExample> items;
  std::vector<PseudoLabelSeq> labels;
  std::mt19937_64 rng(mix_seed(seed, 0x6C));
  for (int b = 0; b < batch; ++b) {
    items.push_back(sample_indexed(corpus, seed, static_cast<uint64_t>(b)));
    const Index t = cc.geometry.frames(items.back().clean.size());
    std::uniform_int_distribution<int> u(0, mc.head.num_classes - 1);
    PseudoLabelSeq l(static_cast<size_t>(t));
    for (auto& x : l) x = u(rng);
    labels.push_back(std::move(l));
  }
  ParameterSet params = init_model(mc, seed);
  auto loss = [&](Tape& tape) {
    Var total;
    for (int b = 0; b < batch; ++b) {
      ForwardOutput f = forward_example(tape, mc, params, items[static_cast<size_t>(b)],
                                        labels[static_cast<size_t>(b)],
                                        mix_seed(seed, static_cast<uint64_t>(b)));
      total = b == 0 ? f.loss.total : add(total, f.loss.total);
    }
    return scale(total, 1.0 / batch);
  };
  return grad_check(loss, params, eps, tolerance);
}

}  // namespace shubert
