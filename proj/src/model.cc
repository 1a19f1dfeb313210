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

#include "shubert/model.h"

#include <cmath>

namespace shubert {

void ModelConfig::validate() const {
  frontend.validate();
  encoder.validate();
  SHUBERT_CHECK(frontend.dim == encoder.dim,
                "model: frontend dim must equal encoder dim");
  SHUBERT_CHECK(spkemb.dim == encoder.emb_dim,
                "model: speaker embedding dim must equal encoder emb_dim");
  SHUBERT_CHECK(head.num_classes >= 2, "model: K must be >= 2");
  SHUBERT_CHECK(cc.frames >= 2, "model: cc frames must be >= 2");
  SHUBERT_CHECK(mask.span_length >= 1, "model: mask span must be >= 1");
  SHUBERT_CHECK(mask.p_start >= 0.0 && mask.p_start <= 1.0,
                "model: mask p_start outside [0, 1]");
}

ParameterSet init_model(const ModelConfig& config, uint64_t seed) {
  config.validate();
  ParameterSet params;
  std::mt19937_64 rng(mix_seed(seed, 0x1417));
  init_frontend(params, config.frontend, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix mask(1, config.encoder.dim);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng);
  params.add("mask_embed", std::move(mask));
  init_spkemb(params, config.frontend.dim, config.spkemb, rng);
  init_encoder(params, config.encoder, rng);
  init_head(params, config.encoder.dim, config.head, rng);
  init_lpb(params, config.encoder.dim, config.cc, rng);
  return params;
}

MaskPlan plan_training_mask(Index frames, const MaskConfig& config,
                            std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    MaskPlan p = plan_mask(frames, config.p_start, config.span_length, rng);
    if (!p.empty()) return p;
  }
  std::uniform_int_distribution<Index> start(0, frames - 1);
  return plan_from_starts(frames, {static_cast<int>(start(rng))},
                          config.span_length);
}

ForwardOutput forward_example(Tape& tape, const ModelConfig& config,
                              const ParameterSet& params,
                              const MixtureExample& example,
                              const PseudoLabelSeq& labels, uint64_t seed,
                              bool one_path) {
  std::mt19937_64 rng(seed);
  ForwardOutput out;
  out.embedding = embed_enrollment(tape, example.enrollment, config.frontend,
                                   config.spkemb, params);
  Var mask_embed = tape.param(params.get("mask_embed"));

  Var h_a = encode_frames(tape, example.view_a, config.frontend, params);
  SHUBERT_CHECK(static_cast<Index>(labels.size()) == h_a.rows(),
                "example " + example.id + ": " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(h_a.rows()) + " frames");
  out.plan_a = plan_training_mask(h_a.rows(), config.mask, rng);
  out.contextual_a = encode(apply_mask(h_a, out.plan_a, mask_embed),
                            out.embedding, config.encoder, params);
  Var ce_a = masked_ce(predict_logits(out.contextual_a, config.head, params),
                       labels, out.plan_a);
  if (one_path) {
    out.loss = one_path_loss(ce_a);
    return out;
  }

  Var h_b = encode_frames(tape, example.view_b, config.frontend, params);
  SHUBERT_CHECK(h_b.rows() == h_a.rows(), "example " + example.id +
                                              ": views differ in frame count");
  out.plan_b = config.mask.independent_branches
                   ? plan_training_mask(h_b.rows(), config.mask, rng)
                   : out.plan_a;
  out.contextual_b = encode(apply_mask(h_b, out.plan_b, mask_embed),
                            out.embedding, config.encoder, params);
  Var ce_b = masked_ce(predict_logits(out.contextual_b, config.head, params),
                       labels, out.plan_b);
  ProjectedPair z = project_and_sample(out.contextual_a, out.contextual_b,
                                       config.cc, params, rng);
  out.cc_frames = z.frames;
  out.loss = total_loss(ce_a, ce_b, cc_loss(z.z, z.z_tilde, config.cc));
  return out;
}

namespace {

Var encode_input(Tape& tape, const ModelConfig& config,
                 const ParameterSet& params, const Waveform& input,
                 const RowVector& e, const MaskPlan& plan) {
  Var h = encode_frames(tape, input, config.frontend, params);
  Var masked = apply_mask(h, plan, tape.param(params.get("mask_embed")));
  return encode(masked, tape.constant(Matrix(e)), config.encoder, params);
}

}  // namespace

Matrix contextual(const ModelConfig& config, const ParameterSet& params,
                  const Waveform& input, const RowVector& e,
                  const MaskPlan& plan) {
  Tape tape;
  return encode_input(tape, config, params, input, e, plan).value();
}

std::vector<int> predict_labels(const ModelConfig& config,
                                const ParameterSet& params,
                                const Waveform& input, const RowVector& e,
                                const MaskPlan& plan) {
  Tape tape;
  Var c = encode_input(tape, config, params, input, e, plan);
  const Matrix& logits = predict_logits(c, config.head, params).value();
  std::vector<int> out(static_cast<size_t>(logits.rows()));
  for (Index t = 0; t < logits.rows(); ++t) {
    Index arg = 0;
    logits.row(t).maxCoeff(&arg);
    out[static_cast<size_t>(t)] = static_cast<int>(arg);
  }
  return out;
}

Matrix layer_features(const ModelConfig& config, const ParameterSet& params,
                      const Waveform& clean, int layers) {
  Tape tape;
  Var h = encode_frames(tape, clean, config.frontend, params);
  Var e = embed_features(h, config.spkemb, params);
  if (layers == 0) return h.value();
  return encode(h, e, config.encoder, params, Conditioning::kSpeaker, layers)
      .value();
}

}  // namespace shubert
