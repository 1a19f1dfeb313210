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

#include "shubert/sate.h"

#include <cmath>
#include <vector>

namespace shubert {

namespace {

Matrix randn(Index r, Index c, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::string layer_prefix(const std::string& prefix, int layer) {
  return prefix + ".layer" + std::to_string(layer);
}

}  // namespace

void EncoderConfig::validate() const {
  SHUBERT_CHECK(n_layers >= 1, "encoder: n_layers must be >= 1");
  SHUBERT_CHECK(satl_index >= 0 && satl_index < n_layers,
                "encoder: satl_index must lie in [0, n_layers)");
  SHUBERT_CHECK(dim >= 1 && n_heads >= 1 && dim % n_heads == 0,
                "encoder: dim must be a positive multiple of n_heads");
  SHUBERT_CHECK(emb_dim >= 1 && ffn_dim >= 1, "encoder: bad emb/ffn dims");
  SHUBERT_CHECK(ln_eps > 0.0, "encoder: ln_eps must be positive");
}

NormParams norm_param_names(const std::string& prefix, int layer, int which) {
  const std::string p = layer_prefix(prefix, layer) + ".ln" + std::to_string(which);
  return {p + ".gamma",        p + ".beta",        p + ".cond_w.weight",
          p + ".cond_w.bias",  p + ".cond_b.weight", p + ".cond_b.bias"};
}

void init_encoder(ParameterSet& params, const EncoderConfig& config,
                  std::mt19937_64& rng, const std::string& prefix) {
  config.validate();
  const int d = config.dim;
  const double attn_std = 1.0 / std::sqrt(d);
  // Residual branches start small so the stack begins near identity.
  const double out_std = attn_std / std::sqrt(2.0 * config.n_layers);
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string p = layer_prefix(prefix, l);
    for (int which = 1; which <= 2; ++which) {
      NormParams n = norm_param_names(prefix, l, which);
      params.add(n.gamma, Matrix::Ones(1, d));
      params.add(n.beta, Matrix::Zero(1, d));
      const bool conditioned =
          l == config.satl_index && (which == 1 || config.satl_both_norms);
      if (conditioned) {
        // w(e) == 1 and b(e) == 0 at initialisation.
        params.add(n.cond_w_weight, Matrix::Zero(config.emb_dim, d));
        params.add(n.cond_w_bias, Matrix::Ones(1, d));
        params.add(n.cond_b_weight, Matrix::Zero(config.emb_dim, d));
        params.add(n.cond_b_bias, Matrix::Zero(1, d));
      }
    }
    for (const char* name : {"wq", "wk", "wv"}) {
      params.add(p + ".attn." + name, randn(d, d, attn_std, rng));
    }
    for (const char* name : {"bq", "bv"}) {
      params.add(p + ".attn." + name, Matrix::Zero(1, d));
    }
    params.add(p + ".attn.wo", randn(d, d, out_std, rng));
    params.add(p + ".attn.bo", Matrix::Zero(1, d));
    params.add(p + ".ffn.w1", randn(d, config.ffn_dim, attn_std, rng));
    params.add(p + ".ffn.b1", Matrix::Zero(1, config.ffn_dim));
    params.add(p + ".ffn.w2",
               randn(config.ffn_dim, d,
                     1.0 / std::sqrt(config.ffn_dim * 2.0 * config.n_layers),
                     rng));
    params.add(p + ".ffn.b2", Matrix::Zero(1, d));
  }
  params.add(prefix + ".final_ln.gamma", Matrix::Ones(1, d));
  params.add(prefix + ".final_ln.beta", Matrix::Zero(1, d));
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  return add(mul(normalize_rows_moments(x, eps), gamma), beta);
}

Var cond_layer_norm(Var x, Var e, Var gamma, Var beta, Var w_weight,
                    Var w_bias, Var b_weight, Var b_bias, double eps) {
  Var w_e = add(matmul(e, w_weight), w_bias);
  Var b_e = add(matmul(e, b_weight), b_bias);
  Var scale_vec = add(mul(w_e, gamma), b_e);
  return add(mul(normalize_rows_moments(x, eps), scale_vec), beta);
}

Matrix sinusoidal_positions(Index frames, int dim) {
  Matrix pe(frames, dim);
  for (Index t = 0; t < frames; ++t) {
    for (int i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(t, i) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
    }
  }
  return pe;
}

Var encode(Var masked_frames, Var e, const EncoderConfig& config,
           const ParameterSet& params, Conditioning mode, int n_layers,
           const std::string& prefix) {
  config.validate();
  Tape& t = *masked_frames.tape;
  SHUBERT_CHECK(masked_frames.cols() == config.dim,
                "encoder: input feature dim " +
                    std::to_string(masked_frames.cols()) + " != D " +
                    std::to_string(config.dim));
  if (mode == Conditioning::kSpeaker) {
    SHUBERT_CHECK(e.rows() == 1 && e.cols() == config.emb_dim,
                  "encoder: speaker embedding must be 1 x " +
                      std::to_string(config.emb_dim));
  }
  const int layers = n_layers < 0 ? config.n_layers : n_layers;
  SHUBERT_CHECK(layers <= config.n_layers, "encoder: too many layers requested");
  const Index frames = masked_frames.rows();
  const int d = config.dim;
  const int dh = d / config.n_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  auto P = [&](const std::string& name) { return t.param(params.get(name)); };
  auto norm = [&](Var x, int layer, int which) {
    NormParams n = norm_param_names(prefix, layer, which);
    const bool conditioned = mode == Conditioning::kSpeaker &&
                             layer == config.satl_index &&
                             (which == 1 || config.satl_both_norms);
    if (!conditioned) return layer_norm(x, P(n.gamma), P(n.beta), config.ln_eps);
    return cond_layer_norm(x, e, P(n.gamma), P(n.beta), P(n.cond_w_weight),
                           P(n.cond_w_bias), P(n.cond_b_weight),
                           P(n.cond_b_bias), config.ln_eps);
  };

  Var x = add(masked_frames,
              t.constant(config.pos_scale * sinusoidal_positions(frames, d)));
  for (int l = 0; l < layers; ++l) {
    const std::string p = layer_prefix(prefix, l);
    Var h = norm(x, l, 1);
    Var q = add(matmul(h, P(p + ".attn.wq")), P(p + ".attn.bq"));
    // No key bias: it shifts every score in a row equally.
    Var k = matmul(h, P(p + ".attn.wk"));
    Var v = add(matmul(h, P(p + ".attn.wv")), P(p + ".attn.bv"));
    std::vector<Var> heads;
    heads.reserve(static_cast<size_t>(config.n_heads));
    for (int hd = 0; hd < config.n_heads; ++hd) {
      Var qh = slice_cols(q, hd * dh, dh);
      Var kh = slice_cols(k, hd * dh, dh);
      Var vh = slice_cols(v, hd * dh, dh);
      Var att = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dh));
      heads.push_back(matmul(att, vh));
    }
    Var attn = add(matmul(concat_cols(heads), P(p + ".attn.wo")),
                   P(p + ".attn.bo"));
    x = add(x, attn);
    Var f = norm(x, l, 2);
    f = gelu(add(matmul(f, P(p + ".ffn.w1")), P(p + ".ffn.b1")));
    f = add(matmul(f, P(p + ".ffn.w2")), P(p + ".ffn.b2"));
    x = add(x, f);
  }
  if (layers == config.n_layers) {
    x = layer_norm(x, P(prefix + ".final_ln.gamma"),
                   P(prefix + ".final_ln.beta"), config.ln_eps);
  }
  return x;
}

}  // namespace shubert
