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

#include "shubert/objective.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shubert {

namespace {

Matrix randn(Index r, Index c, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

void init_head(ParameterSet& params, int dim, const HeadConfig& config,
               std::mt19937_64& rng, const std::string& prefix) {
  SHUBERT_CHECK(config.num_classes >= 2, "head: K must be >= 2");
  SHUBERT_CHECK(config.temperature > 0.0, "head: temperature must be > 0");
  if (config.affine) {
    params.add(prefix + ".affine.weight",
               randn(dim, config.num_classes, 1.0 / std::sqrt(dim), rng));
    params.add(prefix + ".affine.bias", Matrix::Zero(1, config.num_classes));
    return;
  }
  params.add(prefix + ".proj.weight",
             randn(dim, config.proj_dim, 1.0 / std::sqrt(dim), rng));
  params.add(prefix + ".proj.bias", Matrix::Zero(1, config.proj_dim));
  params.add(prefix + ".codewords",
             randn(config.num_classes, config.proj_dim, 1.0, rng));
}

void init_lpb(ParameterSet& params, int dim, const CCConfig& config,
              std::mt19937_64& rng, const std::string& prefix) {
  params.add(prefix + ".weight",
             randn(dim, config.proj_dim, 1.0 / std::sqrt(dim), rng));
  params.add(prefix + ".bias", Matrix::Zero(1, config.proj_dim));
}

Var predict_logits(Var contextual, const HeadConfig& config,
                   const ParameterSet& params, const std::string& prefix) {
  Tape& t = *contextual.tape;
  if (config.affine) {
    SHUBERT_CHECK(contextual.cols() ==
                      params.get(prefix + ".affine.weight").value.rows(),
                  "head: feature dim mismatch");
    return add(matmul(contextual, t.param(params.get(prefix + ".affine.weight"))),
               t.param(params.get(prefix + ".affine.bias")));
  }
  const Parameter& w = params.get(prefix + ".proj.weight");
  SHUBERT_CHECK(contextual.cols() == w.value.rows(),
                "head: feature dim " + std::to_string(contextual.cols()) +
                    " != " + std::to_string(w.value.rows()));
  const Parameter& cw = params.get(prefix + ".codewords");
  SHUBERT_CHECK(cw.value.rows() == config.num_classes,
                "head: codeword count does not match K");
  Var proj = add(matmul(contextual, t.param(w)),
                 t.param(params.get(prefix + ".proj.bias")));
  return scale(cosine_similarity(proj, t.param(cw), 1e-8),
               1.0 / config.temperature);
}

Var masked_ce(Var logits, const PseudoLabelSeq& labels, const MaskPlan& plan) {
  SHUBERT_CHECK(!plan.masked.empty(), "masked_ce: empty mask in training");
  SHUBERT_CHECK(static_cast<Index>(labels.size()) == logits.rows(),
                "masked_ce: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(logits.rows()) +
                    " frames");
  std::vector<int> targets;
  targets.reserve(plan.masked.size());
  for (int t : plan.masked) {
    const int u = labels[static_cast<size_t>(t)];
    SHUBERT_CHECK(u >= 0 && u < logits.cols(),
                  "masked_ce: label out of range at frame " + std::to_string(t));
    targets.push_back(u);
  }
  // Only masked rows enter the graph, so unmasked logits cannot affect it.
  Var rows = gather_rows(logits, plan.masked);
  std::vector<int> idx(plan.masked.size());
  std::iota(idx.begin(), idx.end(), 0);
  Var logp = pick(log_softmax_rows(rows), idx, targets);
  return scale(sum(logp), -1.0 / static_cast<double>(plan.masked.size()));
}

std::vector<int> sample_frames(Index frames, int n, std::mt19937_64& rng) {
  std::vector<int> all(static_cast<size_t>(frames));
  std::iota(all.begin(), all.end(), 0);
  const Index keep = std::min<Index>(frames, std::max(n, 0));
  // Partial Fisher-Yates: the first `keep` entries become the sample.
  for (Index i = 0; i < keep; ++i) {
    std::uniform_int_distribution<Index> pick(i, frames - 1);
    std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(pick(rng))]);
  }
  all.resize(static_cast<size_t>(keep));
  std::sort(all.begin(), all.end());
  return all;
}

ProjectedPair project_and_sample(Var c, Var c_tilde, const CCConfig& config,
                                 const ParameterSet& params,
                                 std::mt19937_64& rng,
                                 const std::string& prefix) {
  SHUBERT_CHECK(c.rows() == c_tilde.rows() && c.cols() == c_tilde.cols(),
                "project_and_sample: branch shapes differ");
  Tape& t = *c.tape;
  ProjectedPair out;
  out.frames = sample_frames(c.rows(), config.frames, rng);
  Var w = t.param(params.get(prefix + ".weight"));
  Var b = t.param(params.get(prefix + ".bias"));
  out.z = add(matmul(gather_rows(c, out.frames), w), b);
  out.z_tilde = add(matmul(gather_rows(c_tilde, out.frames), w), b);
  return out;
}

CCResult cc_loss(Var z, Var z_tilde, const CCConfig& config) {
  SHUBERT_CHECK(z.rows() == z_tilde.rows() && z.cols() == z_tilde.cols(),
                "cc_loss: Z and Z~ shapes differ");
  SHUBERT_CHECK(z.rows() >= 2, "cc_loss: need at least two frames");
  Var a = z, b = z_tilde;
  if (config.center) {
    a = sub(a, mean_rows(a));
    b = sub(b, mean_rows(b));
  }
  CCResult res;
  res.lambda = config.lambda;
  res.r = column_correlation(a, b, config.norm_floor);
  const Index d = res.r.rows();
  std::vector<int> diag(static_cast<size_t>(d));
  std::iota(diag.begin(), diag.end(), 0);
  Var rii = pick(res.r, diag, diag);
  res.invariance = sum(square(add_scalar(scale(rii, -1.0), 1.0)));
  res.redundancy = sub(sum(square(res.r)), sum(square(rii)));
  res.loss = add(res.invariance, scale(res.redundancy, config.lambda));
  return res;
}

LossBreakdown total_loss(Var ce_a, Var ce_b, const CCResult& cc) {
  LossBreakdown out;
  out.ce_a = ce_a;
  out.ce_b = ce_b;
  out.cc_inv = cc.invariance;
  out.cc_red = cc.redundancy;
  out.total = add(add(ce_a, ce_b), cc.loss);
  return out;
}

LossBreakdown one_path_loss(Var ce_a) {
  LossBreakdown out;
  out.ce_a = ce_a;
  out.total = ce_a;
  out.one_path = true;
  return out;
}

}  // namespace shubert
