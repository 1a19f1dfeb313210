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

#include "shubert/numerics.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace shubert {

// ---------------------------------------------------------------------------
// ParameterSet

ParameterSet::ParameterSet(const ParameterSet& other) { *this = other; }

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this == &other) return *this;
  params_.clear();
  by_name_.clear();
  for (const auto& p : other.params_) add(p->name, p->value);
  return *this;
}

Parameter& ParameterSet::add(const std::string& name, Matrix init) {
  SHUBERT_CHECK(!by_name_.contains(name), "duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->index = static_cast<int>(params_.size());
  by_name_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::get(std::string_view name) {
  auto it = by_name_.find(name);
  SHUBERT_CHECK(it != by_name_.end(),
                "unknown parameter: " + std::string(name));
  return *params_[it->second];
}

const Parameter& ParameterSet::get(std::string_view name) const {
  auto it = by_name_.find(name);
  SHUBERT_CHECK(it != by_name_.end(),
                "unknown parameter: " + std::string(name));
  return *params_[it->second];
}

bool ParameterSet::contains(std::string_view name) const {
  return by_name_.find(name) != by_name_.end();
}

size_t ParameterSet::num_scalars() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

Gradients zero_gradients(const ParameterSet& params) {
  Gradients g;
  g.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = params.at(i).value;
    g.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
  return g;
}

void add_gradients(Gradients& into, const Gradients& from) {
  SHUBERT_CHECK(into.size() == from.size(), "gradient buffer size mismatch");
  for (size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

double global_norm(const Gradients& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += g.squaredNorm();
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::input(Matrix value) { return push(std::move(value), true, {}); }

Var Tape::param(const Parameter& p) {
  SHUBERT_CHECK(p.index >= 0, "parameter not registered: " + p.name);
  auto idx = static_cast<size_t>(p.index);
  if (param_nodes_.size() <= idx) param_nodes_.resize(idx + 1, -1);
  if (param_nodes_[idx] >= 0) return Var{this, param_nodes_[idx]};
  Var v = push(p.value, true, {});
  nodes_[v.id].param_index = p.index;
  param_nodes_[idx] = v.id;
  return v;
}

Var Tape::push(Matrix value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss, Gradients* grads) {
  SHUBERT_CHECK(loss.tape == this, "loss belongs to another tape");
  Node& root = nodes_[loss.id];
  SHUBERT_CHECK(root.value.size() == 1, "backward needs a scalar loss");
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.param_index >= 0 && grads != nullptr) {
      (*grads)[n.param_index] += n.grad;
    }
    if (n.backward) n.backward(*this, n.value, n.grad);
  }
}

// ---------------------------------------------------------------------------
// helpers

namespace {

bool any_grad(std::initializer_list<Var> vs) {
  for (const Var& v : vs) {
    if (v.tape->requires_grad(v.id)) return true;
  }
  return false;
}

Tape& tape_of(Var a, Var b) {
  SHUBERT_CHECK(a.tape == b.tape && a.tape != nullptr,
                "operands live on different tapes");
  return *a.tape;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Index broadcast_dim(Index a, Index b, const char* op) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw Error(std::string(op) + ": incompatible broadcast dimensions " +
              std::to_string(a) + " vs " + std::to_string(b));
}

Matrix expand(const Matrix& m, Index r, Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  if (m.rows() == 1 && m.cols() == 1) return Matrix::Constant(r, c, m(0, 0));
  if (m.rows() == 1) return m.replicate(r, 1);
  return m.replicate(1, c);
}

Matrix reduce_to(const Matrix& g, Index r, Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  if (r == 1 && c == 1) return Matrix::Constant(1, 1, g.sum());
  if (r == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

std::vector<int> unique_sorted(std::span<const int> rows) {
  std::set<int> s(rows.begin(), rows.end());
  return {s.begin(), s.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Index r = broadcast_dim(av.rows(), bv.rows(), "add");
  Index c = broadcast_dim(av.cols(), bv.cols(), "add");
  Matrix out = expand(av, r, c) + expand(bv, r, c);
  return t.push(std::move(out), any_grad({a, b}),
                [a, b](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  const Matrix& bv = t.value(b.id);
                  t.accumulate(a.id, reduce_to(g, av.rows(), av.cols()));
                  t.accumulate(b.id, reduce_to(g, bv.rows(), bv.cols()));
                });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Index r = broadcast_dim(av.rows(), bv.rows(), "sub");
  Index c = broadcast_dim(av.cols(), bv.cols(), "sub");
  Matrix out = expand(av, r, c) - expand(bv, r, c);
  return t.push(std::move(out), any_grad({a, b}),
                [a, b](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  const Matrix& bv = t.value(b.id);
                  t.accumulate(a.id, reduce_to(g, av.rows(), av.cols()));
                  t.accumulate(b.id, -reduce_to(g, bv.rows(), bv.cols()));
                });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Index r = broadcast_dim(av.rows(), bv.rows(), "mul");
  Index c = broadcast_dim(av.cols(), bv.cols(), "mul");
  Matrix out = expand(av, r, c).cwiseProduct(expand(bv, r, c));
  return t.push(std::move(out), any_grad({a, b}),
                [a, b, r, c](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  const Matrix& bv = t.value(b.id);
                  if (t.requires_grad(a.id)) {
                    Matrix ga = g.cwiseProduct(expand(bv, r, c));
                    t.accumulate(a.id, reduce_to(ga, av.rows(), av.cols()));
                  }
                  if (t.requires_grad(b.id)) {
                    Matrix gb = g.cwiseProduct(expand(av, r, c));
                    t.accumulate(b.id, reduce_to(gb, bv.rows(), bv.cols()));
                  }
                });
}

Var div(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Index r = broadcast_dim(av.rows(), bv.rows(), "div");
  Index c = broadcast_dim(av.cols(), bv.cols(), "div");
  Matrix out = expand(av, r, c).cwiseQuotient(expand(bv, r, c));
  return t.push(std::move(out), any_grad({a, b}),
                [a, b, r, c](Tape& t, const Matrix& y, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  const Matrix& bv = t.value(b.id);
                  Matrix be = expand(bv, r, c);
                  if (t.requires_grad(a.id)) {
                    Matrix ga = g.cwiseQuotient(be);
                    t.accumulate(a.id, reduce_to(ga, av.rows(), av.cols()));
                  }
                  if (t.requires_grad(b.id)) {
                    Matrix gb = -g.cwiseProduct(y).cwiseQuotient(be);
                    t.accumulate(b.id, reduce_to(gb, bv.rows(), bv.cols()));
                  }
                });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.push(a.value() * s, any_grad({a}),
                [a, s](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, g * s);
                });
}

Var add_scalar(Var a, double s) {
  Tape& t = *a.tape;
  Matrix out = a.value().array() + s;
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, g);
                });
}

// ---------------------------------------------------------------------------
// linear algebra

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  SHUBERT_CHECK(a.cols() == b.rows(), "matmul: shape mismatch " +
                                          shape_str(a.value()) + " * " +
                                          shape_str(b.value()));
  Matrix out;
  out.noalias() = a.value() * b.value();
  return t.push(std::move(out), any_grad({a, b}),
                [a, b](Tape& t, const Matrix&, const Matrix& g) {
                  if (t.requires_grad(a.id)) {
                    Matrix ga;
                    ga.noalias() = g * t.value(b.id).transpose();
                    t.accumulate(a.id, ga);
                  }
                  if (t.requires_grad(b.id)) {
                    Matrix gb;
                    gb.noalias() = t.value(a.id).transpose() * g;
                    t.accumulate(b.id, gb);
                  }
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  SHUBERT_CHECK(a.cols() == b.cols(), "matmul_nt: shape mismatch " +
                                          shape_str(a.value()) + " * " +
                                          shape_str(b.value()) + "^T");
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return t.push(std::move(out), any_grad({a, b}),
                [a, b](Tape& t, const Matrix&, const Matrix& g) {
                  if (t.requires_grad(a.id)) {
                    Matrix ga;
                    ga.noalias() = g * t.value(b.id);
                    t.accumulate(a.id, ga);
                  }
                  if (t.requires_grad(b.id)) {
                    Matrix gb;
                    gb.noalias() = g.transpose() * t.value(a.id);
                    t.accumulate(b.id, gb);
                  }
                });
}

Var matmul_tn(Var a, Var b) {
  Tape& t = tape_of(a, b);
  SHUBERT_CHECK(a.rows() == b.rows(), "matmul_tn: shape mismatch " +
                                          shape_str(a.value()) + "^T * " +
                                          shape_str(b.value()));
  Matrix out;
  out.noalias() = a.value().transpose() * b.value();
  return t.push(std::move(out), any_grad({a, b}),
                [a, b](Tape& t, const Matrix&, const Matrix& g) {
                  if (t.requires_grad(a.id)) {
                    Matrix ga;
                    ga.noalias() = t.value(b.id) * g.transpose();
                    t.accumulate(a.id, ga);
                  }
                  if (t.requires_grad(b.id)) {
                    Matrix gb;
                    gb.noalias() = t.value(a.id) * g;
                    t.accumulate(b.id, gb);
                  }
                });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().transpose();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, g.transpose());
                });
}

// ---------------------------------------------------------------------------
// unary

Var gelu(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().unaryExpr(&gelu_value);
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, g.cwiseProduct(
                                         t.value(a.id).unaryExpr(&gelu_slope)));
                });
}

Var exp(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().exp();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix& y, const Matrix& g) {
                  t.accumulate(a.id, g.cwiseProduct(y));
                });
}

Var log(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().log();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, g.cwiseQuotient(t.value(a.id)));
                });
}

Var sqrt(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().sqrt();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix& y, const Matrix& g) {
                  t.accumulate(a.id, (0.5 * g.array() / y.array()).matrix());
                });
}

Var square(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().square();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, 2.0 * g.cwiseProduct(t.value(a.id)));
                });
}

// ---------------------------------------------------------------------------
// reductions

Var sum(Var a) {
  Tape& t = *a.tape;
  Matrix out = Matrix::Constant(1, 1, a.value().sum());
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  t.accumulate(a.id,
                               Matrix::Constant(av.rows(), av.cols(), g(0, 0)));
                });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().colwise().sum();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, g.replicate(t.value(a.id).rows(), 1));
                });
}

Var mean_rows(Var a) {
  SHUBERT_CHECK(a.rows() > 0, "mean_rows: empty input");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var row_mean(Var a) {
  Tape& t = *a.tape;
  const Index n = a.cols();
  Matrix out = a.value().rowwise().mean();
  return t.push(std::move(out), any_grad({a}),
                [a, n](Tape& t, const Matrix&, const Matrix& g) {
                  t.accumulate(a.id, (g / static_cast<double>(n)).replicate(1, n));
                });
}

Var row_var(Var a) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  const Index n = av.cols();
  Matrix centered = av.colwise() - av.rowwise().mean();
  Matrix out = centered.array().square().rowwise().sum() / static_cast<double>(n);
  return t.push(std::move(out), any_grad({a}),
                [a, n](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  Matrix centered = av.colwise() - av.rowwise().mean();
                  Matrix ga = centered.array().colwise() *
                              (2.0 * g.col(0).array() / static_cast<double>(n));
                  t.accumulate(a.id, ga);
                });
}

// ---------------------------------------------------------------------------
// normalizations

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  Matrix out = av.colwise() - av.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix& y, const Matrix& g) {
                  Matrix dot = g.cwiseProduct(y).rowwise().sum();
                  Matrix ga = y.cwiseProduct(g - dot.replicate(1, g.cols()));
                  t.accumulate(a.id, ga);
                });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  Matrix shifted = av.colwise() - av.rowwise().maxCoeff();
  Matrix lse = shifted.array().exp().rowwise().sum().log();
  Matrix out = shifted.colwise() - lse.col(0);
  return t.push(std::move(out), any_grad({a}),
                [a](Tape& t, const Matrix& y, const Matrix& g) {
                  Matrix p = y.array().exp();
                  Matrix gs = g.rowwise().sum();
                  Matrix ga = g - p.cwiseProduct(gs.replicate(1, g.cols()));
                  t.accumulate(a.id, ga);
                });
}

Var normalize_rows_moments(Var a, double eps) {
  SHUBERT_CHECK(eps > 0.0, "normalize_rows_moments: eps must be positive");
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  const Index n = av.cols();
  Matrix centered = av.colwise() - av.rowwise().mean();
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) +
       eps)
          .rsqrt();
  Matrix out = centered.array().colwise() * inv_std.array();
  return t.push(
      std::move(out), any_grad({a}),
      [a, inv_std, n](Tape& t, const Matrix& y, const Matrix& g) {
        const double dn = static_cast<double>(n);
        Eigen::VectorXd gsum = g.rowwise().sum();
        Eigen::VectorXd gy = g.cwiseProduct(y).rowwise().sum();
        Matrix ga = (dn * g.array() - gsum.replicate(1, n).array() -
                     y.array() * gy.replicate(1, n).array())
                        .colwise() *
                    (inv_std.array() / dn);
        t.accumulate(a.id, ga);
      });
}

Var l2_normalize_rows(Var a, double floor) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  Eigen::VectorXd norms = av.rowwise().norm();
  Eigen::VectorXd denom = norms.cwiseMax(floor);
  Eigen::Array<bool, Eigen::Dynamic, 1> active = (norms.array() > floor);
  Matrix out = av.array().colwise() / denom.array();
  return t.push(std::move(out), any_grad({a}),
                [a, denom, active](Tape& t, const Matrix& y, const Matrix& g) {
                  Matrix ga(g.rows(), g.cols());
                  for (Index r = 0; r < g.rows(); ++r) {
                    if (active(r)) {
                      const double d = g.row(r).dot(y.row(r));
                      ga.row(r) = (g.row(r) - d * y.row(r)) / denom(r);
                    } else {
                      ga.row(r) = g.row(r) / denom(r);
                    }
                  }
                  t.accumulate(a.id, ga);
                });
}

Var l2_normalize_cols(Var a, double floor) {
  return transpose(l2_normalize_rows(transpose(a), floor));
}

Var cosine_similarity(Var a, Var b, double floor) {
  return matmul_nt(l2_normalize_rows(a, floor), l2_normalize_rows(b, floor));
}

Var column_correlation(Var a, Var b, double floor) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  SHUBERT_CHECK(av.rows() == bv.rows(),
                "column_correlation: row count mismatch");
  Matrix cross;
  cross.noalias() = av.transpose() * bv;
  // Squared norms come from the same product kernel as `cross`, so for a == b
  // the diagonal reads s / sqrt(s * s) == 1 exactly.
  Matrix aa;
  aa.noalias() = av.transpose() * av;
  Matrix bb;
  bb.noalias() = bv.transpose() * bv;
  const Index da = av.cols();
  const Index db = bv.cols();
  Eigen::VectorXd sa = aa.diagonal();
  Eigen::VectorXd sb = bb.diagonal();
  Eigen::VectorXd na = sa.cwiseSqrt();
  Eigen::VectorXd nb = sb.cwiseSqrt();
  Eigen::Array<bool, Eigen::Dynamic, 1> act_a = na.array() > floor;
  Eigen::Array<bool, Eigen::Dynamic, 1> act_b = nb.array() > floor;
  Matrix denom(da, db);
  for (Index i = 0; i < da; ++i) {
    for (Index j = 0; j < db; ++j) {
      denom(i, j) = (act_a(i) && act_b(j))
                        ? std::sqrt(sa(i) * sb(j))
                        : std::max(na(i), floor) * std::max(nb(j), floor);
    }
  }
  Matrix out = cross.cwiseQuotient(denom);
  return t.push(
      std::move(out), any_grad({a, b}),
      [a, b, denom, na, nb, act_a, act_b](Tape& t, const Matrix& r,
                                          const Matrix& g) {
        const Matrix& av = t.value(a.id);
        const Matrix& bv = t.value(b.id);
        Matrix gs = g.cwiseQuotient(denom);
        Matrix gr = g.cwiseProduct(r);
        if (t.requires_grad(a.id)) {
          Matrix ga;
          ga.noalias() = bv * gs.transpose();
          Eigen::VectorXd row = gr.rowwise().sum();
          for (Index i = 0; i < av.cols(); ++i) {
            if (act_a(i)) ga.col(i) -= av.col(i) * (row(i) / (na(i) * na(i)));
          }
          t.accumulate(a.id, ga);
        }
        if (t.requires_grad(b.id)) {
          Matrix gb;
          gb.noalias() = av * gs;
          Eigen::VectorXd col = gr.colwise().sum().transpose();
          for (Index j = 0; j < bv.cols(); ++j) {
            if (act_b(j)) gb.col(j) -= bv.col(j) * (col(j) / (nb(j) * nb(j)));
          }
          t.accumulate(b.id, gb);
        }
      });
}

// ---------------------------------------------------------------------------
// indexing

Var gather_rows(Var a, std::span<const int> rows) {
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(rows.size()), av.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    SHUBERT_CHECK(rows[i] >= 0 && rows[i] < av.rows(),
                  "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = av.row(rows[i]);
  }
  std::vector<int> idx(rows.begin(), rows.end());
  return t.push(std::move(out), any_grad({a}),
                [a, idx](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  Matrix ga = Matrix::Zero(av.rows(), av.cols());
                  for (size_t i = 0; i < idx.size(); ++i) {
                    ga.row(idx[i]) += g.row(static_cast<Index>(i));
                  }
                  t.accumulate(a.id, ga);
                });
}

Var replace_rows(Var a, std::span<const int> rows, Var row) {
  Tape& t = tape_of(a, row);
  const Matrix& av = a.value();
  SHUBERT_CHECK(row.rows() == 1 && row.cols() == av.cols(),
                "replace_rows: replacement must be 1x" +
                    std::to_string(av.cols()));
  std::vector<int> idx = unique_sorted(rows);
  Matrix out = av;
  for (int r : idx) {
    SHUBERT_CHECK(r >= 0 && r < av.rows(), "replace_rows: index " +
                                               std::to_string(r) +
                                               " out of range");
    out.row(r) = row.value().row(0);
  }
  return t.push(std::move(out), any_grad({a, row}),
                [a, row, idx](Tape& t, const Matrix&, const Matrix& g) {
                  if (t.requires_grad(a.id)) {
                    Matrix ga = g;
                    for (int r : idx) ga.row(r).setZero();
                    t.accumulate(a.id, ga);
                  }
                  if (t.requires_grad(row.id)) {
                    Matrix gr = Matrix::Zero(1, g.cols());
                    for (int r : idx) gr.row(0) += g.row(r);
                    t.accumulate(row.id, gr);
                  }
                });
}

Var pick(Var a, std::span<const int> rows, std::span<const int> cols) {
  SHUBERT_CHECK(rows.size() == cols.size(), "pick: index length mismatch");
  Tape& t = *a.tape;
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(rows.size()), 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    SHUBERT_CHECK(rows[i] >= 0 && rows[i] < av.rows() && cols[i] >= 0 &&
                      cols[i] < av.cols(),
                  "pick: index out of range");
    out(static_cast<Index>(i), 0) = av(rows[i], cols[i]);
  }
  std::vector<int> ri(rows.begin(), rows.end());
  std::vector<int> ci(cols.begin(), cols.end());
  return t.push(std::move(out), any_grad({a}),
                [a, ri, ci](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  Matrix ga = Matrix::Zero(av.rows(), av.cols());
                  for (size_t i = 0; i < ri.size(); ++i) {
                    ga(ri[i], ci[i]) += g(static_cast<Index>(i), 0);
                  }
                  t.accumulate(a.id, ga);
                });
}

Var concat_cols(std::span<const Var> parts) {
  SHUBERT_CHECK(!parts.empty(), "concat_cols: no inputs");
  Tape& t = *parts[0].tape;
  const Index r = parts[0].rows();
  Index c = 0;
  bool need = false;
  for (const Var& p : parts) {
    SHUBERT_CHECK(p.tape == &t, "concat_cols: mixed tapes");
    SHUBERT_CHECK(p.rows() == r, "concat_cols: row count mismatch");
    c += p.cols();
    need = need || t.requires_grad(p.id);
  }
  Matrix out(r, c);
  Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.push(std::move(out), need,
                [ps](Tape& t, const Matrix&, const Matrix& g) {
                  Index off = 0;
                  for (const Var& p : ps) {
                    const Index w = t.value(p.id).cols();
                    if (t.requires_grad(p.id)) {
                      t.accumulate(p.id, g.middleCols(off, w));
                    }
                    off += w;
                  }
                });
}

Var concat_rows(std::span<const Var> parts) {
  SHUBERT_CHECK(!parts.empty(), "concat_rows: no inputs");
  Tape& t = *parts[0].tape;
  const Index c = parts[0].cols();
  Index r = 0;
  bool need = false;
  for (const Var& p : parts) {
    SHUBERT_CHECK(p.tape == &t, "concat_rows: mixed tapes");
    SHUBERT_CHECK(p.cols() == c, "concat_rows: column count mismatch");
    r += p.rows();
    need = need || t.requires_grad(p.id);
  }
  Matrix out(r, c);
  Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.push(std::move(out), need,
                [ps](Tape& t, const Matrix&, const Matrix& g) {
                  Index off = 0;
                  for (const Var& p : ps) {
                    const Index h = t.value(p.id).rows();
                    if (t.requires_grad(p.id)) {
                      t.accumulate(p.id, g.middleRows(off, h));
                    }
                    off += h;
                  }
                });
}

Var slice_cols(Var a, Index start, Index count) {
  Tape& t = *a.tape;
  SHUBERT_CHECK(start >= 0 && count >= 0 && start + count <= a.cols(),
                "slice_cols: range out of bounds");
  Matrix out = a.value().middleCols(start, count);
  return t.push(std::move(out), any_grad({a}),
                [a, start, count](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  Matrix ga = Matrix::Zero(av.rows(), av.cols());
                  ga.middleCols(start, count) = g;
                  t.accumulate(a.id, ga);
                });
}

Var slice_rows(Var a, Index start, Index count) {
  Tape& t = *a.tape;
  SHUBERT_CHECK(start >= 0 && count >= 0 && start + count <= a.rows(),
                "slice_rows: range out of bounds");
  Matrix out = a.value().middleRows(start, count);
  return t.push(std::move(out), any_grad({a}),
                [a, start, count](Tape& t, const Matrix&, const Matrix& g) {
                  const Matrix& av = t.value(a.id);
                  Matrix ga = Matrix::Zero(av.rows(), av.cols());
                  ga.middleRows(start, count) = g;
                  t.accumulate(a.id, ga);
                });
}

// ---------------------------------------------------------------------------
// convolution

Var conv1d(Var x, Var weight, Var bias, int kernel, int stride) {
  Tape& t = tape_of(x, weight);
  SHUBERT_CHECK(bias.tape == &t, "conv1d: bias on another tape");
  SHUBERT_CHECK(kernel >= 1 && stride >= 1, "conv1d: bad kernel/stride");
  const Matrix& xv = x.value();
  const Index len = xv.rows();
  const Index cin = xv.cols();
  const Index cout = weight.cols();
  SHUBERT_CHECK(weight.rows() == kernel * cin,
                "conv1d: weight rows must be kernel*Cin");
  SHUBERT_CHECK(bias.rows() == 1 && bias.cols() == cout,
                "conv1d: bias must be 1xCout");
  SHUBERT_CHECK(len >= kernel, "conv1d: input shorter than kernel (" +
                                   std::to_string(len) + " < " +
                                   std::to_string(kernel) + ")");
  const Index frames = (len - kernel) / stride + 1;
  using Patches = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;
  // Row t of the patch matrix is the contiguous span starting at sample
  // t*stride, so no im2col copy is needed.
  Patches patches(xv.data(), frames, kernel * cin,
                  Eigen::OuterStride<>(stride * cin));
  Matrix out;
  out.noalias() = patches * weight.value();
  out.rowwise() += bias.value().row(0);
  return t.push(
      std::move(out), any_grad({x, weight, bias}),
      [x, weight, bias, kernel, stride, frames](Tape& t, const Matrix&,
                                                const Matrix& g) {
        const Matrix& xv = t.value(x.id);
        const Index cin = xv.cols();
        Patches patches(xv.data(), frames, kernel * cin,
                        Eigen::OuterStride<>(stride * cin));
        if (t.requires_grad(weight.id)) {
          Matrix gw;
          gw.noalias() = patches.transpose() * g;
          t.accumulate(weight.id, gw);
        }
        if (t.requires_grad(bias.id)) {
          t.accumulate(bias.id, g.colwise().sum());
        }
        if (t.requires_grad(x.id)) {
          Matrix gp;
          gp.noalias() = g * t.value(weight.id).transpose();
          Matrix gx = Matrix::Zero(xv.rows(), cin);
          for (Index f = 0; f < frames; ++f) {
            Eigen::Map<RowVector> dst(gx.data() + f * stride * cin,
                                      kernel * cin);
            dst += gp.row(f);
          }
          t.accumulate(x.id, gx);
        }
      });
}

// ---------------------------------------------------------------------------
// gradient check

GradReport grad_check(const LossFn& loss_fn, ParameterSet& params, double eps,
                      double tolerance) {
  SHUBERT_CHECK(eps > 0.0, "grad_check: eps must be positive");
  GradReport report;
  report.tolerance = tolerance;

  Gradients analytic = zero_gradients(params);
  {
    Tape tape;
    Var loss = loss_fn(tape);
    if (!std::isfinite(loss.scalar())) {
      report.failure = "non-finite loss at unperturbed parameters";
      return report;
    }
    tape.backward(loss, &analytic);
  }

  auto eval = [&]() {
    Tape tape;
    return loss_fn(tape).scalar();
  };

  bool ok = true;
  for (size_t p = 0; p < params.size(); ++p) {
    Parameter& param = params.at(p);
    ParamGradError err;
    err.name = param.name;
    double* data = param.value.data();
    for (Index i = 0; i < param.value.size(); ++i) {
      const double a = analytic[p].data()[i];
      if (!std::isfinite(a)) {
        report.failure = "non-finite gradient for " + param.name + "[" +
                         std::to_string(i) + "]";
        ok = false;
        break;
      }
      const double orig = data[i];
      data[i] = orig + eps;
      const double f_plus = eval();
      data[i] = orig - eps;
      const double f_minus = eval();
      data[i] = orig;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        report.failure = "non-finite perturbed loss for " + param.name + "[" +
                         std::to_string(i) + "]";
        ok = false;
        break;
      }
      const double n = (f_plus - f_minus) / (2.0 * eps);
      const double rel =
          std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
      if (rel > err.max_rel_error) {
        err.max_rel_error = rel;
        err.worst_index = i;
        err.worst_analytic = a;
        err.worst_numeric = n;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
    report.per_parameter.push_back(std::move(err));
    if (!ok) break;
  }
  report.pass = ok && report.max_rel_error <= tolerance;
  return report;
}

}  // namespace shubert
