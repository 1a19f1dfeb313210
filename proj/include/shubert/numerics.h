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

// Compact reverse-mode differentiation over dense row-major matrices.
//
// A Tape records one forward pass. Every operation appends a node holding
// its value and a closure that maps the node's output gradient onto its
// inputs. Tape::backward walks the nodes in reverse creation order, which is
// a valid topological order because inputs always precede outputs.
//
// All values are 2-D (scalars are 1x1, vectors 1xN). A tape is confined to a
// single thread; parameters are shared read-only and their gradients are
// collected into a caller-owned Gradients buffer.

#ifndef SHUBERT_NUMERICS_H_
#define SHUBERT_NUMERICS_H_

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shubert/common.h"

namespace shubert {

struct Parameter {
  std::string name;
  Matrix value;
  int index = -1;  // position inside the owning ParameterSet
};

// Ordered, name-addressable collection of trainable matrices. Iteration order
// is insertion order, which is also the checkpoint order.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& add(const std::string& name, Matrix init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  size_t size() const { return params_.size(); }
  Parameter& at(size_t i) { return *params_[i]; }
  const Parameter& at(size_t i) const { return *params_[i]; }
  size_t num_scalars() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, size_t, std::less<>> by_name_;
};

// One gradient matrix per parameter, same shapes, indexed like the set.
using Gradients = std::vector<Matrix>;
Gradients zero_gradients(const ParameterSet& params);
void add_gradients(Gradients& into, const Gradients& from);
double global_norm(const Gradients& grads);

class Tape;

// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_value,
                                        const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Differentiable input that is not a parameter; its gradient can be read
  // back with grad() after backward().
  Var input(Matrix value);
  // Leaf for a parameter. Repeated calls return the same node, so every use
  // of a parameter within one pass shares one graph identity.
  Var param(const Parameter& p);

  // Appends a computed node. `backward` may be empty when no input requires
  // a gradient.
  Var push(Matrix value, bool requires_grad, BackwardFn backward);

  // Seeds d(loss)/d(loss)=1 and propagates. Parameter gradients are added into
  // `grads` when it is non-null.
  void backward(Var loss, Gradients* grads);

  const Matrix& value(int id) const { return nodes_[id].value; }
  // Gradient of a node after backward(); empty matrix when it received none.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    int param_index = -1;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  std::vector<int> param_nodes_;  // parameter index -> node id
};

inline const Matrix& Var::value() const { return tape->value(id); }

// ---- differentiable primitives ----
// Binary elementwise ops broadcast a 1xC, Rx1 or 1x1 operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var matmul_tn(Var a, Var b);  // a^T * b
Var transpose(Var a);

Var gelu(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);

Var sum(Var a);        // -> 1x1
Var mean(Var a);       // -> 1x1
Var sum_rows(Var a);   // column sums -> 1xC
Var mean_rows(Var a);  // mean pooling over rows -> 1xC
Var row_mean(Var a);   // -> Rx1
Var row_var(Var a);    // population variance per row -> Rx1

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
// (x - mean) / sqrt(var + eps) per row, fused.
Var normalize_rows_moments(Var a, double eps);
// x / max(||x||, floor) per row / per column.
Var l2_normalize_rows(Var a, double floor);
Var l2_normalize_cols(Var a, double floor);
// Pairwise cosine similarity between rows of a and rows of b -> Ra x Rb.
Var cosine_similarity(Var a, Var b, double floor);
// Column cross-correlation a^T b / (|a_i| |b_j|) with column norms floored at
// `floor`. When a == b the diagonal is exactly 1 for every unfloored column.
Var column_correlation(Var a, Var b, double floor);

Var gather_rows(Var a, std::span<const int> rows);
// Copy of `a` with the listed rows overwritten by the 1xC vector `row`.
Var replace_rows(Var a, std::span<const int> rows, Var row);
// Elements a(rows[i], cols[i]) as an Nx1 column.
Var pick(Var a, std::span<const int> rows, std::span<const int> cols);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index count);
Var slice_rows(Var a, Index start, Index count);

// Strided 1-D convolution, time-major. x: L x Cin, weight: (kernel*Cin) x
// Cout laid out tap-major, bias: 1 x Cout. Output rows:
// floor((L - kernel) / stride) + 1.
Var conv1d(Var x, Var weight, Var bias, int kernel, int stride);

// ---- gradient verification ----
struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradReport {
  std::vector<ParamGradError> per_parameter;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  // Set when a loss or gradient was non-finite.
  std::string failure;
};

// Builds the loss graph on the supplied tape; must read parameters through
// Tape::param so gradients reach them.
using LossFn = std::function<Var(Tape&)>;

// Central-difference check of every scalar in `params`. Relative error is
// |a - n| / max(|a|, |n|, 1e-8).
GradReport grad_check(const LossFn& loss_fn, ParameterSet& params, double eps,
                      double tolerance = 1e-4);

}  // namespace shubert

#endif  // SHUBERT_NUMERICS_H_
