/*
 * Copyright 2026 The CCG Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef CCG_AUTODIFF_H_
#define CCG_AUTODIFF_H_

// Reverse-mode differentiation over Tensor values.
//
// Operations on Vars record a node (parents + backward rule) whenever gradient
// recording is enabled and at least one input requires a gradient. Backward
// rules are themselves written in terms of recorded operations, so running
// Grad() with create_graph=true yields gradients that can be differentiated
// again. Hvp() and MixedVjp() are built on that (reverse-over-reverse).
//
// The tape is implicit in the node graph and is rebuilt on every forward
// pass. Recording state is thread-local; a graph must stay on one thread.

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccg/tensor.h"

namespace ccg::ad {

class Var;

using BackwardFn =
    std::function<std::vector<Var>(const Var& grad, const Var& self)>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  // Produced by an operation on gradient-requiring inputs while recording
  // was disabled; such a value cannot be differentiated.
  bool untracked = false;
  std::vector<Var> parents;
  BackwardFn backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  // True when the producing operation was recorded.
  bool has_record() const { return node_ && static_cast<bool>(node_->backward); }
  const Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared_node() const { return node_; }

  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  std::shared_ptr<Node> node_;
};

Var Constant(Tensor value);
Var Parameter(Tensor value);
// Same value, no link to the producing graph.
Var Detach(const Var& x);

bool GradModeEnabled();

// Disables recording for the enclosing scope (restores the previous state).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

// Primitive operations. Shape mismatches raise UsageError.
Var MatMul(const Var& a, const Var& b);
// Constant sparse left factor times a dense variable.
Var SparseMatMul(const SparseMatrix& a, const Var& b);
Var Transpose(const Var& a);
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Div(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);
Var AddScalar(const Var& a, double offset);
Var Neg(const Var& a);
Var Log(const Var& a);
Var Relu(const Var& a);
Var Sigmoid(const Var& a);
Var Clamp(const Var& a, double lo, double hi);
// Sum of all elements, as a 1x1 tensor.
Var Sum(const Var& a);
Var Mean(const Var& a);
Var Dot(const Var& a, const Var& b);
// 1x1 -> rows x cols filled with the scalar.
Var ExpandScalar(const Var& scalar, std::size_t rows, std::size_t cols);
// [m,n] + [1,n] broadcast over rows.
Var AddRow(const Var& a, const Var& row);
// [m,n] -> [1,n].
Var SumRows(const Var& a);
// [1,n] -> [rows,n].
Var BroadcastRows(const Var& row, std::size_t rows);
Var ConcatCols(const Var& a, const Var& b);
// Columns [begin, end).
Var SliceCols(const Var& a, std::size_t begin, std::size_t end);
// Places `a` at column offset `left` inside a zero matrix `total` wide.
Var PadCols(const Var& a, std::size_t left, std::size_t total);

inline constexpr double kBceEpsilon = 1e-7;

// Elementwise binary cross-entropy. Predictions are clamped to
// [kBceEpsilon, 1 - kBceEpsilon]; targets must be 0 or 1 and carry no
// gradient.
Var BinaryCrossEntropy(const Var& prediction, const Tensor& target);

// Gradients of `output` (which must be 1x1) with respect to `inputs`.
// Inputs absent from the graph receive zeros. With create_graph the returned
// gradients are themselves recorded and may be differentiated again.
std::vector<Var> Grad(const Var& output, std::span<const Var> inputs,
                      bool create_graph = false);

// Named collection of parameter tensors, flattened in lexicographic name
// order.
class ParamSet {
 public:
  ParamSet() = default;

  // Adds or replaces `name` as a fresh gradient-requiring leaf.
  void Set(const std::string& name, Tensor value);
  // Stores `var` as is (no copy, keeps its graph links).
  void SetVar(const std::string& name, Var var);

  const Var& Get(const std::string& name) const;
  const Tensor& Value(const std::string& name) const {
    return Get(name).value();
  }
  bool Contains(const std::string& name) const {
    return entries_.count(name) > 0;
  }

  std::vector<std::string> Names() const;
  std::vector<Var> Vars() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t ParameterCount() const;

  std::vector<double> Flatten() const;
  // New ParamSet with this set's names and shapes filled from `flat`.
  ParamSet Unflatten(std::span<const double> flat) const;
  // Copies values into fresh leaves, detaching from any previous graph.
  ParamSet FreshLeaves() const;
  // Copies values into constants (no gradient).
  ParamSet Constants() const;

  const std::map<std::string, Var>& entries() const { return entries_; }

 private:
  std::map<std::string, Var> entries_;
};

using LossFn = std::function<Var(const ParamSet&)>;
using CoupledLossFn = std::function<Var(const ParamSet&, const ParamSet&)>;

// d loss / d params; parameters absent from the graph get zeros.
ParamSet Backward(const Var& loss, const ParamSet& params);

// Hessian-vector product of loss_fn at params, by double backward.
std::vector<double> Hvp(const LossFn& loss_fn, const ParamSet& params,
                        std::span<const double> v);

// v^T d^2 L / (d theta d omega), returned as a flat vector over omega.
std::vector<double> MixedVjp(const CoupledLossFn& loss_fn,
                             const ParamSet& theta, const ParamSet& omega,
                             std::span<const double> v);

}  // namespace ccg::ad

#endif  // CCG_AUTODIFF_H_
