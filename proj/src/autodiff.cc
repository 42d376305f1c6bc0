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

#include "ccg/autodiff.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "ccg/errors.h"

namespace ccg::ad {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

thread_local bool grad_mode_enabled = true;

ConstMap AsMatrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void ShapeError(const char* op, const Tensor& a,
                             const Tensor& b) {
  std::ostringstream msg;
  msg << op << ": shape mismatch " << a.ShapeString() << " vs "
      << b.ShapeString();
  throw UsageError(msg.str());
}

// Wraps an operation result, attaching the backward rule when recording.
Var Record(Tensor value, std::vector<Var> parents, BackwardFn backward,
           const char* op) {
  value.CheckFinite(op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  const bool any_grad =
      std::any_of(parents.begin(), parents.end(),
                  [](const Var& p) { return p.requires_grad(); });
  if (any_grad && grad_mode_enabled) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  } else if (any_grad) {
    node->untracked = true;
  }
  return Var(std::move(node));
}

template <typename F>
Tensor Elementwise(const Tensor& a, F f) {
  std::vector<double> out(a.size());
  const auto& in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor(a.rows(), a.cols(), std::move(out));
}

template <typename F>
Tensor Elementwise2(const Tensor& a, const Tensor& b, F f, const char* op) {
  if (!a.SameShape(b)) ShapeError(op, a, b);
  std::vector<double> out(a.size());
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return Tensor(a.rows(), a.cols(), std::move(out));
}

// C = op(A) * op(B) where op is optional transposition.
Var MatMulImpl(const Var& a, const Var& b, bool trans_a, bool trans_b);

Tensor MatMulValue(const Tensor& a, const Tensor& b, bool trans_a,
                   bool trans_b) {
  const std::size_t inner_a = trans_a ? a.rows() : a.cols();
  const std::size_t inner_b = trans_b ? b.cols() : b.rows();
  if (inner_a != inner_b) ShapeError("MatMul", a, b);
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  std::vector<double> out(m * n, 0.0);
  MutMap c(out.data(), static_cast<Eigen::Index>(m),
           static_cast<Eigen::Index>(n));
  const ConstMap ma = AsMatrix(a);
  const ConstMap mb = AsMatrix(b);
  if (!trans_a && !trans_b) {
    c.noalias() = ma * mb;
  } else if (trans_a && !trans_b) {
    c.noalias() = ma.transpose() * mb;
  } else if (!trans_a && trans_b) {
    c.noalias() = ma * mb.transpose();
  } else {
    c.noalias() = ma.transpose() * mb.transpose();
  }
  return Tensor(m, n, std::move(out));
}

Var MatMulImpl(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  if (trans_a && trans_b) {
    // Only reached through Transpose composition; keep the rule simple.
    return Transpose(MatMulImpl(b, a, false, false));
  }
  Tensor value = MatMulValue(a.value(), b.value(), trans_a, trans_b);
  return Record(
      std::move(value), {a, b},
      [a, b, trans_a, trans_b](const Var& g, const Var&) {
        Var ga, gb;
        if (!trans_a && !trans_b) {
          // C = A B
          if (a.requires_grad()) ga = MatMulImpl(g, b, false, true);
          if (b.requires_grad()) gb = MatMulImpl(a, g, true, false);
        } else if (trans_a) {
          // C = A^T B
          if (a.requires_grad()) ga = MatMulImpl(b, g, false, true);
          if (b.requires_grad()) gb = MatMulImpl(a, g, false, false);
        } else {
          // C = A B^T
          if (a.requires_grad()) ga = MatMulImpl(g, b, false, false);
          if (b.requires_grad()) gb = MatMulImpl(g, a, true, false);
        }
        return std::vector<Var>{ga, gb};
      },
      "MatMul");
}

Tensor Mask(const Tensor& a, double lo, double hi, bool strict_lo) {
  return Elementwise(a, [lo, hi, strict_lo](double x) {
    const bool above = strict_lo ? x > lo : x >= lo;
    return above && x <= hi ? 1.0 : 0.0;
  });
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) {
  value.CheckFinite("Var");
  node_ = std::make_shared<Node>();
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Constant(Tensor value) { return Var(std::move(value), false); }
Var Parameter(Tensor value) { return Var(std::move(value), true); }
Var Detach(const Var& x) { return Constant(x.value()); }

bool GradModeEnabled() { return grad_mode_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_mode_enabled) {
  grad_mode_enabled = false;
}
NoGradGuard::~NoGradGuard() { grad_mode_enabled = previous_; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(grad_mode_enabled) {
  grad_mode_enabled = enabled;
}
GradModeGuard::~GradModeGuard() { grad_mode_enabled = previous_; }

Var MatMul(const Var& a, const Var& b) { return MatMulImpl(a, b, false, false); }

Var SparseMatMul(const SparseMatrix& a, const Var& b) {
  return Record(
      a.Multiply(b.value()), {b},
      [a](const Var& g, const Var&) {
        return std::vector<Var>{SparseMatMul(a.Transposed(), g)};
      },
      "SparseMatMul");
}

Var Transpose(const Var& a) {
  const Tensor& v = a.value();
  std::vector<double> out(v.size());
  MutMap(out.data(), static_cast<Eigen::Index>(v.cols()),
         static_cast<Eigen::Index>(v.rows())) = AsMatrix(v).transpose();
  return Record(
      Tensor(v.cols(), v.rows(), std::move(out)), {a},
      [](const Var& g, const Var&) { return std::vector<Var>{Transpose(g)}; },
      "Transpose");
}

Var Add(const Var& a, const Var& b) {
  return Record(
      Elementwise2(a.value(), b.value(), std::plus<>(), "Add"), {a, b},
      [](const Var& g, const Var&) { return std::vector<Var>{g, g}; }, "Add");
}

Var Sub(const Var& a, const Var& b) {
  return Record(
      Elementwise2(a.value(), b.value(), std::minus<>(), "Sub"), {a, b},
      [b](const Var& g, const Var&) {
        return std::vector<Var>{g, b.requires_grad() ? Neg(g) : Var()};
      },
      "Sub");
}

Var Mul(const Var& a, const Var& b) {
  return Record(
      Elementwise2(a.value(), b.value(), std::multiplies<>(), "Mul"), {a, b},
      [a, b](const Var& g, const Var&) {
        return std::vector<Var>{a.requires_grad() ? Mul(g, b) : Var(),
                                b.requires_grad() ? Mul(g, a) : Var()};
      },
      "Mul");
}

Var Div(const Var& a, const Var& b) {
  return Record(
      Elementwise2(a.value(), b.value(), std::divides<>(), "Div"), {a, b},
      [a, b](const Var& g, const Var&) {
        Var ga, gb;
        if (a.requires_grad()) ga = Div(g, b);
        if (b.requires_grad()) gb = Neg(Mul(g, Div(a, Mul(b, b))));
        return std::vector<Var>{ga, gb};
      },
      "Div");
}

Var Scale(const Var& a, double factor) {
  return Record(
      Elementwise(a.value(), [factor](double x) { return x * factor; }), {a},
      [factor](const Var& g, const Var&) {
        return std::vector<Var>{Scale(g, factor)};
      },
      "Scale");
}

Var AddScalar(const Var& a, double offset) {
  return Record(
      Elementwise(a.value(), [offset](double x) { return x + offset; }), {a},
      [](const Var& g, const Var&) { return std::vector<Var>{g}; },
      "AddScalar");
}

Var Neg(const Var& a) { return Scale(a, -1.0); }

Var Log(const Var& a) {
  return Record(
      Elementwise(a.value(), [](double x) { return std::log(x); }), {a},
      [a](const Var& g, const Var&) { return std::vector<Var>{Div(g, a)}; },
      "Log");
}

Var Relu(const Var& a) {
  return Record(
      Elementwise(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
      [a](const Var& g, const Var&) {
        return std::vector<Var>{
            Mul(g, Constant(Mask(a.value(), 0.0, HUGE_VAL, true)))};
      },
      "Relu");
}

Var Sigmoid(const Var& a) {
  // Logits are limited to +-36 so the result stays strictly inside (0,1).
  static constexpr double kLimit = 36.0;
  Tensor value = Elementwise(a.value(), [](double x) {
    x = std::clamp(x, -kLimit, kLimit);
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return Record(
      std::move(value), {a},
      [](const Var& g, const Var& self) {
        return std::vector<Var>{Mul(g, Mul(self, AddScalar(Neg(self), 1.0)))};
      },
      "Sigmoid");
}

Var Clamp(const Var& a, double lo, double hi) {
  if (!(lo <= hi)) throw UsageError("Clamp: lo > hi");
  return Record(
      Elementwise(a.value(), [lo, hi](double x) { return std::clamp(x, lo, hi); }),
      {a},
      [a, lo, hi](const Var& g, const Var&) {
        return std::vector<Var>{
            Mul(g, Constant(Mask(a.value(), lo, hi, false)))};
      },
      "Clamp");
}

Var Sum(const Var& a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  return Record(
      Tensor::Scalar(total), {a},
      [rows, cols](const Var& g, const Var&) {
        return std::vector<Var>{ExpandScalar(g, rows, cols)};
      },
      "Sum");
}

Var Mean(const Var& a) {
  if (a.value().size() == 0) throw UsageError("Mean of empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var Dot(const Var& a, const Var& b) { return Sum(Mul(a, b)); }

Var ExpandScalar(const Var& scalar, std::size_t rows, std::size_t cols) {
  const double v = scalar.value().item();
  return Record(
      Tensor(rows, cols, v), {scalar},
      [](const Var& g, const Var&) { return std::vector<Var>{Sum(g)}; },
      "ExpandScalar");
}

Var AddRow(const Var& a, const Var& row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) ShapeError("AddRow", av, rv);
  std::vector<double> out(av.data());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out[r * av.cols() + c] += rv[c];
  }
  return Record(
      Tensor(av.rows(), av.cols(), std::move(out)), {a, row},
      [row](const Var& g, const Var&) {
        return std::vector<Var>{g, row.requires_grad() ? SumRows(g) : Var()};
      },
      "AddRow");
}

Var SumRows(const Var& a) {
  const Tensor& av = a.value();
  std::vector<double> out(av.cols(), 0.0);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out[c] += av(r, c);
  }
  const std::size_t rows = av.rows();
  return Record(
      Tensor(1, av.cols(), std::move(out)), {a},
      [rows](const Var& g, const Var&) {
        return std::vector<Var>{BroadcastRows(g, rows)};
      },
      "SumRows");
}

Var BroadcastRows(const Var& row, std::size_t rows) {
  const Tensor& rv = row.value();
  if (rv.rows() != 1) throw UsageError("BroadcastRows: expected a row vector");
  std::vector<double> out;
  out.reserve(rows * rv.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    out.insert(out.end(), rv.data().begin(), rv.data().end());
  }
  return Record(
      Tensor(rows, rv.cols(), std::move(out)), {row},
      [](const Var& g, const Var&) { return std::vector<Var>{SumRows(g)}; },
      "BroadcastRows");
}

Var ConcatCols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) ShapeError("ConcatCols", av, bv);
  const std::size_t ca = av.cols();
  const std::size_t cb = bv.cols();
  std::vector<double> out(av.rows() * (ca + cb));
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data().begin() + r * ca, ca, out.begin() + r * (ca + cb));
    std::copy_n(bv.data().begin() + r * cb, cb,
                out.begin() + r * (ca + cb) + ca);
  }
  return Record(
      Tensor(av.rows(), ca + cb, std::move(out)), {a, b},
      [a, b, ca, cb](const Var& g, const Var&) {
        return std::vector<Var>{
            a.requires_grad() ? SliceCols(g, 0, ca) : Var(),
            b.requires_grad() ? SliceCols(g, ca, ca + cb) : Var()};
      },
      "ConcatCols");
}

Var SliceCols(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  if (begin > end || end > av.cols()) {
    throw UsageError("SliceCols: range out of bounds for " + av.ShapeString());
  }
  const std::size_t width = end - begin;
  std::vector<double> out(av.rows() * width);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data().begin() + r * av.cols() + begin, width,
                out.begin() + r * width);
  }
  const std::size_t total = av.cols();
  return Record(
      Tensor(av.rows(), width, std::move(out)), {a},
      [begin, total](const Var& g, const Var&) {
        return std::vector<Var>{PadCols(g, begin, total)};
      },
      "SliceCols");
}

Var PadCols(const Var& a, std::size_t left, std::size_t total) {
  const Tensor& av = a.value();
  if (left + av.cols() > total) throw UsageError("PadCols: too narrow");
  std::vector<double> out(av.rows() * total, 0.0);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.data().begin() + r * av.cols(), av.cols(),
                out.begin() + r * total + left);
  }
  const std::size_t width = av.cols();
  return Record(
      Tensor(av.rows(), total, std::move(out)), {a},
      [left, width](const Var& g, const Var&) {
        return std::vector<Var>{SliceCols(g, left, left + width)};
      },
      "PadCols");
}

Var BinaryCrossEntropy(const Var& prediction, const Tensor& target) {
  const Tensor& p = prediction.value();
  if (!p.SameShape(target)) ShapeError("BinaryCrossEntropy", p, target);
  for (double y : target.data()) {
    if (y != 0.0 && y != 1.0) {
      throw UsageError("BinaryCrossEntropy: targets must be 0 or 1");
    }
  }
  for (double x : p.data()) {
    if (x < 0.0 || x > 1.0) {
      throw UsageError("BinaryCrossEntropy: prediction outside [0,1]");
    }
  }
  const Var clamped = Clamp(prediction, kBceEpsilon, 1.0 - kBceEpsilon);
  const Var y = Constant(target);
  const Var one_minus_y = Constant(
      Elementwise(target, [](double v) { return 1.0 - v; }));
  return Neg(Add(Mul(y, Log(clamped)),
                 Mul(one_minus_y, Log(AddScalar(Neg(clamped), 1.0)))));
}

std::vector<Var> Grad(const Var& output, std::span<const Var> inputs,
                      bool create_graph) {
  if (!output.defined()) throw UsageError("Grad: undefined output");
  if (!output.value().is_scalar()) {
    throw UsageError("Grad: output must be scalar, got " +
                     output.value().ShapeString());
  }
  if (output.node()->untracked) {
    throw UsageError(
        "Grad: output is not connected to the tape (computed with recording "
        "disabled)");
  }

  std::unordered_map<const Node*, Var> grads;
  if (output.requires_grad()) {
    // Post-order DFS over gradient-requiring nodes.
    std::vector<std::shared_ptr<Node>> order;
    std::unordered_set<const Node*> visited;
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    stack.emplace_back(output.shared_node(), 0);
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        const Var& parent = node->parents[next++];
        if (parent.requires_grad() && visited.insert(parent.node()).second) {
          stack.emplace_back(parent.shared_node(), 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }

    GradModeGuard mode(create_graph);
    grads[output.node()] = Constant(Tensor::Scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const std::shared_ptr<Node>& node = *it;
      auto found = grads.find(node.get());
      if (found == grads.end() || !node->backward) continue;
      const Var self(node);
      std::vector<Var> parent_grads = node->backward(found->second, self);
      for (std::size_t k = 0; k < node->parents.size(); ++k) {
        const Var& parent = node->parents[k];
        if (!parent.requires_grad() || k >= parent_grads.size() ||
            !parent_grads[k].defined()) {
          continue;
        }
        auto [slot, inserted] = grads.try_emplace(parent.node(), parent_grads[k]);
        if (!inserted) slot->second = Add(slot->second, parent_grads[k]);
      }
    }
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const Var& input : inputs) {
    auto found = input.defined() ? grads.find(input.node()) : grads.end();
    if (found != grads.end()) {
      result.push_back(found->second);
    } else {
      result.push_back(Constant(Tensor(input.rows(), input.cols(), 0.0)));
    }
  }
  return result;
}

void ParamSet::Set(const std::string& name, Tensor value) {
  entries_[name] = Parameter(std::move(value));
}

void ParamSet::SetVar(const std::string& name, Var var) {
  entries_[name] = std::move(var);
}

const Var& ParamSet::Get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamSet::Names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& [name, var] : entries_) names.push_back(name);
  return names;
}

std::vector<Var> ParamSet::Vars() const {
  std::vector<Var> vars;
  vars.reserve(entries_.size());
  for (const auto& [name, var] : entries_) vars.push_back(var);
  return vars;
}

std::size_t ParamSet::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& [name, var] : entries_) n += var.value().size();
  return n;
}

std::vector<double> ParamSet::Flatten() const {
  std::vector<double> flat;
  flat.reserve(ParameterCount());
  for (const auto& [name, var] : entries_) {
    const auto& d = var.value().data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

ParamSet ParamSet::Unflatten(std::span<const double> flat) const {
  if (flat.size() != ParameterCount()) {
    std::ostringstream msg;
    msg << "Unflatten: expected " << ParameterCount() << " values, got "
        << flat.size();
    throw UsageError(msg.str());
  }
  ParamSet out;
  std::size_t offset = 0;
  for (const auto& [name, var] : entries_) {
    const std::size_t n = var.value().size();
    out.Set(name, Tensor(var.rows(), var.cols(),
                         std::vector<double>(flat.begin() + offset,
                                             flat.begin() + offset + n)));
    offset += n;
  }
  return out;
}

ParamSet ParamSet::FreshLeaves() const {
  ParamSet out;
  for (const auto& [name, var] : entries_) out.Set(name, var.value());
  return out;
}

ParamSet ParamSet::Constants() const {
  ParamSet out;
  for (const auto& [name, var] : entries_) {
    out.SetVar(name, Constant(var.value()));
  }
  return out;
}

ParamSet Backward(const Var& loss, const ParamSet& params) {
  const std::vector<Var> vars = params.Vars();
  const std::vector<Var> grads = Grad(loss, vars, false);
  ParamSet out;
  std::size_t k = 0;
  for (const auto& name : params.Names()) {
    out.SetVar(name, Constant(grads[k++].value()));
  }
  return out;
}

namespace {

// Sum_k <grads[k], v_k> with v sliced according to the shapes of `grads`.
Var ContractWith(const std::vector<Var>& grads, std::span<const double> v) {
  Var total;
  std::size_t offset = 0;
  for (const Var& g : grads) {
    const std::size_t n = g.value().size();
    Tensor slice(g.rows(), g.cols(),
                 std::vector<double>(v.begin() + offset, v.begin() + offset + n));
    offset += n;
    Var term = Dot(g, Constant(std::move(slice)));
    total = total.defined() ? Add(total, term) : term;
  }
  return total.defined() ? total : Constant(Tensor::Scalar(0.0));
}

std::vector<double> FlattenGrads(const std::vector<Var>& grads,
                                 const char* context) {
  std::vector<double> flat;
  for (const Var& g : grads) {
    g.value().CheckFinite(context);
    flat.insert(flat.end(), g.value().data().begin(), g.value().data().end());
  }
  return flat;
}

}  // namespace

std::vector<double> Hvp(const LossFn& loss_fn, const ParamSet& params,
                        std::span<const double> v) {
  if (v.size() != params.ParameterCount()) {
    std::ostringstream msg;
    msg << "Hvp: vector length " << v.size() << " != parameter count "
        << params.ParameterCount();
    throw UsageError(msg.str());
  }
  GradModeGuard recording(true);
  const ParamSet leaves = params.FreshLeaves();
  const std::vector<Var> vars = leaves.Vars();
  const Var loss = loss_fn(leaves);
  const std::vector<Var> grads = Grad(loss, vars, /*create_graph=*/true);
  const Var contracted = ContractWith(grads, v);
  return FlattenGrads(Grad(contracted, vars, false), "Hvp");
}

std::vector<double> MixedVjp(const CoupledLossFn& loss_fn,
                             const ParamSet& theta, const ParamSet& omega,
                             std::span<const double> v) {
  if (v.size() != theta.ParameterCount()) {
    std::ostringstream msg;
    msg << "MixedVjp: vector length " << v.size()
        << " != theta parameter count " << theta.ParameterCount();
    throw UsageError(msg.str());
  }
  GradModeGuard recording(true);
  const ParamSet theta_leaves = theta.FreshLeaves();
  const ParamSet omega_leaves = omega.FreshLeaves();
  const std::vector<Var> theta_vars = theta_leaves.Vars();
  const std::vector<Var> omega_vars = omega_leaves.Vars();
  const Var loss = loss_fn(theta_leaves, omega_leaves);
  const std::vector<Var> grads = Grad(loss, theta_vars, /*create_graph=*/true);
  const Var contracted = ContractWith(grads, v);
  return FlattenGrads(Grad(contracted, omega_vars, false), "MixedVjp");
}

}  // namespace ccg::ad
