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

#ifndef CCG_TENSOR_H_
#define CCG_TENSOR_H_

#include <array>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ccg {

// Dense row-major matrix of doubles. Scalars are 1x1, vectors are 1xn or nx1.
//
// Every tensor produced by a public constructor or operation holds finite
// values only; violations raise NumericError.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Row-major nested initializer, e.g. Tensor::FromRows({{1, 2}, {3, 4}}).
  static Tensor FromRows(
      std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Scalar(double value);
  static Tensor Column(std::span<const double> values);
  static Tensor Row(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Value of a 1x1 tensor.
  double item() const;

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& mutable_data() { return data_; }

  bool SameShape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string ShapeString() const;

  // Throws NumericError naming `context` when any element is NaN or Inf.
  void CheckFinite(const char* context) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Immutable sparse matrix in compressed-row form. The transpose is built once
// at construction, so Transposed() is free.
class SparseMatrix {
 public:
  SparseMatrix();
  // Keeps the nonzero entries of `dense`.
  static SparseMatrix FromDense(const Tensor& dense);

  std::size_t rows() const { return m_->rows; }
  std::size_t cols() const { return m_->cols; }
  std::size_t nonzeros() const { return m_->values.size(); }

  SparseMatrix Transposed() const { return SparseMatrix(t_, m_); }
  // this * dense.
  Tensor Multiply(const Tensor& dense) const;
  Tensor ToDense() const;

 private:
  struct Csr {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_begin;  // rows + 1 entries
    std::vector<std::size_t> col;
    std::vector<double> values;
  };
  SparseMatrix(std::shared_ptr<const Csr> m, std::shared_ptr<const Csr> t)
      : m_(std::move(m)), t_(std::move(t)) {}
  static Csr Transpose(const Csr& m);

  std::shared_ptr<const Csr> m_;
  std::shared_ptr<const Csr> t_;
};

}  // namespace ccg

#endif  // CCG_TENSOR_H_
