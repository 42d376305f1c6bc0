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

#include "ccg/tensor.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "ccg/errors.h"

namespace ccg {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) {
    throw NumericError("non-finite value produced by Tensor(fill)");
  }
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream msg;
    msg << "Tensor data length " << data_.size() << " does not match shape ["
        << rows_ << "," << cols_ << "]";
    throw UsageError(msg.str());
  }
  CheckFinite("Tensor(data)");
}

Tensor Tensor::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw UsageError("FromRows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::Scalar(double value) { return Tensor(1, 1, {value}); }

Tensor Tensor::Column(std::span<const double> values) {
  return Tensor(values.size(), 1, {values.begin(), values.end()});
}

Tensor Tensor::Row(std::span<const double> values) {
  return Tensor(1, values.size(), {values.begin(), values.end()});
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw UsageError("item() on non-scalar tensor of shape " + ShapeString());
  }
  return data_[0];
}

std::string Tensor::ShapeString() const {
  std::ostringstream out;
  out << "[" << rows_ << "," << cols_ << "]";
  return out.str();
}

void Tensor::CheckFinite(const char* context) const {
  // A double is NaN or Inf exactly when all exponent bits are set.
  constexpr std::uint64_t kExponent = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : data_) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    bad |= static_cast<std::uint64_t>((bits & kExponent) == kExponent);
  }
  if (bad != 0) {
    throw NumericError(std::string("non-finite value produced by ") + context);
  }
}

SparseMatrix::SparseMatrix()
    : m_(std::make_shared<Csr>(Csr{0, 0, {0}, {}, {}})), t_(m_) {}

SparseMatrix SparseMatrix::FromDense(const Tensor& dense) {
  Csr m;
  m.rows = dense.rows();
  m.cols = dense.cols();
  m.row_begin.reserve(m.rows + 1);
  m.row_begin.push_back(0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (dense(r, c) != 0.0) {
        m.col.push_back(c);
        m.values.push_back(dense(r, c));
      }
    }
    m.row_begin.push_back(m.col.size());
  }
  auto t = std::make_shared<const Csr>(Transpose(m));
  return SparseMatrix(std::make_shared<const Csr>(std::move(m)), std::move(t));
}

SparseMatrix::Csr SparseMatrix::Transpose(const Csr& m) {
  Csr t;
  t.rows = m.cols;
  t.cols = m.rows;
  t.row_begin.assign(t.rows + 1, 0);
  for (std::size_t c : m.col) ++t.row_begin[c + 1];
  for (std::size_t r = 0; r < t.rows; ++r) t.row_begin[r + 1] += t.row_begin[r];
  t.col.resize(m.col.size());
  t.values.resize(m.values.size());
  std::vector<std::size_t> next(t.row_begin.begin(), t.row_begin.end() - 1);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t k = m.row_begin[r]; k < m.row_begin[r + 1]; ++k) {
      const std::size_t slot = next[m.col[k]]++;
      t.col[slot] = r;
      t.values[slot] = m.values[k];
    }
  }
  return t;
}

Tensor SparseMatrix::Multiply(const Tensor& dense) const {
  if (dense.rows() != m_->cols) {
    throw UsageError("SparseMatrix::Multiply: shape mismatch " +
                     std::to_string(m_->rows) + "x" + std::to_string(m_->cols) +
                     " vs " + dense.ShapeString());
  }
  const std::size_t n = dense.cols();
  std::vector<double> out(m_->rows * n, 0.0);
  const std::vector<double>& b = dense.data();
  for (std::size_t r = 0; r < m_->rows; ++r) {
    double* row = out.data() + r * n;
    for (std::size_t k = m_->row_begin[r]; k < m_->row_begin[r + 1]; ++k) {
      const double v = m_->values[k];
      const double* src = b.data() + m_->col[k] * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += v * src[j];
    }
  }
  return Tensor(m_->rows, n, std::move(out));
}

Tensor SparseMatrix::ToDense() const {
  Tensor out(m_->rows, m_->cols, 0.0);
  for (std::size_t r = 0; r < m_->rows; ++r) {
    for (std::size_t k = m_->row_begin[r]; k < m_->row_begin[r + 1]; ++k) {
      out(r, m_->col[k]) = m_->values[k];
    }
  }
  return out;
}

}  // namespace ccg
