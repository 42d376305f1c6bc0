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


#ifndef CCG_TESTS_TEST_UTIL_H_
#define CCG_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ccg/autodiff.h"
#include "ccg/tensor.h"

namespace ccg::testing {

// ||a - b|| / max(||b||, floor).
inline double RelativeError(std::span<const double> a,
                            std::span<const double> b, double floor = 1e-8) {
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), floor);
}

// Central differences of a scalar function of a flat vector.
inline std::vector<double> FiniteDifference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Finite-difference gradient of loss_fn over a ParamSet.
inline std::vector<double> FiniteDifference(const ad::LossFn& loss_fn,
                                            const ad::ParamSet& params,
                                            double h = 1e-5) {
  return FiniteDifference(
      [&](const std::vector<double>& flat) {
        ad::NoGradGuard no_grad;
        return loss_fn(params.Unflatten(flat).Constants()).value().item();
      },
      params.Flatten(), h);
}

inline Tensor RandomTensor(std::size_t rows, std::size_t cols,
                           std::mt19937_64& rng, double lo = -1.0,
                           double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(rows * cols);
  for (double& x : data) x = dist(rng);
  return Tensor(rows, cols, std::move(data));
}

inline std::vector<double> RandomVector(std::size_t n, std::mt19937_64& rng) {
  return RandomTensor(1, n, rng).data();
}

}  // namespace ccg::testing

#endif  // CCG_TESTS_TEST_UTIL_H_
