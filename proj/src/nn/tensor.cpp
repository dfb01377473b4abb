// Copyright 2026 The comae-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "comae/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "comae/error.hpp"

namespace comae::nn {

Tensor Tensor::from_values(std::size_t rows, std::size_t cols,
                           std::vector<double> values) {
  if (values.size() != rows * cols) {
    throw DataError("tensor shape " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " does not match " +
                    std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.rows_ = rows;
  t.cols_ = cols;
  t.values_ = std::move(values);
  if (!t.all_finite()) throw DataError("tensor contains non-finite values");
  return t;
}

Tensor Tensor::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return from_values(1, n, std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace comae::nn
