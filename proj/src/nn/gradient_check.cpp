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

#include "comae/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "comae/error.hpp"

namespace comae::nn {

GradientCheckResult gradient_check(
    const std::function<Var(GradientTape&)>& loss_fn,
    std::span<Parameter* const> params, double epsilon) {
  if (!(epsilon > 0.0)) throw UsageError("gradient_check: epsilon must be > 0");

  GradientTape tape;
  Var loss = loss_fn(tape);
  tape.backward(loss);

  auto evaluate = [&]() {
    GradientTape probe(false);
    return loss_fn(probe).scalar();
  };

  GradientCheckResult result;
  for (Parameter* p : params) {
    const Tensor* analytic = tape.find_param_grad(*p);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double& w = p->value.data()[i];
      const double saved = w;
      w = saved + epsilon;
      const double up = evaluate();
      w = saved - epsilon;
      const double down = evaluate();
      w = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic ? analytic->data()[i] : 0.0;
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace comae::nn
