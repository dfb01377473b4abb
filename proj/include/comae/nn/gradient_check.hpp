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

#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "comae/nn/tape.hpp"

namespace comae::nn {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  // Parameter and flat element index where the maximum occurred.
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Compares tape gradients with central differences for every element of
// every listed parameter. The relative error of one element is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// loss_fn builds the scalar loss on the tape it is given and must be
// deterministic; it is called with a non-recording tape for the numeric
// side. The parameters are perturbed in place and restored.
GradientCheckResult gradient_check(
    const std::function<Var(GradientTape&)>& loss_fn,
    std::span<Parameter* const> params, double epsilon);

}  // namespace comae::nn
