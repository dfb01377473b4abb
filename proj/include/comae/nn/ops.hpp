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
#include <span>
#include <vector>

#include "comae/nn/tape.hpp"

namespace comae::nn {

// ---------------------------------------------------------------------------
// Plain-vector primitives (no tape).

// Max-subtracted softmax. Throws DataError on empty or non-finite input.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
// -ln softmax(logits)[target]. Throws DataError if target is out of range.
double cross_entropy_from_logits(std::span<const double> logits,
                                 std::size_t target);
std::size_t argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// Differentiable operations. All tensors are matrices; vectors are 1 x n.

// Whole parameter as a tape node.
Var parameter(GradientTape& tape, const Parameter& p);
// Rows of an embedding table, one per id.
Var embedding(GradientTape& tape, const Parameter& table,
              std::span<const int> ids);

// a + b. b may be 1 x cols, in which case it is added to every row of a.
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var tanh(Var a);
// tanh approximation used by GPT-2.
Var gelu(Var a);

// x [T, in] * w [in, out] (+ bias [1, out]).
Var linear(Var x, const Parameter& w, const Parameter* bias);
// x [T, d] * table^T, table [V, d]. Used wherever an embedding table doubles
// as an output projection.
Var tied_projection(Var x, const Parameter& table);
Var layer_norm(Var x, const Parameter& gain, const Parameter& bias,
               double eps = 1e-5);
// qkv [T, 3d] laid out as [q | k | v]; returns [T, d]. Position t attends
// to positions <= t only.
Var causal_self_attention(Var qkv, std::size_t heads);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var select_rows(Var a, std::size_t first, std::size_t count);
Var mean_rows(Var a);

// Sum over rows of -ln softmax(logits[r])[targets[r]]; 1 x 1.
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace comae::nn
