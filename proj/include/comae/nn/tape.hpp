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
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>

#include "comae/nn/tensor.hpp"

namespace comae::nn {

// A named trainable tensor. Gradients never live on the parameter itself;
// each GradientTape accumulates its own, so forward passes over shared
// parameters stay read-only.
struct Parameter {
  std::string name;
  Tensor value;
};

class GradientTape;

// Handle to a node on a tape.
struct Var {
  GradientTape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

// Records forward operations so that backward() can produce the gradient of
// a scalar output with respect to every node and every touched Parameter.
// With recording disabled the tape only carries values (inference mode).
class GradientTape {
 public:
  using BackwardFn = std::function<void(GradientTape&, std::size_t self)>;

  explicit GradientTape(bool recording = true) : recording_(recording) {}
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  bool recording() const noexcept { return recording_; }

  Var constant(Tensor value);
  Var record(Tensor value, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Zero-initialised on first access.
  Tensor& grad(std::size_t id);
  Tensor& param_grad(const Parameter& p);
  // nullptr when the parameter received no gradient.
  const Tensor* find_param_grad(const Parameter& p) const;

  // Seeds d(output)/d(output) = 1 and replays the tape in reverse.
  // output must be 1 x 1.
  void backward(Var output);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, Tensor> param_grads_;
  bool recording_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace comae::nn
