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

#include "comae/nn/tape.hpp"

#include "comae/error.hpp"

namespace comae::nn {

Var GradientTape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}});
  return Var{this, nodes_.size() - 1};
}

Var GradientTape::record(Tensor value, BackwardFn backward) {
  if (!recording_) backward = nullptr;
  nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
  return Var{this, nodes_.size() - 1};
}

Tensor& GradientTape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.size() != node.value.size()) {
    node.grad = Tensor(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Tensor& GradientTape::param_grad(const Parameter& p) {
  auto [it, inserted] = param_grads_.try_emplace(&p);
  if (inserted) it->second = Tensor(p.value.rows(), p.value.cols());
  return it->second;
}

const Tensor* GradientTape::find_param_grad(const Parameter& p) const {
  auto it = param_grads_.find(&p);
  return it == param_grads_.end() ? nullptr : &it->second;
}

void GradientTape::backward(Var output) {
  if (!recording_) throw UsageError("backward() on a non-recording tape");
  if (output.tape != this) throw UsageError("backward(): foreign variable");
  if (value(output.id).size() != 1) {
    throw UsageError("backward() requires a scalar output");
  }
  grad(output.id)(0, 0) += 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && !node.grad.empty()) node.backward(*this, i);
  }
}

}  // namespace comae::nn
