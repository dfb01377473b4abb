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
#include <string>
#include <vector>

#include "comae/nn/ops.hpp"
#include "comae/nn/rng.hpp"
#include "comae/nn/tape.hpp"

namespace comae::nn {

struct DecoderConfig {
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t max_positions = 1024;
};

// Pre-norm decoder block. The q/k/v projection carries no bias: a key bias
// only shifts every score of a row by the same amount.
//
//   h   = x + W_o attn(ln_1(x))
//   out = h + W_2 gelu(W_1 ln_2(h))
struct DecoderBlock {
  Parameter ln1_gain, ln1_bias;
  Parameter qkv_weight;
  Parameter out_weight, out_bias;
  Parameter ln2_gain, ln2_bias;
  Parameter fc_weight, fc_bias;
  Parameter proj_weight, proj_bias;
};

struct Decoder {
  std::vector<DecoderBlock> blocks;
  Parameter final_gain, final_bias;
};

// Weights ~ N(0, init_std); layer-norm gains 1, biases 0.
Decoder make_decoder(const DecoderConfig& config, const std::string& prefix,
                     Rng& rng, double init_std = 0.02);

Parameter make_parameter(std::string name, std::size_t rows, std::size_t cols,
                         Rng& rng, double init_std);

// Throws UsageError if x has more rows than config.max_positions.
Var decoder_block(Var x, const DecoderBlock& block, const DecoderConfig& config);
// All blocks followed by the final layer norm.
Var run_decoder(Var x, const Decoder& decoder, const DecoderConfig& config);

void append_parameters(Decoder& decoder, std::vector<Parameter*>& out);
void append_parameters(const Decoder& decoder,
                       std::vector<const Parameter*>& out);

}  // namespace comae::nn
