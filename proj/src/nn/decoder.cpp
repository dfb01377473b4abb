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

#include "comae/nn/decoder.hpp"

#include <array>

#include "comae/error.hpp"

namespace comae::nn {

Parameter make_parameter(std::string name, std::size_t rows, std::size_t cols,
                         Rng& rng, double init_std) {
  Parameter p{std::move(name), Tensor(rows, cols)};
  if (init_std > 0.0) {
    for (double& v : p.value.values()) v = rng.normal(0.0, init_std);
  }
  return p;
}

namespace {

Parameter ones(std::string name, std::size_t cols) {
  return Parameter{std::move(name), Tensor(1, cols, 1.0)};
}

Parameter zeros(std::string name, std::size_t cols) {
  return Parameter{std::move(name), Tensor(1, cols, 0.0)};
}

}  // namespace

Decoder make_decoder(const DecoderConfig& config, const std::string& prefix,
                     Rng& rng, double init_std) {
  const std::size_t d = config.d_model;
  if (d == 0 || config.heads == 0 || d % config.heads != 0) {
    throw UsageError("d_model must be a positive multiple of heads");
  }
  Decoder dec;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = prefix + "h" + std::to_string(l) + ".";
    DecoderBlock b{
        ones(p + "ln_1.g", d),
        zeros(p + "ln_1.b", d),
        make_parameter(p + "attn.qkv.w", d, 3 * d, rng, init_std),
        make_parameter(p + "attn.out.w", d, d, rng, init_std),
        zeros(p + "attn.out.b", d),
        ones(p + "ln_2.g", d),
        zeros(p + "ln_2.b", d),
        make_parameter(p + "mlp.fc.w", d, 4 * d, rng, init_std),
        zeros(p + "mlp.fc.b", 4 * d),
        make_parameter(p + "mlp.proj.w", 4 * d, d, rng, init_std),
        zeros(p + "mlp.proj.b", d),
    };
    dec.blocks.push_back(std::move(b));
  }
  dec.final_gain = ones(prefix + "ln_f.g", d);
  dec.final_bias = zeros(prefix + "ln_f.b", d);
  return dec;
}

Var decoder_block(Var x, const DecoderBlock& b, const DecoderConfig& config) {
  if (x.rows() > config.max_positions) {
    throw UsageError("sequence of length " + std::to_string(x.rows()) +
                     " exceeds the maximum of " +
                     std::to_string(config.max_positions));
  }
  Var a = layer_norm(x, b.ln1_gain, b.ln1_bias);
  a = linear(a, b.qkv_weight, nullptr);
  a = causal_self_attention(a, config.heads);
  a = linear(a, b.out_weight, &b.out_bias);
  Var h = add(x, a);

  Var m = layer_norm(h, b.ln2_gain, b.ln2_bias);
  m = linear(m, b.fc_weight, &b.fc_bias);
  m = gelu(m);
  m = linear(m, b.proj_weight, &b.proj_bias);
  return add(h, m);
}

Var run_decoder(Var x, const Decoder& decoder, const DecoderConfig& config) {
  for (const DecoderBlock& b : decoder.blocks) x = decoder_block(x, b, config);
  return layer_norm(x, decoder.final_gain, decoder.final_bias);
}

namespace {

template <class D, class P>
void append_all(D& decoder, std::vector<P*>& out) {
  for (auto& b : decoder.blocks) {
    for (auto* p : std::array{&b.ln1_gain, &b.ln1_bias, &b.qkv_weight,
                              &b.out_weight, &b.out_bias,
                              &b.ln2_gain, &b.ln2_bias, &b.fc_weight,
                              &b.fc_bias, &b.proj_weight, &b.proj_bias}) {
      out.push_back(p);
    }
  }
  out.push_back(&decoder.final_gain);
  out.push_back(&decoder.final_bias);
}

}  // namespace

void append_parameters(Decoder& decoder, std::vector<Parameter*>& out) {
  append_all(decoder, out);
}

void append_parameters(const Decoder& decoder,
                       std::vector<const Parameter*>& out) {
  append_all(decoder, out);
}

}  // namespace comae::nn
