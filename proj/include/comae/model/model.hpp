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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "comae/corpus/conversation.hpp"
#include "comae/nn/decoder.hpp"
#include "comae/nn/tape.hpp"
#include "comae/taxonomy.hpp"
#include "comae/text/vocabulary.hpp"

namespace comae::model {

// Which factors the model predicts and conditions on, and whether each
// factor head also sees the choices of the factors upstream of it
// (cm before da before em).
struct Variant {
  bool cm = false;
  bool da = false;
  bool em = false;
  bool hierarchical = false;

  bool any() const { return cm || da || em; }
  std::string name() const;
  // Accepts the names of variant_names(), with "→" allowed for "->".
  // Throws UsageError listing the valid names otherwise.
  static Variant parse(std::string_view name);

  friend bool operator==(const Variant&, const Variant&) = default;
};

// vanilla, +cm, +da, +em, cm||da, cm||em, da||em, cm||da||em, cm->da,
// cm->em, da->em, cm->da->em.
const std::vector<std::string>& variant_names();

struct ModelConfig {
  std::size_t vocab_size = 0;
  nn::DecoderConfig decoder;
  Variant variant;
};

// One affine map followed by tanh, projecting a head input to width d.
struct HeadTransform {
  nn::Parameter weight;
  nn::Parameter bias;
};

// Parameters of a factor-conditioned decoder. Tables and transforms of
// disabled factors are left empty and excluded from parameters().
struct ComaeModel {
  ModelConfig config;
  nn::Parameter word;      // |V| x d, also the LM output projection
  nn::Parameter position;  // max_positions x d
  nn::Parameter speaker;   // 2 x d
  nn::Parameter da_table;  // 9 x d, also the dialog act classifier weights
  nn::Parameter em_table;  // 10 x d, also the emotion classifier weights
  std::array<nn::Parameter, kNumMechanisms> cm_tables;  // 2 x d each
  std::array<HeadTransform, kNumMechanisms> cm_heads;   // d -> d
  HeadTransform da_head;  // (1 + upstream) d -> d
  HeadTransform em_head;
  nn::Decoder decoder;

  std::size_t d() const { return config.decoder.d_model; }
  const nn::Parameter& lm_head() const { return word; }
  const nn::Parameter& da_classifier() const { return da_table; }
  const nn::Parameter& em_classifier() const { return em_table; }

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
};

ComaeModel make_model(const ModelConfig& config, std::uint64_t seed,
                      double init_std = 0.02);

// Input widths of the dialog act and emotion head transforms, in units
// of d.
std::size_t da_head_blocks(const Variant& v);
std::size_t em_head_blocks(const Variant& v);

struct EncodedUtterance {
  std::vector<int> tokens;
  int speaker = 0;
  DialogAct da{0};
  Emotion em{0};
};

// Token ids of one conversation. The response excludes the terminating
// <eos>, which is appended as the final prediction target.
struct Example {
  std::vector<EncodedUtterance> context;
  int response_speaker = 1;
  std::vector<int> response;
  FactorTriple factors;
};

Example encode_example(const corpus::Conversation& conversation,
                       const text::Vocabulary& vocab);
std::vector<Example> encode_corpus(const corpus::Corpus& corpus,
                                   const text::Vocabulary& vocab);

// Context length once utterances are joined by <eos> separators.
std::size_t context_length(std::span<const EncodedUtterance> context);

// ---------------------------------------------------------------------------
// Differentiable building blocks.

// Sum of word, position, speaker, dialog act and emotion rows per token;
// the act and emotion rows are included when the variant models those
// factors. Separators carry the annotations of the utterance they end.
nn::Var embed_context(nn::GradientTape& tape, const ComaeModel& model,
                      std::span<const EncodedUtterance> context);

std::array<nn::Var, kNumMechanisms> cm_logits(nn::GradientTape& tape,
                                              const ComaeModel& model,
                                              nn::Var h_x);
// Sum over mechanisms of the table row for the chosen bit.
nn::Var cm_embedding(nn::GradientTape& tape, const ComaeModel& model,
                     const CommMechanism& cm);
// The upstream choices are used only by hierarchical variants.
nn::Var da_logits(nn::GradientTape& tape, const ComaeModel& model, nn::Var h_x,
                  const CommMechanism& cm);
nn::Var em_logits(nn::GradientTape& tape, const ComaeModel& model, nn::Var h_x,
                  const CommMechanism& cm, DialogAct da);
// Sum of the enabled factor embeddings; zero for the vanilla variant.
nn::Var fuse_factors(nn::GradientTape& tape, const ComaeModel& model,
                     const FactorTriple& factors);

struct ForwardPass {
  nn::Var hidden;  // [context + 1 + prefix, d]
  nn::Var h_x;     // last context position
  // Logits predicting prefix[0..], ..., and the token after the prefix:
  // [prefix + 1, |V|].
  nn::Var token_logits;
};

// Runs the decoder once over the context, a separator and the response
// prefix. Response positions embed word + position + speaker + fused.
ForwardPass forward(nn::GradientTape& tape, const ComaeModel& model,
                    std::span<const EncodedUtterance> context,
                    std::span<const int> prefix, int response_speaker,
                    std::optional<nn::Var> fused);

// ---------------------------------------------------------------------------
// Inference on plain tensors.

struct ContextEncoding {
  nn::Tensor hidden;  // [T, d]
  nn::Tensor h_x;     // [1, d], the last row of hidden
};

ContextEncoding encode_context(const ComaeModel& model,
                               std::span<const EncodedUtterance> context);

struct FactorDistributions {
  std::array<std::array<double, 2>, kNumMechanisms> cm{};
  std::vector<double> da;
  std::vector<double> em;
};

// Each per-mechanism vector is [P(off), P(on)].
std::array<std::array<double, 2>, kNumMechanisms> predict_cm(
    const ComaeModel& model, const nn::Tensor& h_x);
std::vector<double> predict_da(const ComaeModel& model, const nn::Tensor& h_x,
                               const CommMechanism& cm);
std::vector<double> predict_em(const ComaeModel& model, const nn::Tensor& h_x,
                               const CommMechanism& cm, DialogAct da);
CommMechanism argmax_cm(const std::array<std::array<double, 2>, kNumMechanisms>& p);

nn::Tensor cm_embedding(const ComaeModel& model, const CommMechanism& cm);
nn::Tensor fuse_factors(const ComaeModel& model, const FactorTriple& factors);

// P(next token | context, prefix, fused factors). fused must be 1 x d.
std::vector<double> next_token_distribution(
    const ComaeModel& model, std::span<const EncodedUtterance> context,
    std::span<const int> prefix, const nn::Tensor& fused, int response_speaker);

struct JointLogProb {
  double cm = 0.0;
  double da = 0.0;
  double em = 0.0;
  double tokens = 0.0;  // includes the terminating <eos>
  double total = 0.0;
};

// ln P(C|x) + ln P(A|x,C) + ln P(E|x,C,A) + sum_t ln P(y_t | ...), with
// every condition set to the example's own factors. Terms of disabled
// factors are 0.
JointLogProb joint_log_prob(const ComaeModel& model, const Example& example);

struct TokenNll {
  double sum = 0.0;
  std::size_t tokens = 0;
};

// Response negative log-likelihood under the examples' own factors,
// summed over every response token including <eos>.
TokenNll response_nll(const ComaeModel& model, std::span<const Example> examples);

}  // namespace comae::model
