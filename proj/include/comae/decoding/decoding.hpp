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
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "comae/model/model.hpp"
#include "comae/nn/rng.hpp"

namespace comae::decoding {

struct DecodeConfig {
  double token_top_p = 0.9;
  double temperature = 0.7;  // tokens only
  double factor_top_p = 0.9;
  double factor_temperature = 1.0;
  std::size_t max_new_tokens = 64;
  std::uint64_t seed = 0;

  // Throws UsageError unless 0 < p <= 1, temperatures > 0 and
  // max_new_tokens > 0.
  void validate() const;
};

// logits / tau. Throws UsageError if tau <= 0.
std::vector<double> apply_temperature(std::span<const double> logits, double tau);

// Keeps the smallest set of most probable outcomes whose mass reaches p
// (the outcome that crosses p is kept; ties go to the lower index), zeroes
// the rest and renormalises. Throws DataError unless probabilities is a
// distribution, UsageError unless 0 < p <= 1.
std::vector<double> top_p_filter(std::span<const double> probabilities, double p);

// Draws from softmax(log(probabilities) / tau) after top-p filtering.
std::size_t sample(std::span<const double> probabilities, double tau, double p,
                   nn::Rng& rng);

enum class Mode { ground_truth, predicted };
Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode mode);

struct Generation {
  std::vector<int> tokens;  // without the terminating <eos>
  bool stopped_at_eos = false;
  // Factors the response was conditioned on. Factors the model does not
  // handle are left at their defaults (no mechanism, "others", "neutral").
  FactorTriple factors{{}, DialogAct(kNumDialogActs - 1), Emotion::neutral()};
  // Unfiltered stage distributions (predicted mode, enabled factors only).
  model::FactorDistributions stages;
  // Token distribution after temperature and top-p, one per step.
  std::vector<std::vector<double>> token_distributions;
};

// Predicted mode evaluates mechanisms (independent Bernoulli draws), then
// the dialog act (top-p over its distribution given the mechanisms), then
// the emotion (top-p given both), and conditions the tokens on the drawn
// factors. Ground-truth mode conditions on the supplied factors. Sampling
// stops at <eos>, after max_new_tokens, or at the position limit.
Generation generate(const model::ComaeModel& model,
                    std::span<const model::EncodedUtterance> context,
                    int response_speaker, Mode mode,
                    const std::optional<FactorTriple>& factors,
                    const DecodeConfig& config, nn::Rng& rng);

}  // namespace comae::decoding
