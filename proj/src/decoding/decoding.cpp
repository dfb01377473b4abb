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

#include "comae/decoding/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "comae/error.hpp"
#include "comae/nn/ops.hpp"

namespace comae::decoding {
namespace {

void check_p(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw UsageError("top-p must lie in (0, 1], got " + std::to_string(p));
  }
}

std::vector<double> log_of(std::span<const double> p) {
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] > 0.0 ? std::log(p[i]) : -1e300;
  }
  return out;
}

std::vector<double> tempered(std::span<const double> probabilities, double tau) {
  if (tau == 1.0) return {probabilities.begin(), probabilities.end()};
  const auto logits = apply_temperature(log_of(probabilities), tau);
  return nn::softmax(logits);
}

}  // namespace

void DecodeConfig::validate() const {
  check_p(token_top_p);
  check_p(factor_top_p);
  if (!(temperature > 0.0)) throw UsageError("temperature must be > 0");
  if (!(factor_temperature > 0.0)) {
    throw UsageError("factor temperature must be > 0");
  }
  if (max_new_tokens == 0) throw UsageError("max_new_tokens must be > 0");
}

std::vector<double> apply_temperature(std::span<const double> logits,
                                      double tau) {
  if (!(tau > 0.0)) {
    throw UsageError("temperature must be > 0, got " + std::to_string(tau));
  }
  std::vector<double> out(logits.begin(), logits.end());
  for (double& v : out) v /= tau;
  return out;
}

std::vector<double> top_p_filter(std::span<const double> probabilities,
                                 double p) {
  check_p(p);
  if (probabilities.empty()) throw DataError("top-p of an empty distribution");
  double total = 0.0;
  for (double v : probabilities) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DataError("top-p input has a negative or non-finite probability");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw DataError("top-p input sums to " + std::to_string(total) + ", not 1");
  }
  if (p == 1.0) return {probabilities.begin(), probabilities.end()};
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probabilities[a] > probabilities[b];
  });
  std::vector<double> out(probabilities.size(), 0.0);
  double kept = 0.0;
  for (std::size_t idx : order) {
    if (probabilities[idx] <= 0.0) break;
    out[idx] = probabilities[idx];
    kept += probabilities[idx];
    if (kept >= p * total - 1e-12) break;
  }
  for (double& v : out) v /= kept;
  return out;
}

std::size_t sample(std::span<const double> probabilities, double tau, double p,
                   nn::Rng& rng) {
  const auto filtered = top_p_filter(tempered(probabilities, tau), p);
  return rng.categorical(filtered);
}

Mode parse_mode(std::string_view name) {
  if (name == "ground_truth") return Mode::ground_truth;
  if (name == "predicted") return Mode::predicted;
  throw UsageError("unknown mode '" + std::string(name) +
                   "' (expected ground_truth or predicted)");
}

std::string_view mode_name(Mode mode) {
  return mode == Mode::ground_truth ? "ground_truth" : "predicted";
}

Generation generate(const model::ComaeModel& model,
                    std::span<const model::EncodedUtterance> context,
                    int response_speaker, Mode mode,
                    const std::optional<FactorTriple>& factors,
                    const DecodeConfig& config, nn::Rng& rng) {
  config.validate();
  const model::Variant& v = model.config.variant;
  Generation out;
  if (mode == Mode::ground_truth) {
    if (!factors) throw UsageError("ground_truth mode needs the factors");
    out.factors = *factors;
  } else if (v.any()) {
    const nn::Tensor h_x = model::encode_context(model, context).h_x;
    if (v.cm) {
      out.stages.cm = model::predict_cm(model, h_x);
      for (std::size_t i = 0; i < kNumMechanisms; ++i) {
        out.factors.cm.set(kMechanisms[i],
                           rng.categorical(out.stages.cm[i]) == 1);
      }
    }
    if (v.da) {
      out.stages.da = model::predict_da(model, h_x, out.factors.cm);
      out.factors.da = DialogAct(static_cast<int>(
          sample(out.stages.da, config.factor_temperature, config.factor_top_p,
                 rng)));
    }
    if (v.em) {
      out.stages.em = model::predict_em(model, h_x, out.factors.cm,
                                        out.factors.da);
      out.factors.em = Emotion(static_cast<int>(
          sample(out.stages.em, config.factor_temperature, config.factor_top_p,
                 rng)));
    }
  }

  const nn::Tensor fused = model::fuse_factors(model, out.factors);
  const std::size_t limit = model.config.decoder.max_positions;
  const std::size_t used = model::context_length(context) + 1;
  for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
    if (used + out.tokens.size() >= limit) break;
    const auto probs = model::next_token_distribution(model, context, out.tokens,
                                                      fused, response_speaker);
    auto filtered =
        top_p_filter(tempered(probs, config.temperature), config.token_top_p);
    const int token = static_cast<int>(rng.categorical(filtered));
    out.token_distributions.push_back(std::move(filtered));
    if (token == text::Vocabulary::kEos) {
      out.stopped_at_eos = true;
      break;
    }
    out.tokens.push_back(token);
  }
  return out;
}

}  // namespace comae::decoding
