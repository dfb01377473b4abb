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
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "comae/corpus/conversation.hpp"
#include "comae/corpus/distribution.hpp"
#include "comae/taxonomy.hpp"

namespace comae::corpus {

using DaDistribution = std::array<double, kNumDialogActs>;
using EmDistribution = std::array<double, kNumEmotions>;

// A family of conversation openers. Each situation has its own mechanism
// prior and may override the dialog act table, so the context carries
// information about the response factors.
struct SynthSituation {
  std::string name;
  double weight = 1.0;
  std::vector<std::string> posts;
  DialogAct post_da{0};
  Emotion post_em{0};
  std::vector<std::pair<CommMechanism, double>> cm;
  // Keyed by mechanism key ("er+ex") or "*".
  std::map<std::string, DaDistribution> da_given_cm;
};

// Planted factor hierarchy and text templates, read from JSON:
//
//   {"domain": "happy",
//    "situations": [{"name": s, "weight": w, "posts": [str, ...],
//                    "post_da": da, "post_em": em,
//                    "cm": {"er": p, "er+ex": p, ...},
//                    "da_given_cm": {...}}],          (optional)
//    "da_given_cm": {"ex": {"questioning": 0.95, ...}, "*": {...}},
//    "em_given_da": {"questioning": {"surprise": 0.6, ...}, ...},
//    "em_given_da_cm": {"consoling|er": {...}},         (optional)
//    "templates": {"questioning|surprise": [str, ...], ...},
//    "cm_phrases": {"er": [...], "ip": [...], "ex": [...]}}  (optional)
//
// Distributions list only their nonzero entries and must sum to 1.
// Mechanism lookups fall back to "*" when the exact key is absent.
struct SynthSpec {
  Domain domain = Domain::happy;
  std::vector<SynthSituation> situations;
  std::map<std::string, DaDistribution> da_given_cm;
  std::map<int, EmDistribution> em_given_da;
  std::map<std::string, EmDistribution> em_given_da_cm;
  std::map<std::pair<int, int>, std::vector<std::string>> templates;
  std::array<std::vector<std::string>, kNumMechanisms> cm_phrases;
};

SynthSpec parse_synth_spec(std::string_view json_text);
SynthSpec load_synth_spec(const std::string& path);

// Throws DataError when a table is not a distribution, a lookup reachable
// with positive probability is missing, or a reachable (da, em) pair has no
// template.
void validate_synth_spec(const SynthSpec& spec);

// n conversations of one post and one response each. Deterministic in
// (spec, n, seed); ids are "<domain>-<seed>-<index>".
Corpus generate_synthetic_corpus(const SynthSpec& spec, std::size_t n,
                                 std::uint64_t seed);

// Exact P(Y | X) implied by the spec, by enumerating every situation and
// factor triple.
DistributionTable planted_conditional(const SynthSpec& spec, Axis x, Axis y);

// Every response factor triple with its probability under the spec.
std::vector<WeightedFactors> planted_triples(const SynthSpec& spec);

}  // namespace comae::corpus
