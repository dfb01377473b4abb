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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "comae/taxonomy.hpp"

namespace comae::corpus {

enum class Domain { happy, offmychest };

Domain parse_domain(std::string_view name);
std::string_view domain_name(Domain d);

// Labels an utterance carried before automatic annotation replaced them.
struct OriginalLabels {
  DialogAct da;
  Emotion em;
};

struct Utterance {
  int speaker = 0;
  std::string text;
  DialogAct da{0};
  Emotion em{0};
  std::optional<OriginalLabels> original;
};

// Dialog context followed by the final response. Only the response carries
// a communication mechanism annotation.
struct Conversation {
  std::string id;
  Domain domain = Domain::happy;
  std::vector<Utterance> utterances;
  CommMechanism response_cm;
  std::optional<CommMechanism> original_response_cm;

  const Utterance& response() const { return utterances.back(); }
  std::span<const Utterance> context() const {
    return {utterances.data(), utterances.size() - 1};
  }
  FactorTriple response_factors() const {
    return {response_cm, response().da, response().em};
  }
};

using Corpus = std::vector<Conversation>;

// One JSON object per line:
//   {"id": str, "domain": "happy"|"offmychest",
//    "utterances": [{"speaker": int, "text": str, "da": str, "em": str}, ...],
//    "response_cm": {"er": bool, "ip": bool, "ex": bool}}
// Blank lines are skipped. Errors carry the 1-based line number.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(std::istream& in, const std::string& source = "<stream>");
Conversation parse_conversation_line(std::string_view line);

std::string to_json_line(const Conversation& conversation);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);

struct FilterReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t multi_speaker = 0;
  std::size_t no_cm = 0;
};

struct FilterResult {
  Corpus kept;
  FilterReport report;
};

// Drops conversations with more than two distinct speakers
// ("multi_speaker") and those whose response has no mechanism ("no_cm").
// Kept conversations have speakers renumbered so the first speaker is 0 and
// the other is 1.
FilterResult filter_conversations(const Corpus& corpus);

}  // namespace comae::corpus
