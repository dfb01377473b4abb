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

#include "comae/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <utility>

#include "comae/error.hpp"
#include "comae/util/hash.hpp"

namespace comae {
namespace {

const std::vector<std::string> kMechanismNames = {
    "emotional_reaction", "interpretation", "exploration"};

const std::vector<std::string> kDialogActNames = {
    "questioning", "acknowledging", "agreeing",  "consoling", "encouraging",
    "sympathizing", "suggesting",   "wishing",   "others"};

// Alphabetical, neutral last.
const std::vector<std::string> kEmotionNames = {
    "admiration", "anger", "approval", "caring",   "fear",
    "gratitude",  "joy",   "sadness",  "surprise", "neutral"};

// Coarse emotion -> the fine-grained emotions merged into it.
const std::vector<std::pair<std::string, std::vector<std::string>>>
    kEmotionMerge = {
        {"admiration", {"admiration", "pride"}},
        {"anger", {"anger", "annoyance", "disgust", "disapproval"}},
        {"approval", {"approval", "realization"}},
        {"caring", {"caring", "desire", "optimism"}},
        {"fear", {"fear", "nervousness"}},
        {"gratitude", {"gratitude", "relief"}},
        {"joy", {"joy", "amusement", "excitement", "love"}},
        {"sadness",
         {"sadness", "disappointment", "embarrassment", "grief", "remorse"}},
        {"surprise", {"surprise", "confusion", "curiosity"}},
        {"neutral", {"neutral"}},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

int index_of(const std::vector<std::string>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

}  // namespace

bool CommMechanism::get(Mechanism m) const noexcept {
  switch (m) {
    case Mechanism::emotional_reaction: return er;
    case Mechanism::interpretation: return ip;
    case Mechanism::exploration: return ex;
  }
  return false;
}

void CommMechanism::set(Mechanism m, bool value) noexcept {
  switch (m) {
    case Mechanism::emotional_reaction: er = value; break;
    case Mechanism::interpretation: ip = value; break;
    case Mechanism::exploration: ex = value; break;
  }
}

std::string CommMechanism::key() const {
  std::string out;
  for (Mechanism m : kMechanisms) {
    if (!get(m)) continue;
    if (!out.empty()) out += '+';
    out += mechanism_short_name(m);
  }
  return out.empty() ? "none" : out;
}

CommMechanism CommMechanism::from_key(std::string_view key) {
  CommMechanism cm;
  if (key == "none") return cm;
  std::size_t start = 0;
  while (start <= key.size()) {
    const std::size_t end = std::min(key.find('+', start), key.size());
    const std::string_view part = key.substr(start, end - start);
    bool matched = false;
    for (Mechanism m : kMechanisms) {
      if (part == mechanism_short_name(m)) {
        cm.set(m, true);
        matched = true;
      }
    }
    if (!matched) {
      throw DataError("unknown communication mechanism key '" +
                      std::string(key) + "'");
    }
    start = end + 1;
  }
  return cm;
}

std::string_view mechanism_short_name(Mechanism m) {
  switch (m) {
    case Mechanism::emotional_reaction: return "er";
    case Mechanism::interpretation: return "ip";
    case Mechanism::exploration: return "ex";
  }
  return "?";
}

DialogAct::DialogAct(int index) : index_(index) {
  if (index < 0 || index >= static_cast<int>(kNumDialogActs)) {
    throw DataError("dialog act index " + std::to_string(index) +
                    " out of range");
  }
}

DialogAct DialogAct::from_name(std::string_view name) {
  const int i = index_of(kDialogActNames, lower(name));
  if (i < 0) throw DataError("unknown dialog act '" + std::string(name) + "'");
  return DialogAct(i);
}

std::string_view DialogAct::name() const {
  return kDialogActNames[static_cast<std::size_t>(index_)];
}

Emotion::Emotion(int index) : index_(index) {
  if (index < 0 || index >= static_cast<int>(kNumEmotions)) {
    throw DataError("emotion index " + std::to_string(index) +
                    " out of range");
  }
}

Emotion Emotion::from_name(std::string_view name) {
  const int i = index_of(kEmotionNames, lower(name));
  if (i < 0) throw DataError("unknown emotion '" + std::string(name) + "'");
  return Emotion(i);
}

Emotion Emotion::neutral() { return Emotion(kNumEmotions - 1); }

std::string_view Emotion::name() const {
  return kEmotionNames[static_cast<std::size_t>(index_)];
}

FactorAxis parse_factor_axis(std::string_view axis) {
  if (axis == "cm") return FactorAxis::cm;
  if (axis == "da") return FactorAxis::da;
  if (axis == "em") return FactorAxis::em;
  throw UsageError("unknown factor axis '" + std::string(axis) +
                   "' (expected cm, da or em)");
}

std::string_view factor_axis_name(FactorAxis axis) {
  switch (axis) {
    case FactorAxis::cm: return "cm";
    case FactorAxis::da: return "da";
    case FactorAxis::em: return "em";
  }
  return "?";
}

const std::vector<std::string>& factor_names(FactorAxis axis) {
  switch (axis) {
    case FactorAxis::cm: return kMechanismNames;
    case FactorAxis::da: return kDialogActNames;
    case FactorAxis::em: return kEmotionNames;
  }
  return kMechanismNames;
}

const std::vector<std::string>& factor_names(std::string_view axis) {
  return factor_names(parse_factor_axis(axis));
}

Emotion map_emotion(std::string_view fine_label) {
  const std::string key = lower(fine_label);
  for (const auto& [coarse, fine] : kEmotionMerge) {
    if (std::find(fine.begin(), fine.end(), key) != fine.end()) {
      return Emotion::from_name(coarse);
    }
  }
  throw DataError("unrecognised emotion label '" + std::string(fine_label) +
                  "'");
}

const std::vector<std::string>& fine_emotion_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> out;
    for (const auto& entry : kEmotionMerge) {
      out.insert(out.end(), entry.second.begin(), entry.second.end());
    }
    return out;
  }();
  return labels;
}

bool cm_merge(std::string_view level) {
  const std::string l = lower(level);
  if (l == "no") return false;
  if (l == "weak" || l == "strong") return true;
  throw DataError("invalid mechanism level '" + std::string(level) +
                  "' (expected no, weak or strong)");
}

const std::string& taxonomy_table() {
  static const std::string table = [] {
    std::ostringstream out;
    out << "# comae-taxonomy v1\n";
    for (FactorAxis axis : {FactorAxis::cm, FactorAxis::da, FactorAxis::em}) {
      out << "[" << factor_axis_name(axis) << "]\n";
      const auto& names = factor_names(axis);
      for (std::size_t i = 0; i < names.size(); ++i) {
        out << i << '\t' << names[i] << '\n';
      }
    }
    return out.str();
  }();
  return table;
}

std::uint64_t taxonomy_hash() { return fnv1a(taxonomy_table()); }

}  // namespace comae
