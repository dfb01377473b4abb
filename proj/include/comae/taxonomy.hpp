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
#include <string>
#include <string_view>
#include <vector>

namespace comae {

inline constexpr std::size_t kNumMechanisms = 3;
inline constexpr std::size_t kNumDialogActs = 9;
inline constexpr std::size_t kNumEmotions = 10;

enum class Mechanism : std::uint8_t {
  emotional_reaction = 0,
  interpretation = 1,
  exploration = 2,
};

inline constexpr std::array<Mechanism, kNumMechanisms> kMechanisms = {
    Mechanism::emotional_reaction, Mechanism::interpretation,
    Mechanism::exploration};

// Communication mechanism annotation of a response: one binary flag per
// mechanism. The all-false value marks a non-empathetic response.
struct CommMechanism {
  bool er = false;
  bool ip = false;
  bool ex = false;

  bool get(Mechanism m) const noexcept;
  void set(Mechanism m, bool value) noexcept;
  bool any() const noexcept { return er || ip || ex; }
  // "er+ex" style key; "none" when no flag is set.
  std::string key() const;
  static CommMechanism from_key(std::string_view key);

  friend bool operator==(const CommMechanism&, const CommMechanism&) = default;
};

// Short form used in JSON fields: "er", "ip", "ex".
std::string_view mechanism_short_name(Mechanism m);

class DialogAct {
 public:
  // Throws DataError if index is outside [0, 9).
  explicit DialogAct(int index);
  static DialogAct from_name(std::string_view name);

  int index() const noexcept { return index_; }
  std::string_view name() const;

  friend bool operator==(const DialogAct&, const DialogAct&) = default;

 private:
  int index_;
};

class Emotion {
 public:
  // Throws DataError if index is outside [0, 10).
  explicit Emotion(int index);
  static Emotion from_name(std::string_view name);
  static Emotion neutral();

  int index() const noexcept { return index_; }
  std::string_view name() const;

  friend bool operator==(const Emotion&, const Emotion&) = default;

 private:
  int index_;
};

struct FactorTriple {
  CommMechanism cm;
  DialogAct da{0};
  Emotion em{0};

  friend bool operator==(const FactorTriple&, const FactorTriple&) = default;
};

enum class FactorAxis { cm, da, em };

// "cm" | "da" | "em"; throws UsageError otherwise.
FactorAxis parse_factor_axis(std::string_view axis);
std::string_view factor_axis_name(FactorAxis axis);

// Canonical ordered labels: cm -> the three mechanisms, da -> 9 labels
// ending with "others", em -> 10 labels ending with "neutral".
const std::vector<std::string>& factor_names(FactorAxis axis);
const std::vector<std::string>& factor_names(std::string_view axis);

// Maps one of the 27 fine-grained emotions or "neutral" (case-insensitive)
// onto the coarse set. Throws DataError naming the label otherwise.
Emotion map_emotion(std::string_view fine_label);
// All 28 recognised fine labels.
const std::vector<std::string>& fine_emotion_labels();

// "no" -> false, "weak" | "strong" -> true; throws DataError otherwise.
bool cm_merge(std::string_view level);

// Versioned label table, one "index<TAB>name" line per label per axis.
const std::string& taxonomy_table();
std::uint64_t taxonomy_hash();

}  // namespace comae
