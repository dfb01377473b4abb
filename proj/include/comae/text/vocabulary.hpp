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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace comae::text {

// Lowercases, splits on whitespace, and emits every punctuation character
// as its own token. Apostrophes stay inside words ("i'm").
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

// Word-level vocabulary. Ids 0 and 1 are reserved for <unk> and <eos>.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kEos = 1;

  Vocabulary();
  // Tokens ordered by descending frequency, ties alphabetical.
  static Vocabulary build(std::span<const std::string> texts,
                          std::size_t min_count = 1);
  // Throws DataError unless tokens start with the reserved entries and are
  // unique.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  int id(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<int> encode(std::string_view text) const;
  // Joins tokens with spaces, dropping <eos>.
  std::string decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace comae::text
