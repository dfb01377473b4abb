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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "comae/corpus/conversation.hpp"
#include "comae/taxonomy.hpp"

namespace comae::corpus {

// Factor axes over final responses. er/ip/ex are binary events with labels
// {no, yes}. cm is only valid as the conditioning axis: its rows are the
// "yes" rows of the three per-mechanism tables (emotional_reaction,
// interpretation, exploration), so a response may count in several rows.
enum class Axis { er, ip, ex, cm, da, em };

Axis parse_axis(std::string_view name);
std::string_view axis_name(Axis axis);
std::vector<std::string> axis_labels(Axis axis);

// Factors of one final response, with a weight (1 for observed data).
struct WeightedFactors {
  FactorTriple factors;
  double weight = 1.0;
};

struct DistributionTable {
  std::string x_axis;
  std::string y_axis;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  // rows[i][j]; conditional tables hold P(y_j | x_i), joint ones P(x_i, y_j).
  std::vector<std::vector<double>> rows;
  // Total weight behind each row before normalisation.
  std::vector<double> row_support;
  bool conditional = true;

  bool row_empty(std::size_t i) const { return row_support[i] <= 0.0; }
  double at(std::string_view row, std::string_view col) const;
};

// P(Y | X) over final responses, each X row normalised to 1. Rows without
// support stay all-zero and are reported by row_empty(). Throws DataError
// on an empty corpus and UsageError if y is Axis::cm.
DistributionTable conditional_distribution(const Corpus& corpus, Axis x, Axis y);
DistributionTable conditional_distribution(std::span<const WeightedFactors> data,
                                           Axis x, Axis y);
// P(X, Y); x and y must not be Axis::cm.
DistributionTable joint_distribution(const Corpus& corpus, Axis x, Axis y);

struct FactorMarginals {
  std::size_t responses = 0;
  // Independent proportions per mechanism; may sum to more than 1.
  std::array<double, kNumMechanisms> cm{};
  std::array<double, kNumDialogActs> da{};
  std::array<double, kNumEmotions> em{};
};

FactorMarginals factor_marginals(const Corpus& corpus);

// "x\y" header, then one line per row: label followed by one value per
// column. Values of empty rows are left blank.
void write_csv(std::ostream& out, const DistributionTable& table);
// Self-contained heat map.
void write_svg(std::ostream& out, const DistributionTable& table,
               std::string_view title);

}  // namespace comae::corpus
