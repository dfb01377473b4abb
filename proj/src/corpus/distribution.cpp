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

#include "comae/corpus/distribution.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "comae/error.hpp"

namespace comae::corpus {
namespace {

bool is_binary(Axis a) { return a == Axis::er || a == Axis::ip || a == Axis::ex; }

Mechanism mechanism_of(Axis a) {
  switch (a) {
    case Axis::er: return Mechanism::emotional_reaction;
    case Axis::ip: return Mechanism::interpretation;
    default: return Mechanism::exploration;
  }
}

// Category index of a response along a partitioning axis.
std::size_t category(Axis a, const FactorTriple& f) {
  if (is_binary(a)) return f.cm.get(mechanism_of(a)) ? 1 : 0;
  if (a == Axis::da) return static_cast<std::size_t>(f.da.index());
  return static_cast<std::size_t>(f.em.index());
}

std::vector<WeightedFactors> observed(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("distribution of an empty corpus");
  std::vector<WeightedFactors> out;
  out.reserve(corpus.size());
  for (const Conversation& c : corpus) out.push_back({c.response_factors(), 1.0});
  return out;
}

DistributionTable empty_table(Axis x, Axis y, bool conditional) {
  DistributionTable t;
  t.x_axis = std::string(axis_name(x));
  t.y_axis = std::string(axis_name(y));
  t.row_labels = axis_labels(x);
  t.col_labels = axis_labels(y);
  t.rows.assign(t.row_labels.size(),
                std::vector<double>(t.col_labels.size(), 0.0));
  t.row_support.assign(t.row_labels.size(), 0.0);
  t.conditional = conditional;
  return t;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Axis parse_axis(std::string_view name) {
  if (name == "er") return Axis::er;
  if (name == "ip") return Axis::ip;
  if (name == "ex") return Axis::ex;
  if (name == "cm") return Axis::cm;
  if (name == "da") return Axis::da;
  if (name == "em") return Axis::em;
  throw UsageError("unknown axis '" + std::string(name) +
                   "' (expected er, ip, ex, cm, da or em)");
}

std::string_view axis_name(Axis axis) {
  switch (axis) {
    case Axis::er: return "er";
    case Axis::ip: return "ip";
    case Axis::ex: return "ex";
    case Axis::cm: return "cm";
    case Axis::da: return "da";
    case Axis::em: return "em";
  }
  return "?";
}

std::vector<std::string> axis_labels(Axis axis) {
  if (is_binary(axis)) return {"no", "yes"};
  if (axis == Axis::cm) return factor_names(FactorAxis::cm);
  if (axis == Axis::da) return factor_names(FactorAxis::da);
  return factor_names(FactorAxis::em);
}

double DistributionTable::at(std::string_view row, std::string_view col) const {
  auto r = std::find(row_labels.begin(), row_labels.end(), row);
  auto c = std::find(col_labels.begin(), col_labels.end(), col);
  if (r == row_labels.end() || c == col_labels.end()) {
    throw UsageError("no cell (" + std::string(row) + ", " + std::string(col) +
                     ")");
  }
  return rows[static_cast<std::size_t>(r - row_labels.begin())]
             [static_cast<std::size_t>(c - col_labels.begin())];
}

DistributionTable conditional_distribution(std::span<const WeightedFactors> data,
                                           Axis x, Axis y) {
  if (y == Axis::cm) {
    throw UsageError("cm can only be the conditioning axis; use er, ip or ex");
  }
  if (data.empty()) throw DataError("distribution of an empty corpus");
  DistributionTable t = empty_table(x, y, true);
  for (const WeightedFactors& w : data) {
    const std::size_t col = category(y, w.factors);
    if (x == Axis::cm) {
      for (std::size_t i = 0; i < kNumMechanisms; ++i) {
        if (!w.factors.cm.get(kMechanisms[i])) continue;
        t.rows[i][col] += w.weight;
        t.row_support[i] += w.weight;
      }
    } else {
      const std::size_t row = category(x, w.factors);
      t.rows[row][col] += w.weight;
      t.row_support[row] += w.weight;
    }
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.row_empty(i)) continue;
    for (double& v : t.rows[i]) v /= t.row_support[i];
  }
  return t;
}

DistributionTable conditional_distribution(const Corpus& corpus, Axis x,
                                           Axis y) {
  const auto data = observed(corpus);
  return conditional_distribution(std::span<const WeightedFactors>(data), x, y);
}

DistributionTable joint_distribution(const Corpus& corpus, Axis x, Axis y) {
  if (x == Axis::cm || y == Axis::cm) {
    throw UsageError("joint distribution needs partitioning axes (not cm)");
  }
  const auto data = observed(corpus);
  DistributionTable t = empty_table(x, y, false);
  for (const WeightedFactors& w : data) {
    const std::size_t row = category(x, w.factors);
    t.rows[row][category(y, w.factors)] += w.weight;
    t.row_support[row] += w.weight;
  }
  const double total = static_cast<double>(data.size());
  for (auto& r : t.rows) {
    for (double& v : r) v /= total;
  }
  return t;
}

FactorMarginals factor_marginals(const Corpus& corpus) {
  if (corpus.empty()) throw DataError("marginals of an empty corpus");
  FactorMarginals m;
  m.responses = corpus.size();
  for (const Conversation& c : corpus) {
    for (std::size_t i = 0; i < kNumMechanisms; ++i) {
      if (c.response_cm.get(kMechanisms[i])) m.cm[i] += 1.0;
    }
    m.da[static_cast<std::size_t>(c.response().da.index())] += 1.0;
    m.em[static_cast<std::size_t>(c.response().em.index())] += 1.0;
  }
  const double n = static_cast<double>(corpus.size());
  for (double& v : m.cm) v /= n;
  for (double& v : m.da) v /= n;
  for (double& v : m.em) v /= n;
  return m;
}

void write_csv(std::ostream& out, const DistributionTable& t) {
  out << t.x_axis << "\\" << t.y_axis;
  for (const auto& c : t.col_labels) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out << t.row_labels[i];
    const bool blank = t.conditional && t.row_empty(i);
    for (double v : t.rows[i]) {
      out << ',';
      if (!blank) out << format_value(v);
    }
    out << '\n';
  }
}

void write_svg(std::ostream& out, const DistributionTable& t,
               std::string_view title) {
  constexpr int kCell = 44;
  constexpr int kLeft = 150;
  constexpr int kTop = 120;
  const int width = kLeft + kCell * static_cast<int>(t.col_labels.size()) + 20;
  const int height = kTop + kCell * static_cast<int>(t.row_labels.size()) + 20;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n";
  out << "<text x=\"10\" y=\"18\" font-size=\"14\">" << escape_xml(title)
      << "</text>\n";
  for (std::size_t j = 0; j < t.col_labels.size(); ++j) {
    const int x = kLeft + kCell * static_cast<int>(j) + kCell / 2;
    out << "<text transform=\"translate(" << x << "," << kTop - 6
        << ") rotate(-60)\">" << escape_xml(t.col_labels[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const int y = kTop + kCell * static_cast<int>(i);
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + kCell / 2 + 4
        << "\" text-anchor=\"end\">" << escape_xml(t.row_labels[i])
        << "</text>\n";
    for (std::size_t j = 0; j < t.rows[i].size(); ++j) {
      const double v = std::clamp(t.rows[i][j], 0.0, 1.0);
      // White (0) to dark orange (1).
      const int r = 255 - static_cast<int>(27 * v);
      const int g = 255 - static_cast<int>(147 * v);
      const int b = 255 - static_cast<int>(245 * v);
      const int x = kLeft + kCell * static_cast<int>(j);
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
          << "\" height=\"" << kCell << "\" fill=\"rgb(" << r << "," << g
          << "," << b << ")\" stroke=\"#ccc\"/>\n";
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.2f", t.rows[i][j]);
      out << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4
          << "\" text-anchor=\"middle\">" << buf << "</text>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace comae::corpus
