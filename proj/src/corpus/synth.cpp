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

#include "comae/corpus/synth.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "comae/error.hpp"
#include "comae/nn/rng.hpp"

namespace comae::corpus {
namespace {

using nlohmann::json;

constexpr double kSumTolerance = 1e-6;

template <std::size_t N, class Label>
std::array<double, N> read_distribution(const json& j, const std::string& where) {
  if (!j.is_object()) throw DataError(where + " must be an object");
  std::array<double, N> out{};
  for (const auto& [name, p] : j.items()) {
    if (!p.is_number()) throw DataError(where + "." + name + " must be a number");
    out[static_cast<std::size_t>(Label::from_name(name).index())] =
        p.template get<double>();
  }
  return out;
}

std::vector<std::string> read_strings(const json& j, const std::string& where) {
  if (!j.is_array()) throw DataError(where + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string() || s.get<std::string>().empty()) {
      throw DataError(where + " must hold non-empty strings");
    }
    out.push_back(s.get<std::string>());
  }
  return out;
}

std::map<std::string, DaDistribution> read_da_tables(const json& j,
                                                     const std::string& where) {
  std::map<std::string, DaDistribution> out;
  if (!j.is_object()) throw DataError(where + " must be an object");
  for (const auto& [key, table] : j.items()) {
    const std::string k = key == "*" ? key : CommMechanism::from_key(key).key();
    out[k] = read_distribution<kNumDialogActs, DialogAct>(table,
                                                          where + "." + key);
  }
  return out;
}

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw DataError("missing field '" + std::string(key) + "' in " + where);
  }
  return *it;
}

template <std::size_t N>
void check_distribution(const std::array<double, N>& d, const std::string& what) {
  double sum = 0.0;
  for (double p : d) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DataError(what + " has a negative or non-finite entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw DataError(what + " sums to " + std::to_string(sum) + ", not 1");
  }
}

const DaDistribution* find_da(const SynthSpec& spec, const SynthSituation& s,
                              const CommMechanism& cm) {
  const std::string key = cm.key();
  for (const auto* table : {&s.da_given_cm, &spec.da_given_cm}) {
    if (auto it = table->find(key); it != table->end()) return &it->second;
  }
  for (const auto* table : {&s.da_given_cm, &spec.da_given_cm}) {
    if (auto it = table->find("*"); it != table->end()) return &it->second;
  }
  return nullptr;
}

const EmDistribution* find_em(const SynthSpec& spec, int da,
                              const CommMechanism& cm) {
  const std::string key = std::string(DialogAct(da).name()) + "|" + cm.key();
  if (auto it = spec.em_given_da_cm.find(key); it != spec.em_given_da_cm.end()) {
    return &it->second;
  }
  if (auto it = spec.em_given_da.find(da); it != spec.em_given_da.end()) {
    return &it->second;
  }
  return nullptr;
}

std::string pair_name(int da, int em) {
  return std::string(DialogAct(da).name()) + "|" +
         std::string(Emotion(em).name());
}

// Calls visit(situation, cm, da, em, probability) for every positive path.
template <class Visit>
void enumerate(const SynthSpec& spec, Visit&& visit) {
  double total_weight = 0.0;
  for (const auto& s : spec.situations) total_weight += s.weight;
  for (const auto& s : spec.situations) {
    for (const auto& [cm, p_cm] : s.cm) {
      if (p_cm <= 0.0) continue;
      const DaDistribution* da_table = find_da(spec, s, cm);
      if (da_table == nullptr) {
        throw DataError("situation '" + s.name +
                        "': no dialog act table for mechanism '" + cm.key() +
                        "'");
      }
      for (int da = 0; da < static_cast<int>(kNumDialogActs); ++da) {
        const double p_da = (*da_table)[static_cast<std::size_t>(da)];
        if (p_da <= 0.0) continue;
        const EmDistribution* em_table = find_em(spec, da, cm);
        if (em_table == nullptr) {
          throw DataError("no emotion table for dialog act '" +
                          std::string(DialogAct(da).name()) + "'");
        }
        for (int em = 0; em < static_cast<int>(kNumEmotions); ++em) {
          const double p_em = (*em_table)[static_cast<std::size_t>(em)];
          if (p_em <= 0.0) continue;
          visit(s, cm, da, em, s.weight / total_weight * p_cm * p_da * p_em);
        }
      }
    }
  }
}

template <class T>
const T& pick(nn::Rng& rng, const std::vector<T>& items) {
  return items[rng.uniform_index(items.size())];
}

}  // namespace

SynthSpec parse_synth_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed synthetic spec: ") + e.what());
  }
  if (!j.is_object()) throw DataError("synthetic spec must be a JSON object");
  SynthSpec spec;
  spec.domain = parse_domain(require(j, "domain", "spec").get<std::string>());

  const json& situations = require(j, "situations", "spec");
  if (!situations.is_array() || situations.empty()) {
    throw DataError("spec.situations must be a non-empty array");
  }
  for (const auto& sj : situations) {
    SynthSituation s;
    s.name = require(sj, "name", "situation").get<std::string>();
    const std::string where = "situation '" + s.name + "'";
    s.weight = sj.value("weight", 1.0);
    s.posts = read_strings(require(sj, "posts", where), where + ".posts");
    s.post_da = DialogAct::from_name(
        require(sj, "post_da", where).get<std::string>());
    s.post_em = Emotion::from_name(
        require(sj, "post_em", where).get<std::string>());
    const json& cm = require(sj, "cm", where);
    if (!cm.is_object()) throw DataError(where + ".cm must be an object");
    for (const auto& [key, p] : cm.items()) {
      if (!p.is_number()) throw DataError(where + ".cm." + key + " must be a number");
      s.cm.emplace_back(CommMechanism::from_key(key), p.get<double>());
    }
    if (auto it = sj.find("da_given_cm"); it != sj.end()) {
      s.da_given_cm = read_da_tables(*it, where + ".da_given_cm");
    }
    spec.situations.push_back(std::move(s));
  }

  if (auto it = j.find("da_given_cm"); it != j.end()) {
    spec.da_given_cm = read_da_tables(*it, "spec.da_given_cm");
  }
  const json& em = require(j, "em_given_da", "spec");
  if (!em.is_object()) throw DataError("spec.em_given_da must be an object");
  for (const auto& [da, table] : em.items()) {
    spec.em_given_da[DialogAct::from_name(da).index()] =
        read_distribution<kNumEmotions, Emotion>(table, "em_given_da." + da);
  }
  if (auto it = j.find("em_given_da_cm"); it != j.end()) {
    for (const auto& [key, table] : it->items()) {
      const auto bar = key.find('|');
      if (bar == std::string::npos) {
        throw DataError("em_given_da_cm key '" + key + "' must be 'da|cm'");
      }
      const std::string k =
          std::string(DialogAct::from_name(key.substr(0, bar)).name()) + "|" +
          CommMechanism::from_key(key.substr(bar + 1)).key();
      spec.em_given_da_cm[k] =
          read_distribution<kNumEmotions, Emotion>(table, "em_given_da_cm." + key);
    }
  }
  const json& templates = require(j, "templates", "spec");
  if (!templates.is_object()) throw DataError("spec.templates must be an object");
  for (const auto& [key, list] : templates.items()) {
    const auto bar = key.find('|');
    if (bar == std::string::npos) {
      throw DataError("template key '" + key + "' must be 'da|em'");
    }
    const int da = DialogAct::from_name(key.substr(0, bar)).index();
    const int em = Emotion::from_name(key.substr(bar + 1)).index();
    spec.templates[{da, em}] = read_strings(list, "templates." + key);
  }
  if (auto it = j.find("cm_phrases"); it != j.end()) {
    for (const auto& [key, list] : it->items()) {
      const CommMechanism single = CommMechanism::from_key(key);
      for (std::size_t i = 0; i < kNumMechanisms; ++i) {
        if (single.get(kMechanisms[i])) {
          spec.cm_phrases[i] = read_strings(list, "cm_phrases." + key);
        }
      }
    }
  }
  validate_synth_spec(spec);
  return spec;
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synthetic spec '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_synth_spec(text.str());
}

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.situations.empty()) throw DataError("spec has no situations");
  for (const auto& s : spec.situations) {
    const std::string where = "situation '" + s.name + "'";
    if (!(s.weight > 0.0)) throw DataError(where + " needs a positive weight");
    if (s.posts.empty()) throw DataError(where + " has no posts");
    double sum = 0.0;
    for (const auto& [cm, p] : s.cm) {
      if (!(p >= 0.0)) throw DataError(where + ".cm has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw DataError(where + ".cm sums to " + std::to_string(sum) + ", not 1");
    }
    for (const auto& [key, d] : s.da_given_cm) {
      check_distribution(d, where + ".da_given_cm." + key);
    }
  }
  for (const auto& [key, d] : spec.da_given_cm) {
    check_distribution(d, "da_given_cm." + key);
  }
  for (const auto& [da, d] : spec.em_given_da) {
    check_distribution(d, "em_given_da." + std::string(DialogAct(da).name()));
  }
  for (const auto& [key, d] : spec.em_given_da_cm) {
    check_distribution(d, "em_given_da_cm." + key);
  }
  enumerate(spec, [&](const SynthSituation&, const CommMechanism&, int da,
                      int em, double) {
    if (!spec.templates.contains({da, em})) {
      throw DataError("template missing for reachable pair '" +
                      pair_name(da, em) + "'");
    }
  });
}

Corpus generate_synthetic_corpus(const SynthSpec& spec, std::size_t n,
                                 std::uint64_t seed) {
  if (n == 0) throw UsageError("n must be >= 1");
  validate_synth_spec(spec);
  std::vector<double> weights;
  for (const auto& s : spec.situations) weights.push_back(s.weight);

  nn::Rng rng(seed);
  Corpus corpus;
  corpus.reserve(n);
  const std::string prefix =
      std::string(domain_name(spec.domain)) + "-" + std::to_string(seed) + "-";
  for (std::size_t i = 0; i < n; ++i) {
    const SynthSituation& s = spec.situations[rng.categorical(weights)];
    std::vector<double> cm_weights;
    for (const auto& entry : s.cm) cm_weights.push_back(entry.second);
    const CommMechanism cm = s.cm[rng.categorical(cm_weights)].first;
    const DaDistribution& da_table = *find_da(spec, s, cm);
    const int da = static_cast<int>(rng.categorical(da_table));
    const EmDistribution& em_table = *find_em(spec, da, cm);
    const int em = static_cast<int>(rng.categorical(em_table));

    std::string text;
    auto append = [&text](const std::string& part) {
      if (!text.empty()) text += ' ';
      text += part;
    };
    for (std::size_t m = 0; m < 2; ++m) {
      if (cm.get(kMechanisms[m]) && !spec.cm_phrases[m].empty()) {
        append(pick(rng, spec.cm_phrases[m]));
      }
    }
    append(pick(rng, spec.templates.at({da, em})));
    if (cm.ex && !spec.cm_phrases[2].empty()) append(pick(rng, spec.cm_phrases[2]));

    Conversation c;
    c.id = prefix + std::to_string(i);
    c.domain = spec.domain;
    c.utterances.push_back({0, pick(rng, s.posts), s.post_da, s.post_em,
                            std::nullopt});
    c.utterances.push_back({1, text, DialogAct(da), Emotion(em), std::nullopt});
    c.response_cm = cm;
    corpus.push_back(std::move(c));
  }
  return corpus;
}

std::vector<WeightedFactors> planted_triples(const SynthSpec& spec) {
  std::vector<WeightedFactors> out;
  enumerate(spec, [&](const SynthSituation&, const CommMechanism& cm, int da,
                      int em, double p) {
    out.push_back({{cm, DialogAct(da), Emotion(em)}, p});
  });
  return out;
}

DistributionTable planted_conditional(const SynthSpec& spec, Axis x, Axis y) {
  const auto triples = planted_triples(spec);
  return conditional_distribution(std::span<const WeightedFactors>(triples), x,
                                  y);
}

}  // namespace comae::corpus
