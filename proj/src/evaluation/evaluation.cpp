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

#include "comae/evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "comae/error.hpp"
#include "comae/training/training.hpp"

namespace comae::evaluation {
namespace {

constexpr double kSmoothing = 1e-9;

double clipped_precision(Tokens hyp, Tokens ref, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> ref_counts;
  for (std::size_t i = 0; i + n <= ref.size(); ++i) {
    ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
  }
  std::map<std::vector<std::string>, std::size_t> hyp_counts;
  for (std::size_t i = 0; i + n <= hyp.size(); ++i) {
    ++hyp_counts[{hyp.begin() + i, hyp.begin() + i + n}];
  }
  std::size_t matched = 0;
  for (const auto& [gram, count] : hyp_counts) {
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matched += std::min(count, it->second);
  }
  double total = static_cast<double>(hyp.size() - n + 1);
  if (matched == 0) return kSmoothing / total;
  return static_cast<double>(matched) / total;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::vector<const std::vector<double>*> resolve(Tokens tokens,
                                                const EmbeddingTable& table) {
  std::vector<const std::vector<double>*> out;
  for (const auto& t : tokens) {
    const auto* v = table.find(t);
    if (v != nullptr) {
      bool zero = std::all_of(v->begin(), v->end(), [](double x) { return x == 0.0; });
      if (!zero) out.push_back(v);
    }
  }
  return out;
}

double directional(const std::vector<const std::vector<double>*>& from,
                   const std::vector<const std::vector<double>*>& to) {
  double sum = 0.0;
  for (const auto* a : from) {
    double best = -1.0;
    for (const auto* b : to) best = std::max(best, cosine(*a, *b));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

std::size_t argmax(std::span<const double> p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

bool models_axis(const model::Variant& v, FactorAxis axis) {
  switch (axis) {
    case FactorAxis::cm: return v.cm;
    case FactorAxis::da: return v.da;
    case FactorAxis::em: return v.em;
  }
  return false;
}

int axis_order(FactorAxis axis) { return static_cast<int>(axis); }

void check_pair(const model::ComaeModel& model, FactorAxis x, FactorAxis y) {
  if (axis_order(x) >= axis_order(y)) {
    throw UsageError("hits pair must run downstream, got " +
                     std::string(factor_axis_name(x)) + "->" +
                     std::string(factor_axis_name(y)));
  }
  const auto& v = model.config.variant;
  if (!models_axis(v, x) || !models_axis(v, y)) {
    throw UsageError("variant " + v.name() + " does not predict both " +
                     std::string(factor_axis_name(x)) + " and " +
                     std::string(factor_axis_name(y)));
  }
}

std::vector<double> y_distribution(const model::ComaeModel& model,
                                   const nn::Tensor& h_x, FactorAxis y,
                                   const FactorTriple& truth) {
  if (y == FactorAxis::da) return model::predict_da(model, h_x, truth.cm);
  return model::predict_em(model, h_x, truth.cm, truth.da);
}

std::size_t label_index(FactorAxis axis, const FactorTriple& t) {
  return static_cast<std::size_t>(axis == FactorAxis::da ? t.da.index()
                                                         : t.em.index());
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

CommMechanism read_cm(const classifier::ClassifierSet& set, const std::string& text) {
  CommMechanism cm;
  const classifier::ClassifierAxis axes[] = {classifier::ClassifierAxis::cm_er,
                                             classifier::ClassifierAxis::cm_ip,
                                             classifier::ClassifierAxis::cm_ex};
  for (std::size_t i = 0; i < kNumMechanisms; ++i) {
    cm.set(kMechanisms[i], classifier::classify(set.at(axes[i]), text).label == 1);
  }
  return cm;
}

void require(const classifier::ClassifierSet& set, classifier::ClassifierAxis axis) {
  if (!set.contains(axis)) {
    throw UsageError("missing classifier for axis " +
                     std::string(classifier::classifier_axis_name(axis)));
  }
}

}  // namespace

double perplexity(const model::ComaeModel& model,
                  std::span<const model::Example> examples) {
  return training::perplexity(model, examples);
}

double bleu2(Tokens hypothesis, Tokens reference, std::string* warning) {
  if (hypothesis.empty()) {
    if (warning != nullptr) *warning = "empty hypothesis scored as 0";
    return 0.0;
  }
  if (reference.empty()) return 0.0;
  std::size_t order = std::min<std::size_t>({2, hypothesis.size(), reference.size()});
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    log_sum += std::log(clipped_precision(hypothesis, reference, n));
  }
  double h = static_cast<double>(hypothesis.size());
  double r = static_cast<double>(reference.size());
  double bp = h >= r ? 1.0 : std::exp(1.0 - r / h);
  return bp * std::exp(log_sum / static_cast<double>(order));
}

double rouge_l(Tokens hypothesis, Tokens reference, double beta) {
  if (hypothesis.empty() || reference.empty()) return 0.0;
  std::vector<std::size_t> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
  for (std::size_t i = 1; i <= hypothesis.size(); ++i) {
    for (std::size_t j = 1; j <= reference.size(); ++j) {
      cur[j] = hypothesis[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                     : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  double lcs = static_cast<double>(prev[reference.size()]);
  if (lcs == 0.0) return 0.0;
  double p = lcs / static_cast<double>(hypothesis.size());
  double r = lcs / static_cast<double>(reference.size());
  double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

EmbeddingTable EmbeddingTable::from_model(const model::ComaeModel& model,
                                          const text::Vocabulary& vocab) {
  const auto& w = model.word.value;
  if (w.rows() != vocab.size()) {
    throw DataError("vocabulary size does not match the word table");
  }
  EmbeddingTable table;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i == static_cast<std::size_t>(text::Vocabulary::kUnk) ||
        i == static_cast<std::size_t>(text::Vocabulary::kEos)) {
      continue;
    }
    auto row = w.row(i);
    table.add(vocab.token(static_cast<int>(i)), {row.begin(), row.end()});
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding table " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0, dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> v;
    double x;
    while (fields >> x) v.push_back(x);
    if (!fields.eof() || v.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed vector");
    }
    if (dim == 0) dim = v.size();
    if (v.size() != dim) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values");
    }
    table.add(std::move(token), std::move(v));
  }
  return table;
}

void EmbeddingTable::add(std::string token, std::vector<double> vector) {
  vectors_[std::move(token)] = std::move(vector);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

double greedy_matching(Tokens hypothesis, Tokens reference,
                       const EmbeddingTable& embeddings) {
  auto hyp = resolve(hypothesis, embeddings);
  auto ref = resolve(reference, embeddings);
  if (hyp.empty() || ref.empty()) {
    throw DataError("greedy matching: no known tokens on one side");
  }
  return 0.5 * (directional(hyp, ref) + directional(ref, hyp));
}

bool predicts_right(const model::ComaeModel& model, const nn::Tensor& h_x,
                    FactorAxis axis, const FactorTriple& truth) {
  switch (axis) {
    case FactorAxis::cm:
      return model::argmax_cm(model::predict_cm(model, h_x)) == truth.cm;
    case FactorAxis::da:
      return static_cast<int>(argmax(model::predict_da(model, h_x, truth.cm))) ==
             truth.da.index();
    case FactorAxis::em:
      return static_cast<int>(argmax(model::predict_em(model, h_x, truth.cm,
                                                       truth.da))) ==
             truth.em.index();
  }
  return false;
}

std::size_t truth_rank(const model::ComaeModel& model, const nn::Tensor& h_x,
                       FactorAxis y, const FactorTriple& truth) {
  if (y == FactorAxis::cm) throw UsageError("cm has no ranked distribution");
  auto p = y_distribution(model, h_x, y, truth);
  std::size_t target = label_index(y, truth);
  std::size_t rank = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > p[target] || (p[i] == p[target] && i < target)) ++rank;
  }
  return rank;
}

HitsResult hits_at_k(const model::ComaeModel& model,
                     std::span<const model::Example> examples, FactorAxis x,
                     FactorAxis y, std::size_t k) {
  check_pair(model, x, y);
  HitsResult out;
  out.total = examples.size();
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    auto enc = model::encode_context(model, ex.context);
    if (!predicts_right(model, enc.h_x, x, ex.factors)) continue;
    ++out.conditioned;
    if (truth_rank(model, enc.h_x, y, ex.factors) < k) ++hits;
  }
  if (out.conditioned == 0) {
    throw DataError("no example has " + std::string(factor_axis_name(x)) +
                    " predicted right");
  }
  out.hits = static_cast<double>(hits) / static_cast<double>(out.conditioned);
  out.proportion =
      static_cast<double>(out.conditioned) / static_cast<double>(out.total);
  return out;
}

PairedHits paired_hits(const model::ComaeModel& flat, const std::string& flat_id,
                       const model::ComaeModel& hierarchical,
                       const std::string& hierarchical_id,
                       std::span<const model::Example> examples, FactorAxis x,
                       FactorAxis y) {
  check_pair(flat, x, y);
  check_pair(hierarchical, x, y);
  if (examples.empty()) throw DataError("no examples for hits");
  PairedHits out;
  out.x = factor_axis_name(x);
  out.y = factor_axis_name(y);
  out.flat_id = flat_id;
  out.hierarchical_id = hierarchical_id;
  std::size_t flat_right = 0, hier_right = 0;
  std::size_t f1 = 0, f3 = 0, h1 = 0, h3 = 0;
  for (const auto& ex : examples) {
    auto fe = model::encode_context(flat, ex.context);
    auto he = model::encode_context(hierarchical, ex.context);
    bool fr = predicts_right(flat, fe.h_x, x, ex.factors);
    bool hr = predicts_right(hierarchical, he.h_x, x, ex.factors);
    flat_right += fr;
    hier_right += hr;
    if (!(fr && hr)) continue;
    ++out.conditioned;
    std::size_t fk = truth_rank(flat, fe.h_x, y, ex.factors);
    std::size_t hk = truth_rank(hierarchical, he.h_x, y, ex.factors);
    f1 += fk < 1;
    f3 += fk < 3;
    h1 += hk < 1;
    h3 += hk < 3;
  }
  double n = static_cast<double>(examples.size());
  out.flat_accuracy_x = static_cast<double>(flat_right) / n;
  out.hierarchical_accuracy_x = static_cast<double>(hier_right) / n;
  out.proportion = static_cast<double>(out.conditioned) / n;
  if (out.conditioned == 0) {
    throw DataError("no example has " + out.x + " predicted right by both models");
  }
  double c = static_cast<double>(out.conditioned);
  out.flat_hits1 = static_cast<double>(f1) / c;
  out.flat_hits3 = static_cast<double>(f3) / c;
  out.hierarchical_hits1 = static_cast<double>(h1) / c;
  out.hierarchical_hits3 = static_cast<double>(h3) / c;
  return out;
}

RealizationScore realization_score(std::span<const Realized> responses,
                                   const classifier::ClassifierSet& classifiers,
                                   const model::Variant& variant) {
  using classifier::ClassifierAxis;
  if (variant.cm) {
    require(classifiers, ClassifierAxis::cm_er);
    require(classifiers, ClassifierAxis::cm_ip);
    require(classifiers, ClassifierAxis::cm_ex);
  }
  if (variant.da) require(classifiers, ClassifierAxis::da);
  if (variant.em) require(classifiers, ClassifierAxis::em);
  if (responses.empty()) throw DataError("no responses to score");

  RealizationScore out;
  out.responses = responses.size();
  std::size_t cm = 0, da = 0, em = 0;
  for (const auto& r : responses) {
    if (text::tokenize(r.text).empty()) continue;
    if (variant.cm && read_cm(classifiers, r.text) == r.intended.cm) ++cm;
    if (variant.da &&
        classifier::classify(classifiers.at(ClassifierAxis::da), r.text).label ==
            r.intended.da.index()) {
      ++da;
    }
    if (variant.em &&
        classifier::classify(classifiers.at(ClassifierAxis::em), r.text).label ==
            r.intended.em.index()) {
      ++em;
    }
  }
  double n = static_cast<double>(responses.size());
  if (variant.cm) out.cm = static_cast<double>(cm) / n;
  if (variant.da) out.da = static_cast<double>(da) / n;
  if (variant.em) out.em = static_cast<double>(em) / n;
  return out;
}

std::string to_json(const EvalReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["metrics"] = ordered_json::array();
  for (const auto& m : report.metrics) {
    j["metrics"].push_back({{"model_id", m.model_id},
                            {"split", m.split},
                            {"responses", m.responses},
                            {"ppl", m.ppl},
                            {"bleu2", m.bleu2},
                            {"rouge_l", m.rouge_l},
                            {"greedy", m.greedy}});
  }
  j["hits"] = ordered_json::array();
  for (const auto& h : report.hits) {
    j["hits"].push_back({{"x", h.x},
                         {"y", h.y},
                         {"flat_model", h.flat_id},
                         {"hierarchical_model", h.hierarchical_id},
                         {"flat_accuracy_x", h.flat_accuracy_x},
                         {"hierarchical_accuracy_x", h.hierarchical_accuracy_x},
                         {"proportion", h.proportion},
                         {"conditioned", h.conditioned},
                         {"flat_hits1", h.flat_hits1},
                         {"flat_hits3", h.flat_hits3},
                         {"hierarchical_hits1", h.hierarchical_hits1},
                         {"hierarchical_hits3", h.hierarchical_hits3}});
  }
  j["realization"] = ordered_json::array();
  for (const auto& r : report.realization) {
    ordered_json e{{"model_id", r.model_id}, {"responses", r.score.responses}};
    auto put = [&](const char* key, const std::optional<double>& v) {
      e[key] = v ? ordered_json(*v) : ordered_json(nullptr);
    };
    put("cm", r.score.cm);
    put("da", r.score.da);
    put("em", r.score.em);
    j["realization"].push_back(std::move(e));
  }
  j["warnings"] = report.warnings;
  return j.dump(2) + "\n";
}

void write_csv(std::ostream& out, const EvalReport& report) {
  char buf[64];
  auto row = [&](const std::string& model, const std::string& split,
                 const std::string& metric, double value) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out << model << ',' << split << ',' << metric << ',' << buf << '\n';
  };
  out << "model_id,split,metric,value\n";
  for (const auto& m : report.metrics) {
    row(m.model_id, m.split, "ppl", m.ppl);
    row(m.model_id, m.split, "bleu2", m.bleu2);
    row(m.model_id, m.split, "rouge_l", m.rouge_l);
    row(m.model_id, m.split, "greedy", m.greedy);
  }
  std::string split = report.metrics.empty() ? "" : report.metrics.front().split;
  for (const auto& h : report.hits) {
    std::string pair = h.x + "_" + h.y;
    row(h.flat_id, split, "hits1." + pair + ".vs." + h.hierarchical_id, h.flat_hits1);
    row(h.flat_id, split, "hits3." + pair + ".vs." + h.hierarchical_id, h.flat_hits3);
    row(h.hierarchical_id, split, "hits1." + pair + ".vs." + h.flat_id,
        h.hierarchical_hits1);
    row(h.hierarchical_id, split, "hits3." + pair + ".vs." + h.flat_id,
        h.hierarchical_hits3);
    row(h.hierarchical_id, split, "prop." + pair + ".vs." + h.flat_id, h.proportion);
  }
  for (const auto& r : report.realization) {
    if (r.score.cm) row(r.model_id, split, "realization.cm", *r.score.cm);
    if (r.score.da) row(r.model_id, split, "realization.da", *r.score.da);
    if (r.score.em) row(r.model_id, split, "realization.em", *r.score.em);
  }
}

EvalReport evaluate(std::span<const EvaluatedModel> models,
                    const corpus::Corpus& corpus,
                    const EvaluationOptions& options) {
  options.decode.validate();
  if (corpus.empty()) throw DataError("evaluation corpus is empty");
  if (models.empty()) throw UsageError("no model to evaluate");
  if (options.realization && options.classifiers == nullptr) {
    throw UsageError("realization requested but no classifiers given");
  }

  EvalReport report;
  std::vector<std::vector<model::Example>> encoded;
  for (const auto& m : models) {
    encoded.push_back(model::encode_corpus(corpus, *m.vocab));
  }

  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto& m = models[mi];
    const auto& examples = encoded[mi];
    EmbeddingTable own;
    const EmbeddingTable* table = options.embeddings;
    if (table == nullptr) {
      own = EmbeddingTable::from_model(*m.model, *m.vocab);
      table = &own;
    }

    SplitMetrics sm;
    sm.model_id = m.id;
    sm.split = options.split;
    sm.responses = examples.size();
    sm.ppl = perplexity(*m.model, examples);

    nn::Rng rng(options.decode.seed);
    std::vector<double> b, r, g;
    std::size_t empty = 0, unmatched = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto& ex = examples[i];
      auto gen = decoding::generate(*m.model, ex.context, ex.response_speaker,
                                    decoding::Mode::ground_truth, ex.factors,
                                    options.decode, rng);
      auto hyp = text::tokenize(m.vocab->decode(gen.tokens));
      auto ref = text::tokenize(corpus[i].response().text);
      std::string warning;
      b.push_back(bleu2(hyp, ref, &warning));
      if (!warning.empty()) ++empty;
      r.push_back(rouge_l(hyp, ref, options.rouge_beta));
      try {
        g.push_back(greedy_matching(hyp, ref, *table));
      } catch (const DataError&) {
        g.push_back(0.0);
        ++unmatched;
      }
    }
    sm.bleu2 = mean(b);
    sm.rouge_l = mean(r);
    sm.greedy = mean(g);
    if (empty > 0) {
      report.warnings.push_back(m.id + ": " + std::to_string(empty) +
                                " empty hypotheses scored as 0");
    }
    if (unmatched > 0) {
      report.warnings.push_back(m.id + ": " + std::to_string(unmatched) +
                                " responses without known tokens scored 0 on greedy");
    }
    report.metrics.push_back(std::move(sm));

    if (options.realization && m.model->config.variant.any()) {
      nn::Rng prng(options.decode.seed);
      std::vector<Realized> realized;
      for (const auto& ex : examples) {
        auto gen = decoding::generate(*m.model, ex.context, ex.response_speaker,
                                      decoding::Mode::predicted, std::nullopt,
                                      options.decode, prng);
        realized.push_back({m.vocab->decode(gen.tokens), gen.factors});
      }
      report.realization.push_back(
          {m.id, realization_score(realized, *options.classifiers,
                                   m.model->config.variant)});
    }
  }

  const FactorAxis pairs[][2] = {{FactorAxis::cm, FactorAxis::da},
                                 {FactorAxis::cm, FactorAxis::em},
                                 {FactorAxis::da, FactorAxis::em}};
  for (std::size_t fi = 0; fi < models.size(); ++fi) {
    const auto& fv = models[fi].model->config.variant;
    if (fv.hierarchical) continue;
    for (std::size_t hi = 0; hi < models.size(); ++hi) {
      const auto& hv = models[hi].model->config.variant;
      if (!hv.hierarchical) continue;
      if (models[fi].vocab->tokens() != models[hi].vocab->tokens()) {
        report.warnings.push_back(models[fi].id + " and " + models[hi].id +
                                  ": vocabularies differ, hits not paired");
        continue;
      }
      for (const auto& p : pairs) {
        if (!models_axis(fv, p[0]) || !models_axis(fv, p[1]) ||
            !models_axis(hv, p[0]) || !models_axis(hv, p[1])) {
          continue;
        }
        try {
          report.hits.push_back(paired_hits(*models[fi].model, models[fi].id,
                                            *models[hi].model, models[hi].id,
                                            encoded[fi], p[0], p[1]));
        } catch (const DataError& e) {
          report.warnings.push_back(models[fi].id + " vs " + models[hi].id + ": " +
                                    e.what());
        }
      }
    }
  }
  return report;
}

}  // namespace comae::evaluation
