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
#include <unordered_map>
#include <vector>

#include "comae/classifier/classifier.hpp"
#include "comae/decoding/decoding.hpp"
#include "comae/model/model.hpp"
#include "comae/taxonomy.hpp"
#include "comae/text/vocabulary.hpp"

namespace comae::evaluation {

using Tokens = std::span<const std::string>;

// exp of the mean per-token negative log-likelihood of the responses,
// conditioned on the ground-truth factors. Throws DataError when empty.
double perplexity(const model::ComaeModel& model,
                  std::span<const model::Example> examples);

// Sentence BLEU over 1- and 2-grams with brevity penalty. A zero match
// count is replaced by 1e-9. The highest order used is capped by the
// shorter sentence, so one-token sentences are scored on unigrams.
// An empty hypothesis scores 0 and, if warning is given, sets it.
double bleu2(Tokens hypothesis, Tokens reference, std::string* warning = nullptr);

// F-measure of the longest common subsequence; 0 if either side is empty.
double rouge_l(Tokens hypothesis, Tokens reference, double beta = 1.2);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Rows of the model's word table.
  static EmbeddingTable from_model(const model::ComaeModel& model,
                                   const text::Vocabulary& vocab);
  // Text file: one "token v_1 ... v_d" line per token.
  static EmbeddingTable load(const std::string& path);

  void add(std::string token, std::vector<double> vector);
  const std::vector<double>* find(const std::string& token) const;

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Mean of the two directional averages of best cosine matches. Tokens
// without a vector are skipped; throws DataError if a side has none left.
double greedy_matching(Tokens hypothesis, Tokens reference,
                       const EmbeddingTable& embeddings);

// Argmax prediction of one factor given the ground truth of everything
// upstream of it.
bool predicts_right(const model::ComaeModel& model, const nn::Tensor& h_x,
                    FactorAxis axis, const FactorTriple& truth);
// Rank (0-based) of the true label of y in the model's distribution for
// y, conditioned on the ground truth of its upstream factors.
std::size_t truth_rank(const model::ComaeModel& model, const nn::Tensor& h_x,
                       FactorAxis y, const FactorTriple& truth);

struct HitsResult {
  double hits = 0.0;
  double proportion = 0.0;  // share of examples with X predicted right
  std::size_t conditioned = 0;
  std::size_t total = 0;
};

// Among examples whose X is predicted right, the share whose true Y ranks
// in the top k. X must be upstream of Y. Throws DataError if no example
// qualifies.
HitsResult hits_at_k(const model::ComaeModel& model,
                     std::span<const model::Example> examples, FactorAxis x,
                     FactorAxis y, std::size_t k);

struct PairedHits {
  std::string x, y;
  std::string flat_id, hierarchical_id;
  double flat_accuracy_x = 0.0;
  double hierarchical_accuracy_x = 0.0;
  // Share of examples where both models predict X right.
  double proportion = 0.0;
  std::size_t conditioned = 0;
  double flat_hits1 = 0.0, flat_hits3 = 0.0;
  double hierarchical_hits1 = 0.0, hierarchical_hits3 = 0.0;
};

// Hits@1/3 of both models over the examples where both predict X right.
PairedHits paired_hits(const model::ComaeModel& flat, const std::string& flat_id,
                       const model::ComaeModel& hierarchical,
                       const std::string& hierarchical_id,
                       std::span<const model::Example> examples, FactorAxis x,
                       FactorAxis y);

struct Realized {
  std::string text;
  FactorTriple intended;
};

struct RealizationScore {
  std::size_t responses = 0;
  std::optional<double> cm, da, em;
};

// Share of responses whose classifier reading equals the intended value,
// for each axis the variant models (cm compared as the whole triple).
// Responses without tokens count as misses. Throws UsageError if a needed
// classifier is missing.
RealizationScore realization_score(std::span<const Realized> responses,
                                   const classifier::ClassifierSet& classifiers,
                                   const model::Variant& variant);

struct SplitMetrics {
  std::string model_id;
  std::string split;
  std::size_t responses = 0;
  double ppl = 0.0;
  double bleu2 = 0.0;
  double rouge_l = 0.0;
  double greedy = 0.0;
};

struct RealizationEntry {
  std::string model_id;
  RealizationScore score;
};

struct EvalReport {
  std::vector<SplitMetrics> metrics;
  std::vector<PairedHits> hits;
  std::vector<RealizationEntry> realization;
  std::vector<std::string> warnings;
};

std::string to_json(const EvalReport& report);
// model_id,split,metric,value rows.
void write_csv(std::ostream& out, const EvalReport& report);

struct EvaluatedModel {
  std::string id;
  const model::ComaeModel* model = nullptr;
  const text::Vocabulary* vocab = nullptr;
};

struct EvaluationOptions {
  std::string split = "test";
  decoding::DecodeConfig decode;
  double rouge_beta = 1.2;
  const EmbeddingTable* embeddings = nullptr;  // default: each model's table
  const classifier::ClassifierSet* classifiers = nullptr;
  bool realization = false;
};

// Perplexity and ground-truth-factor generations scored with BLEU-2,
// ROUGE-L and greedy matching for each model; paired Hits@1/3 for every
// flat/hierarchical pair among the models; realization scores of
// predicted-factor generations when requested.
EvalReport evaluate(std::span<const EvaluatedModel> models,
                    const corpus::Corpus& corpus,
                    const EvaluationOptions& options);

}  // namespace comae::evaluation
