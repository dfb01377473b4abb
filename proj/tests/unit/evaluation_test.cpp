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

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "comae/corpus/synth.hpp"
#include "comae/error.hpp"
#include "comae/evaluation/evaluation.hpp"
#include "comae/nn/rng.hpp"
#include "comae/training/training.hpp"

namespace comae::evaluation {
namespace {

std::vector<std::string> words(const std::string& s) { return text::tokenize(s); }

TEST(Bleu2Test, HandCountedPair) {
  const auto hyp = words("the cat sat"), ref = words("the cat ate");
  // unigrams 2/3, bigrams 1/2, equal lengths.
  EXPECT_NEAR(bleu2(hyp, ref), std::sqrt((2.0 / 3.0) * (1.0 / 2.0)), 1e-12);
  EXPECT_NEAR(bleu2(hyp, ref), 0.5774, 1e-4);
  EXPECT_DOUBLE_EQ(bleu2(ref, ref), 1.0);
}

TEST(Bleu2Test, BrevityPenaltyFloorAndEmpty) {
  EXPECT_NEAR(bleu2(words("the cat"), words("the cat sat down")), std::exp(-1.0),
              1e-12);
  EXPECT_NEAR(bleu2(words("a b c"), words("x y z")),
              std::sqrt((1e-9 / 3.0) * (1e-9 / 2.0)), 1e-20);
  // Clipping: "the the the" against one "the".
  EXPECT_NEAR(bleu2(words("the the the"), words("the cat sat")),
              std::sqrt((1.0 / 3.0) * (1e-9 / 2.0)), 1e-15);
  EXPECT_DOUBLE_EQ(bleu2(words("yes"), words("yes")), 1.0);
  std::string warning;
  EXPECT_EQ(bleu2({}, words("a b"), &warning), 0.0);
  EXPECT_FALSE(warning.empty());
}

TEST(RougeLTest, HandLcs) {
  EXPECT_NEAR(rouge_l(words("the cat sat"), words("the cat ate"), 1.0), 2.0 / 3.0,
              1e-12);
  EXPECT_DOUBLE_EQ(rouge_l(words("a b c"), words("a b c")), 1.0);
  EXPECT_EQ(rouge_l(words("a b"), words("c d")), 0.0);
  EXPECT_EQ(rouge_l({}, words("c d")), 0.0);
  // LCS 2, P = 1, R = 1/2.
  const double b2 = 1.44;
  EXPECT_NEAR(rouge_l(words("a b"), words("a c d b")),
              (1 + b2) * 1.0 * 0.5 / (0.5 + b2 * 1.0), 1e-12);
}

TEST(TextMetricProperty, BoundedOnRandomSequences) {
  nn::Rng rng(5);
  const std::vector<std::string> alphabet{"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> h(rng.uniform_index(8)), r(1 + rng.uniform_index(8));
    for (auto& t : h) t = alphabet[rng.uniform_index(alphabet.size())];
    for (auto& t : r) t = alphabet[rng.uniform_index(alphabet.size())];
    for (double v : {bleu2(h, r), rouge_l(h, r), rouge_l(h, r, 1.0)}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
  }
}

EmbeddingTable toy_table() {
  EmbeddingTable t;
  t.add("a", {1.0, 0.0});
  t.add("b", {0.0, 1.0});
  t.add("c", {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
  t.add("z", {0.0, 0.0});
  return t;
}

TEST(GreedyMatchingTest, ToyCosines) {
  const auto t = toy_table();
  // a -> max(0, 0.7071), c -> 1; symmetric the other way.
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(greedy_matching(words("a c"), words("b c"), t), (s + 1.0) / 2.0, 1e-12);
  EXPECT_NEAR(greedy_matching(words("a c"), words("b c"), t), 0.85355, 1e-5);
  EXPECT_NEAR(greedy_matching(words("c a"), words("c b"), t),
              greedy_matching(words("a c"), words("b c"), t), 1e-15);
  EXPECT_NEAR(greedy_matching(words("a b c"), words("c b a"), t), 1.0, 1e-12);
  EXPECT_NEAR(greedy_matching(words("a"), words("b"), t), 0.0, 1e-15);
  // Unknown and zero-vector tokens are skipped.
  EXPECT_NEAR(greedy_matching(words("a q z"), words("a"), t), 1.0, 1e-12);
  EXPECT_THROW(greedy_matching(words("q z"), words("a"), t), DataError);
}

TEST(GreedyMatchingTest, LoadsTextTable) {
  const std::string path = ::testing::TempDir() + "/emb.txt";
  {
    std::ofstream out(path);
    out << "a 1 0\nb 0 1\n\nc 0.5 0.5\n";
  }
  const auto t = EmbeddingTable::load(path);
  ASSERT_NE(t.find("c"), nullptr);
  EXPECT_EQ(*t.find("c"), (std::vector<double>{0.5, 0.5}));
  {
    std::ofstream out(path);
    out << "a 1 0\nb 0 1 2\n";
  }
  EXPECT_THROW(EmbeddingTable::load(path), DataError);
  EXPECT_THROW(EmbeddingTable::load(path + ".missing"), DataError);
}

model::ComaeModel zero_model(const std::string& variant, std::size_t vocab) {
  model::ModelConfig c;
  c.vocab_size = vocab;
  c.decoder = {8, 1, 2, 64};
  c.variant = model::Variant::parse(variant);
  auto m = model::make_model(c, 3, 0.3);
  for (auto* p : m.parameters()) p->value.fill(0.0);
  return m;
}

model::Example example_with(DialogAct da, Emotion em) {
  model::Example ex;
  ex.context.push_back({{2, 3, 4}, 0, DialogAct(0), Emotion(0)});
  ex.response = {5, 6};
  ex.factors = {{true, false, false}, da, em};
  return ex;
}

TEST(PerplexityTest, UniformModelEqualsVocabularySize) {
  const auto m = zero_model("vanilla", 10);
  std::vector<model::Example> examples{example_with(DialogAct(0), Emotion(0)),
                                       example_with(DialogAct(1), Emotion(2))};
  EXPECT_NEAR(perplexity(m, examples), 10.0, 1e-9);
  EXPECT_THROW(perplexity(m, {}), DataError);
}

TEST(HitsTest, UniformEmotionHeadRanksByIndex) {
  const auto m = zero_model("da->em", 10);
  std::vector<model::Example> examples;
  for (int e = 0; e < 10; ++e) examples.push_back(example_with(DialogAct(0), Emotion(e)));
  const auto h3 = hits_at_k(m, examples, FactorAxis::da, FactorAxis::em, 3);
  EXPECT_DOUBLE_EQ(h3.hits, 0.3);
  EXPECT_DOUBLE_EQ(h3.proportion, 1.0);
  EXPECT_EQ(h3.conditioned, 10u);
  // Dialog act 1 is never the argmax of a uniform head.
  examples.push_back(example_with(DialogAct(1), Emotion(0)));
  EXPECT_NEAR(hits_at_k(m, examples, FactorAxis::da, FactorAxis::em, 3).proportion,
              10.0 / 11.0, 1e-15);
  std::vector<model::Example> none{example_with(DialogAct(4), Emotion(0))};
  EXPECT_THROW(hits_at_k(m, none, FactorAxis::da, FactorAxis::em, 1), DataError);
  EXPECT_THROW(hits_at_k(m, examples, FactorAxis::em, FactorAxis::da, 1), UsageError);
  EXPECT_THROW(hits_at_k(zero_model("+em", 10), examples, FactorAxis::da,
                         FactorAxis::em, 1),
               UsageError);
}

TEST(HitsTest, MonotoneInKAndFullAtLabelCount) {
  model::ModelConfig c;
  c.vocab_size = 12;
  c.decoder = {8, 1, 2, 64};
  c.variant = model::Variant::parse("cm->da->em");
  const auto m = model::make_model(c, 8, 0.8);
  nn::Rng rng(2);
  std::vector<model::Example> examples;
  for (int i = 0; i < 60; ++i) {
    model::Example ex;
    ex.context.push_back({{static_cast<int>(2 + rng.uniform_index(10)),
                           static_cast<int>(2 + rng.uniform_index(10))},
                          0, DialogAct(0), Emotion(0)});
    ex.response = {3};
    ex.factors = {{rng.uniform() < 0.5, rng.uniform() < 0.5, rng.uniform() < 0.5},
                  DialogAct(static_cast<int>(rng.uniform_index(9))),
                  Emotion(static_cast<int>(rng.uniform_index(10)))};
    examples.push_back(ex);
  }
  for (auto [x, y] : {std::pair{FactorAxis::cm, FactorAxis::da},
                      std::pair{FactorAxis::da, FactorAxis::em}}) {
    double prev = 0.0;
    for (std::size_t k = 1; k <= 10; ++k) {
      const double h = hits_at_k(m, examples, x, y, k).hits;
      EXPECT_GE(h, prev);
      prev = h;
    }
    EXPECT_DOUBLE_EQ(prev, 1.0);
  }
}

TEST(HitsTest, PairedReportsSharedConditioning) {
  const auto flat = zero_model("da||em", 10);
  const auto hier = zero_model("da->em", 10);
  std::vector<model::Example> examples;
  for (int e = 0; e < 10; ++e) examples.push_back(example_with(DialogAct(0), Emotion(e)));
  examples.push_back(example_with(DialogAct(3), Emotion(0)));
  const auto p = paired_hits(flat, "flat", hier, "hier", examples, FactorAxis::da,
                             FactorAxis::em);
  EXPECT_EQ(p.conditioned, 10u);
  EXPECT_NEAR(p.proportion, 10.0 / 11.0, 1e-15);
  EXPECT_DOUBLE_EQ(p.flat_hits1, 0.1);
  EXPECT_DOUBLE_EQ(p.hierarchical_hits3, 0.3);
}

TEST(RealizationTest, MatchesAndMissesAndMissingClassifier) {
  const auto vocab = text::Vocabulary::build(std::vector<std::string>{"i am so sorry"});
  classifier::ClassifierConfig cc;
  cc.d_model = 8;
  cc.layers = 1;
  classifier::ClassifierSet set;
  for (auto axis : classifier::kAllAxes) {
    set.emplace(axis, classifier::make_classifier(axis, vocab, cc));
  }
  const std::vector<std::string> texts{"i am sorry", "so sorry", "am i"};
  std::vector<Realized> right, wrong;
  for (const auto& t : texts) {
    FactorTriple seen;
    seen.cm.er = classifier::classify(set.at(classifier::ClassifierAxis::cm_er), t).label;
    seen.cm.ip = classifier::classify(set.at(classifier::ClassifierAxis::cm_ip), t).label;
    seen.cm.ex = classifier::classify(set.at(classifier::ClassifierAxis::cm_ex), t).label;
    seen.da = DialogAct(classifier::classify(set.at(classifier::ClassifierAxis::da), t).label);
    seen.em = Emotion(classifier::classify(set.at(classifier::ClassifierAxis::em), t).label);
    right.push_back({t, seen});
    FactorTriple other = seen;
    other.cm.ip = !other.cm.ip;
    other.da = DialogAct((seen.da.index() + 1) % 9);
    other.em = Emotion((seen.em.index() + 1) % 10);
    wrong.push_back({t, other});
  }
  const auto full = model::Variant::parse("cm->da->em");
  const auto r = realization_score(right, set, full);
  EXPECT_EQ(*r.cm, 1.0);
  EXPECT_EQ(*r.da, 1.0);
  EXPECT_EQ(*r.em, 1.0);
  const auto w = realization_score(wrong, set, full);
  EXPECT_EQ(*w.cm, 0.0);
  EXPECT_EQ(*w.da, 0.0);
  EXPECT_EQ(*w.em, 0.0);
  const auto da_only = realization_score(right, set, model::Variant::parse("+da"));
  EXPECT_FALSE(da_only.cm.has_value());
  EXPECT_FALSE(da_only.em.has_value());
  right.push_back({"", right.front().intended});
  EXPECT_NEAR(*realization_score(right, set, full).da, 0.75, 1e-15);
  set.erase(classifier::ClassifierAxis::em);
  EXPECT_THROW(realization_score(right, set, full), UsageError);
  EXPECT_NO_THROW(realization_score(right, set, model::Variant::parse("cm->da")));
}

TEST(EvaluateTest, PairedReportSerializesDeterministically) {
  const auto spec =
      corpus::load_synth_spec(COMAE_SOURCE_DIR "/data/specs/planted_mix.json");
  const auto data = corpus::generate_synthetic_corpus(spec, 24, 4);
  const auto vocab = training::build_vocabulary(data);
  auto make = [&](const std::string& v, std::uint64_t seed) {
    model::ModelConfig c;
    c.vocab_size = vocab.size();
    c.decoder = {8, 1, 2, 128};
    c.variant = model::Variant::parse(v);
    return model::make_model(c, seed, 0.3);
  };
  const auto flat = make("cm||da||em", 1);
  const auto hier = make("cm->da->em", 2);
  const std::vector<EvaluatedModel> models{{"flat", &flat, &vocab},
                                           {"hier", &hier, &vocab}};
  EvaluationOptions options;
  options.decode.max_new_tokens = 8;
  options.decode.seed = 11;
  const auto report = evaluate(models, data, options);
  ASSERT_EQ(report.metrics.size(), 2u);
  for (const auto& m : report.metrics) {
    EXPECT_GE(m.ppl, 1.0);
    for (double v : {m.bleu2, m.rouge_l}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(m.greedy, 1.0 + 1e-12);
  }
  for (const auto& h : report.hits) {
    EXPECT_EQ(h.flat_id, "flat");
    for (double v : {h.proportion, h.flat_hits1, h.flat_hits3, h.hierarchical_hits1,
                     h.hierarchical_hits3}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_LE(h.flat_hits1, h.flat_hits3);
  }
  const auto json = to_json(report);
  EXPECT_EQ(json, to_json(evaluate(models, data, options)));
  const auto parsed = nlohmann::json::parse(json);
  EXPECT_EQ(parsed["metrics"][1]["model_id"], "hier");
  EXPECT_EQ(parsed["metrics"][0]["split"], "test");
  std::ostringstream csv;
  write_csv(csv, report);
  EXPECT_EQ(csv.str().rfind("model_id,split,metric,value\nflat,test,ppl,", 0), 0u);

  options.realization = true;
  EXPECT_THROW(evaluate(models, data, options), UsageError);
  EXPECT_THROW(evaluate(models, {}, EvaluationOptions{}), DataError);
}

}  // namespace
}  // namespace comae::evaluation
