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

#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "comae/classifier/classifier.hpp"
#include "comae/corpus/distribution.hpp"
#include "comae/corpus/synth.hpp"
#include "comae/error.hpp"
#include "comae/nn/rng.hpp"

namespace comae::classifier {
namespace {

ClassifierConfig small_config() {
  ClassifierConfig c;
  c.d_model = 16;
  c.layers = 1;
  c.max_positions = 48;
  c.epochs = 3;
  c.seed = 4;
  return c;
}

// Nine classes, each with its own keywords, padded with shared filler.
std::vector<LabeledText> keyword_corpus(std::size_t n, std::uint64_t seed) {
  const std::vector<std::vector<std::string>> keys{
      {"why", "how", "what"},       {"ok", "noted", "right"},
      {"agree", "exactly", "true"}, {"okay", "alright", "fine"},
      {"go", "can", "believe"},     {"sorry", "sad", "awful"},
      {"try", "should", "maybe"},   {"luck", "hope", "wish"},
      {"lol", "random", "stuff"}};
  const std::vector<std::string> filler{"the", "a", "it", "you", "so", "this"};
  nn::Rng rng(seed);
  std::vector<LabeledText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % keys.size());
    std::string text;
    for (int w = 0; w < 4; ++w) {
      const bool key = w == 1 || rng.uniform() < 0.3;
      const auto& pool = key ? keys[static_cast<std::size_t>(label)] : filler;
      text += (text.empty() ? "" : " ") + pool[rng.uniform_index(pool.size())];
    }
    out.push_back({text, label});
  }
  return out;
}

TEST(MetricsTest, MacroF1OnHandConfusionMatrix) {
  // Confusion (rows truth, cols predicted):
  //   [2 1 0]
  //   [0 3 1]
  //   [1 0 2]
  const std::vector<int> truth{0, 0, 0, 1, 1, 1, 1, 2, 2, 2};
  const std::vector<int> pred{0, 0, 1, 1, 1, 1, 2, 0, 2, 2};
  // F1: class 0 = 4/6, class 1 = 6/8, class 2 = 4/6.
  EXPECT_NEAR(macro_f1(truth, pred), (4.0 / 6 + 6.0 / 8 + 4.0 / 6) / 3, 1e-12);
  EXPECT_NEAR(accuracy(truth, pred), 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(macro_f1(truth, truth), 1.0);
  std::vector<int> balanced, constant;
  for (int i = 0; i < 90; ++i) {
    balanced.push_back(i % 9);
    constant.push_back(4);
  }
  EXPECT_NEAR(accuracy(balanced, constant), 1.0 / 9, 1e-12);
  EXPECT_THROW(accuracy({}, {}), UsageError);
}

TEST(ClassifierTest, KeywordTemplatesAreLearned) {
  const auto data = keyword_corpus(900, 1);
  const TrainedClassifier t = train_classifier(data, ClassifierAxis::da,
                                               small_config());
  EXPECT_EQ(t.metrics.held_out, 90u);
  EXPECT_GE(t.metrics.accuracy, 0.95);
  EXPECT_GE(t.metrics.macro_f1, 0.9);
  const Classification c = classify(t.classifier, "why the what");
  EXPECT_EQ(c.label, 0);
  double sum = 0.0;
  for (double p : c.probabilities) sum += p;
  EXPECT_NEAR(sum, 1.0, 1e-9);
  ASSERT_EQ(c.probabilities.size(), kNumDialogActs);
  EXPECT_EQ(static_cast<std::size_t>(c.label),
            static_cast<std::size_t>(std::max_element(c.probabilities.begin(),
                                                      c.probabilities.end()) -
                                     c.probabilities.begin()));
  EXPECT_THROW(classify(t.classifier, "   "), DataError);
}

TEST(ClassifierTest, SingleLabelDataIsRejected) {
  std::vector<LabeledText> data{{"a b", 1}, {"c d", 1}, {"e", 1}};
  EXPECT_THROW(train_classifier(data, ClassifierAxis::cm_er, small_config()),
               DataError);
  data[0].label = 2;
  EXPECT_THROW(train_classifier(data, ClassifierAxis::cm_er, small_config()),
               DataError);
}

TEST(ClassifierTest, SaveLoadKeepsPredictions) {
  const auto data = keyword_corpus(90, 2);
  TrainedClassifier t = train_classifier(data, ClassifierAxis::da, small_config());
  const auto path = (std::filesystem::temp_directory_path() /
                     "comae_classifier_test.ckpt")
                        .string();
  save_classifier(path, t);
  const TrainedClassifier back = load_classifier(path);
  EXPECT_EQ(back.classifier.axis, ClassifierAxis::da);
  EXPECT_EQ(back.metrics.accuracy, t.metrics.accuracy);
  EXPECT_EQ(back.config.epochs, 3u);
  for (const auto& d : data) {
    EXPECT_EQ(classify(back.classifier, d.text).probabilities,
              classify(t.classifier, d.text).probabilities);
  }
  std::filesystem::remove(path);
}

corpus::SynthSpec planted_mix() {
  return corpus::load_synth_spec(std::string(COMAE_SOURCE_DIR) +
                                 "/data/specs/planted_mix.json");
}

ClassifierSet train_all(const corpus::Corpus& corpus, std::size_t epochs) {
  ClassifierConfig config = small_config();
  config.epochs = epochs;
  ClassifierSet set;
  for (ClassifierAxis a : kAllAxes) {
    set.emplace(a, train_classifier(labeled_texts(corpus, a), a, config)
                       .classifier);
  }
  return set;
}

TEST(AnnotateTest, OverwritesLabelsAndKeepsOriginals) {
  corpus::Corpus corpus = corpus::generate_synthetic_corpus(planted_mix(), 300, 1);
  const ClassifierSet set = train_all(corpus, 3);
  // Corrupt the labels so the overwrite is visible.
  corpus::Corpus noisy = corpus;
  for (auto& c : noisy) {
    for (auto& u : c.utterances) u.da = DialogAct(2);
    c.response_cm = {false, true, false};
  }
  const corpus::Corpus annotated = annotate_corpus(noisy, set);
  ASSERT_EQ(annotated.size(), noisy.size());
  std::size_t restored = 0;
  for (std::size_t i = 0; i < annotated.size(); ++i) {
    for (const auto& u : annotated[i].utterances) {
      ASSERT_TRUE(u.original.has_value());
      EXPECT_EQ(u.original->da, DialogAct(2));
    }
    ASSERT_TRUE(annotated[i].original_response_cm.has_value());
    EXPECT_EQ(*annotated[i].original_response_cm, (CommMechanism{false, true, false}));
    restored += annotated[i].response_factors() == corpus[i].response_factors();
  }
  EXPECT_GE(restored, annotated.size() * 9 / 10);
  // A second pass keeps the first originals.
  const corpus::Corpus twice = annotate_corpus(annotated, set);
  EXPECT_EQ(twice[0].utterances[0].original->da, DialogAct(2));
  EXPECT_TRUE(annotate_corpus({}, set).empty());
  ClassifierSet partial = set;
  partial.erase(ClassifierAxis::cm_ip);
  EXPECT_THROW(annotate_corpus(corpus, partial), UsageError);
}

TEST(AnnotateTest, AnnotatedStatisticsRecoverPlantedTables) {
  const corpus::SynthSpec spec = planted_mix();
  const ClassifierSet set =
      train_all(corpus::generate_synthetic_corpus(spec, 1000, 3), 8);
  const corpus::Corpus big = corpus::generate_synthetic_corpus(spec, 10000, 4);
  const corpus::Corpus annotated = annotate_corpus(big, set);
  using corpus::Axis;
  const std::pair<Axis, Axis> pairs[] = {
      {Axis::cm, Axis::da}, {Axis::cm, Axis::em}, {Axis::da, Axis::em}};
  for (const auto& [x, y] : pairs) {
    const auto planted = corpus::planted_conditional(spec, x, y);
    const auto observed = corpus::conditional_distribution(annotated, x, y);
    for (std::size_t i = 0; i < planted.rows.size(); ++i) {
      if (planted.row_empty(i)) continue;
      for (std::size_t j = 0; j < planted.rows[i].size(); ++j) {
        EXPECT_NEAR(observed.rows[i][j], planted.rows[i][j], 0.03)
            << planted.row_labels[i] << " -> " << planted.col_labels[j];
      }
    }
  }
}

}  // namespace
}  // namespace comae::classifier
