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
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "comae/corpus/conversation.hpp"
#include "comae/corpus/distribution.hpp"
#include "comae/error.hpp"
#include "comae/text/vocabulary.hpp"

namespace comae::corpus {
namespace {

// Minimal conversation: post by speaker 0, response by speaker 1.
Conversation make(const std::string& id, CommMechanism cm,
                  const std::string& da, const std::string& em) {
  Conversation c;
  c.id = id;
  c.utterances.push_back({0, "i got the job", DialogAct::from_name("others"),
                          Emotion::from_name("joy"), std::nullopt});
  c.utterances.push_back({1, "congrats", DialogAct::from_name(da),
                          Emotion::from_name(em), std::nullopt});
  c.response_cm = cm;
  return c;
}

CommMechanism cm_of(bool er, bool ip, bool ex) { return {er, ip, ex}; }

const char* kLine =
    R"({"id":"c1","domain":"offmychest","utterances":[)"
    R"({"speaker":0,"text":"i failed my exam .","da":"others","em":"sadness"},)"
    R"({"speaker":1,"text":"what happened ?","da":"questioning","em":"caring"}],)"
    R"("response_cm":{"er":false,"ip":false,"ex":true}})";

TEST(CorpusLoadTest, EmptyStreamIsEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(parse_corpus(in).empty());
}

TEST(CorpusLoadTest, ValidLineRoundTripsBitExact) {
  std::istringstream in(std::string(kLine) + "\n");
  const Corpus corpus = parse_corpus(in);
  ASSERT_EQ(corpus.size(), 1u);
  const Conversation& c = corpus[0];
  EXPECT_EQ(c.id, "c1");
  EXPECT_EQ(c.domain, Domain::offmychest);
  ASSERT_EQ(c.utterances.size(), 2u);
  EXPECT_EQ(c.response().da.name(), "questioning");
  EXPECT_EQ(c.response().em.name(), "caring");
  EXPECT_EQ(c.context()[0].text, "i failed my exam .");
  EXPECT_EQ(c.response_cm, cm_of(false, false, true));
  EXPECT_EQ(to_json_line(c), kLine);
}

TEST(CorpusLoadTest, UnknownDialogActNamesLineAndLabel) {
  std::string bad(kLine);
  bad.replace(bad.find("questioning"), 11, "flattering");
  std::istringstream in(std::string(kLine) + "\n\n" + bad + "\n");
  try {
    parse_corpus(in, "train.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("train.jsonl:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("flattering"), std::string::npos) << msg;
  }
}

TEST(CorpusLoadTest, SchemaViolationsAreRejected) {
  const std::string base(kLine);
  auto fails = [](const std::string& line) {
    std::istringstream in(line);
    EXPECT_THROW(parse_corpus(in), DataError) << line;
  };
  fails("{not json");
  fails(R"({"id":"x"})");
  std::string s = base;
  s.replace(s.find(R"("er":false)"), 10, R"("er":1)");
  fails(s);
  s = base;
  s.replace(s.find("offmychest"), 10, "askreddit");
  fails(s);
  s = base;
  s.replace(s.find("i failed my exam ."), 18, "");
  fails(s);
  // Response by the speaker of the first post.
  s = base;
  s.replace(s.find(R"("speaker":1)"), 11, R"("speaker":0)");
  fails(s);
}

TEST(CorpusFilterTest, RemovesByReasonAndKeepsValid) {
  Corpus corpus;
  Conversation three = make("three", cm_of(true, false, false), "consoling",
                            "caring");
  three.utterances.insert(three.utterances.begin() + 1,
                          {2, "me too", DialogAct::from_name("agreeing"),
                           Emotion::from_name("approval"), std::nullopt});
  corpus.push_back(three);
  corpus.push_back(make("none", cm_of(false, false, false), "consoling",
                        "caring"));
  corpus.push_back(make("ok", cm_of(true, false, false), "consoling", "caring"));

  const FilterResult r = filter_conversations(corpus);
  EXPECT_EQ(r.report.input, 3u);
  EXPECT_EQ(r.report.multi_speaker, 1u);
  EXPECT_EQ(r.report.no_cm, 1u);
  EXPECT_EQ(r.report.kept, 1u);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].id, "ok");
}

TEST(CorpusFilterTest, RenumbersSpeakersAndIsIdempotent) {
  Conversation c = make("a", cm_of(false, true, false), "suggesting", "caring");
  c.utterances[0].speaker = 7;
  c.utterances[1].speaker = 3;
  c.utterances.push_back({7, "thanks", DialogAct::from_name("others"),
                          Emotion::from_name("gratitude"), std::nullopt});
  c.utterances.push_back({3, "anytime", DialogAct::from_name("wishing"),
                          Emotion::from_name("caring"), std::nullopt});
  const FilterResult once = filter_conversations({c});
  ASSERT_EQ(once.kept.size(), 1u);
  const auto& u = once.kept[0].utterances;
  EXPECT_EQ(u[0].speaker, 0);
  EXPECT_EQ(u[1].speaker, 1);
  EXPECT_EQ(u[2].speaker, 0);
  EXPECT_EQ(u[3].speaker, 1);
  const FilterResult twice = filter_conversations(once.kept);
  ASSERT_EQ(twice.kept.size(), 1u);
  EXPECT_EQ(to_json_line(twice.kept[0]), to_json_line(once.kept[0]));
  EXPECT_EQ(twice.report.kept, once.report.kept);
}

TEST(DistributionTest, DeltaRow) {
  const Corpus corpus{make("a", cm_of(true, false, false), "questioning",
                           "surprise")};
  const DistributionTable t =
      conditional_distribution(corpus, Axis::da, Axis::em);
  EXPECT_DOUBLE_EQ(t.at("questioning", "surprise"), 1.0);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_EQ(t.row_empty(i), t.row_labels[i] != "questioning");
  }
}

TEST(DistributionTest, HandCountedMechanismRows) {
  const Corpus corpus{
      make("1", cm_of(true, false, false), "questioning", "caring"),
      make("2", cm_of(true, false, false), "questioning", "caring"),
      make("3", cm_of(true, false, false), "consoling", "caring"),
      make("4", cm_of(false, true, false), "consoling", "caring"),
  };
  const DistributionTable t =
      conditional_distribution(corpus, Axis::cm, Axis::da);
  EXPECT_NEAR(t.at("emotional_reaction", "questioning"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(t.at("emotional_reaction", "consoling"), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(t.at("interpretation", "consoling"), 1.0);
  EXPECT_TRUE(t.row_empty(2));

  const DistributionTable er = conditional_distribution(corpus, Axis::er,
                                                        Axis::da);
  EXPECT_DOUBLE_EQ(er.at("no", "consoling"), 1.0);
  EXPECT_NEAR(er.at("yes", "questioning"), 2.0 / 3.0, 1e-12);
  EXPECT_THROW(conditional_distribution(corpus, Axis::da, Axis::cm),
               UsageError);
}

TEST(DistributionTest, EmptyCorpusIsAnError) {
  EXPECT_THROW(conditional_distribution(Corpus{}, Axis::da, Axis::em),
               DataError);
  EXPECT_THROW(factor_marginals(Corpus{}), DataError);
}

TEST(DistributionTest, PopulatedRowsSumToOneAndJointSumsToOne) {
  Corpus corpus;
  const char* das[] = {"questioning", "consoling", "wishing", "agreeing"};
  const char* ems[] = {"caring", "joy", "sadness"};
  for (int i = 0; i < 37; ++i) {
    corpus.push_back(make(std::to_string(i),
                          cm_of(i % 2 == 0, i % 3 == 0, i % 5 == 0 || i % 2),
                          das[(i * 7) % 4], ems[(i * 5) % 3]));
  }
  for (Axis x : {Axis::cm, Axis::er, Axis::ip, Axis::ex, Axis::da, Axis::em}) {
    for (Axis y : {Axis::er, Axis::ip, Axis::ex, Axis::da, Axis::em}) {
      const DistributionTable t = conditional_distribution(corpus, x, y);
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.row_empty(i)) continue;
        double sum = 0.0;
        for (double v : t.rows[i]) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
    }
  }
  const DistributionTable j = joint_distribution(corpus, Axis::da, Axis::em);
  double total = 0.0;
  for (const auto& r : j.rows) {
    for (double v : r) total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(MarginalsTest, MechanismsCountIndependently) {
  const Corpus all_er{make("1", cm_of(true, false, false), "consoling", "caring"),
                      make("2", cm_of(true, false, false), "wishing", "joy")};
  FactorMarginals m = factor_marginals(all_er);
  EXPECT_DOUBLE_EQ(m.cm[0], 1.0);
  EXPECT_DOUBLE_EQ(m.cm[1], 0.0);
  EXPECT_DOUBLE_EQ(m.cm[2], 0.0);

  const Corpus both{make("1", cm_of(true, false, true), "consoling", "caring")};
  m = factor_marginals(both);
  EXPECT_DOUBLE_EQ(m.cm[0], 1.0);
  EXPECT_DOUBLE_EQ(m.cm[2], 1.0);
}

TEST(MarginalsTest, DialogActMarginalMatchesHandCount) {
  const Corpus corpus{
      make("1", cm_of(true, false, false), "questioning", "caring"),
      make("2", cm_of(true, false, false), "questioning", "joy"),
      make("3", cm_of(false, true, false), "consoling", "sadness"),
      make("4", cm_of(false, false, true), "questioning", "surprise"),
      make("5", cm_of(true, true, false), "wishing", "joy"),
  };
  const FactorMarginals m = factor_marginals(corpus);
  EXPECT_DOUBLE_EQ(m.da[DialogAct::from_name("questioning").index()], 0.6);
  EXPECT_DOUBLE_EQ(m.da[DialogAct::from_name("consoling").index()], 0.2);
  EXPECT_DOUBLE_EQ(m.da[DialogAct::from_name("wishing").index()], 0.2);
  double da = 0.0;
  double em = 0.0;
  for (double v : m.da) da += v;
  for (double v : m.em) em += v;
  EXPECT_NEAR(da, 1.0, 1e-12);
  EXPECT_NEAR(em, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.cm[0], 0.6);
}

TEST(DistributionExportTest, CsvLayoutWithBlankEmptyRows) {
  const Corpus corpus{make("1", cm_of(true, false, false), "questioning",
                           "caring")};
  std::ostringstream out;
  write_csv(out, conditional_distribution(corpus, Axis::er, Axis::em));
  std::istringstream lines(out.str());
  std::string header, no, yes;
  std::getline(lines, header);
  std::getline(lines, no);
  std::getline(lines, yes);
  EXPECT_EQ(header.rfind("er\\em,admiration,", 0), 0u);
  EXPECT_EQ(no, "no,,,,,,,,,,");
  EXPECT_EQ(yes, "yes,0,0,0,1,0,0,0,0,0,0");

  std::ostringstream svg;
  write_svg(svg, conditional_distribution(corpus, Axis::da, Axis::em), "P<em|da>");
  EXPECT_NE(svg.str().find("P&lt;em|da&gt;"), std::string::npos);
  EXPECT_EQ(svg.str().rfind("</svg>\n"), svg.str().size() - 7);
}

TEST(VocabularyTest, TokenizeSplitsPunctuationAndLowercases) {
  EXPECT_EQ(text::tokenize("I'm SO happy!! Really?"),
            (std::vector<std::string>{"i'm", "so", "happy", "!", "!", "really",
                                      "?"}));
  EXPECT_TRUE(text::tokenize("  \t ").empty());
}

TEST(VocabularyTest, BuildOrdersByFrequencyThenAlphabet) {
  const std::vector<std::string> texts{"b a c", "a b", "a"};
  const text::Vocabulary v = text::Vocabulary::build(texts);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<unk>", "<eos>", "a", "b",
                                                  "c"}));
  EXPECT_EQ(v.encode("c zebra a"), (std::vector<int>{4, 0, 2}));
  const std::vector<int> ids{2, 3, text::Vocabulary::kEos};
  EXPECT_EQ(v.decode(ids), "a b");
  EXPECT_THROW(text::Vocabulary::from_tokens({"a", "b"}), DataError);
  EXPECT_EQ(text::Vocabulary::from_tokens(v.tokens()).tokens(), v.tokens());
}

}  // namespace
}  // namespace comae::corpus
