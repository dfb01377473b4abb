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
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "comae/corpus/conversation.hpp"
#include "comae/nn/decoder.hpp"
#include "comae/text/vocabulary.hpp"

namespace comae::classifier {

// cm_* are binary (label 1 = mechanism present).
enum class ClassifierAxis { cm_er, cm_ip, cm_ex, da, em };

ClassifierAxis parse_classifier_axis(std::string_view name);
std::string_view classifier_axis_name(ClassifierAxis axis);
std::size_t label_count(ClassifierAxis axis);
inline constexpr ClassifierAxis kAllAxes[] = {
    ClassifierAxis::cm_er, ClassifierAxis::cm_ip, ClassifierAxis::cm_ex,
    ClassifierAxis::da, ClassifierAxis::em};

struct ClassifierConfig {
  std::size_t d_model = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t max_positions = 128;
  std::size_t epochs = 4;
  std::size_t batch_size = 16;
  double learning_rate = 3e-3;
  std::size_t warmup_steps = 10;
  double clip_norm = 1.0;
  double init_std = 0.02;
  double held_out_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// Token and position embeddings, decoder blocks, mean pooling over
// positions and an affine layer onto the labels.
struct TextClassifier {
  ClassifierAxis axis = ClassifierAxis::da;
  text::Vocabulary vocab;
  nn::DecoderConfig encoder_config;
  nn::Parameter word, position;
  nn::Decoder encoder;
  nn::Parameter head_weight, head_bias;

  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
};

TextClassifier make_classifier(ClassifierAxis axis, text::Vocabulary vocab,
                               const ClassifierConfig& config);

struct LabeledText {
  std::string text;
  int label = 0;
};

// da/em: every utterance; cm_*: final responses only.
std::vector<LabeledText> labeled_texts(const corpus::Corpus& corpus,
                                       ClassifierAxis axis);

struct ClassifierMetrics {
  std::size_t held_out = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct TrainedClassifier {
  TextClassifier classifier;
  ClassifierMetrics metrics;
  ClassifierConfig config;
};

// Shuffles with the seed, holds out a fraction for the reported metrics
// and trains with Adam on cross-entropy. Throws DataError if fewer than
// two distinct labels occur.
TrainedClassifier train_classifier(std::span<const LabeledText> data,
                                   ClassifierAxis axis,
                                   const ClassifierConfig& config);

struct Classification {
  int label = 0;
  std::vector<double> probabilities;
};

// Throws DataError on text without tokens.
Classification classify(const TextClassifier& classifier, std::string_view text);

double accuracy(std::span<const int> truth, std::span<const int> predicted);
// Unweighted mean of per-class F1 over the classes that occur in truth or
// predictions.
double macro_f1(std::span<const int> truth, std::span<const int> predicted);

using ClassifierSet = std::map<ClassifierAxis, TextClassifier>;

// Replaces every utterance's act and emotion and every response's mechanism
// triple with predictions. The first labels an item carried are kept as
// its original labels. Throws UsageError if an axis has no classifier.
corpus::Corpus annotate_corpus(const corpus::Corpus& corpus,
                               const ClassifierSet& classifiers);

void save_classifier(const std::string& path, const TrainedClassifier& trained);
TrainedClassifier load_classifier(const std::string& path);

}  // namespace comae::classifier
