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

#include "comae/classifier/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "comae/error.hpp"
#include "comae/nn/ops.hpp"
#include "comae/nn/rng.hpp"
#include "comae/training/checkpoint.hpp"
#include "comae/training/training.hpp"

namespace comae::classifier {
namespace {

using nn::GradientTape;
using nn::Var;

std::vector<int> encode(const TextClassifier& c, std::string_view text) {
  std::vector<int> ids = c.vocab.encode(text);
  if (ids.empty()) throw DataError("cannot classify text without tokens");
  if (ids.size() > c.encoder_config.max_positions) {
    ids.resize(c.encoder_config.max_positions);
  }
  return ids;
}

Var logits(GradientTape& tape, const TextClassifier& c, std::span<const int> ids) {
  std::vector<int> positions(ids.size());
  std::iota(positions.begin(), positions.end(), 0);
  Var x = nn::add(nn::embedding(tape, c.word, ids),
                  nn::embedding(tape, c.position, positions));
  Var pooled = nn::mean_rows(nn::run_decoder(x, c.encoder, c.encoder_config));
  return nn::linear(pooled, c.head_weight, &c.head_bias);
}

nlohmann::ordered_json config_json(const ClassifierConfig& c) {
  return {{"d_model", c.d_model},         {"layers", c.layers},
          {"heads", c.heads},             {"max_positions", c.max_positions},
          {"epochs", c.epochs},           {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps}, {"clip_norm", c.clip_norm},
          {"init_std", c.init_std},
          {"held_out_fraction", c.held_out_fraction}, {"seed", c.seed}};
}

ClassifierConfig config_from(const nlohmann::json& j) {
  ClassifierConfig c;
  c.d_model = j.at("d_model").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.warmup_steps = j.at("warmup_steps").get<std::size_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.init_std = j.at("init_std").get<double>();
  c.held_out_fraction = j.at("held_out_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

ClassifierAxis parse_classifier_axis(std::string_view name) {
  for (ClassifierAxis a : kAllAxes) {
    if (classifier_axis_name(a) == name) return a;
  }
  throw UsageError("unknown classifier axis '" + std::string(name) +
                   "' (expected cm_er, cm_ip, cm_ex, da or em)");
}

std::string_view classifier_axis_name(ClassifierAxis axis) {
  switch (axis) {
    case ClassifierAxis::cm_er: return "cm_er";
    case ClassifierAxis::cm_ip: return "cm_ip";
    case ClassifierAxis::cm_ex: return "cm_ex";
    case ClassifierAxis::da: return "da";
    case ClassifierAxis::em: return "em";
  }
  return "?";
}

std::size_t label_count(ClassifierAxis axis) {
  if (axis == ClassifierAxis::da) return kNumDialogActs;
  if (axis == ClassifierAxis::em) return kNumEmotions;
  return 2;
}

void ClassifierConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw UsageError("classifier d_model must be a positive multiple of heads");
  }
  if (layers == 0 || max_positions == 0 || epochs == 0 || batch_size == 0 ||
      warmup_steps == 0) {
    throw UsageError("classifier sizes, epochs and warmup must be positive");
  }
  if (!(learning_rate > 0.0) || !(init_std > 0.0) || !(clip_norm >= 0.0)) {
    throw UsageError("classifier learning rate and init std must be positive");
  }
  if (!(held_out_fraction > 0.0 && held_out_fraction < 1.0)) {
    throw UsageError("held_out_fraction must lie in (0, 1)");
  }
}

std::vector<nn::Parameter*> TextClassifier::parameters() {
  std::vector<nn::Parameter*> out{&word, &position};
  nn::append_parameters(encoder, out);
  out.push_back(&head_weight);
  out.push_back(&head_bias);
  return out;
}

std::vector<const nn::Parameter*> TextClassifier::parameters() const {
  auto list = const_cast<TextClassifier*>(this)->parameters();
  return {list.begin(), list.end()};
}

TextClassifier make_classifier(ClassifierAxis axis, text::Vocabulary vocab,
                               const ClassifierConfig& config) {
  config.validate();
  nn::Rng rng(config.seed);
  TextClassifier c;
  c.axis = axis;
  c.vocab = std::move(vocab);
  c.encoder_config = {config.d_model, config.layers, config.heads,
                      config.max_positions};
  c.word = nn::make_parameter("wte", c.vocab.size(), config.d_model, rng,
                              config.init_std);
  c.position = nn::make_parameter("wpe", config.max_positions, config.d_model,
                                  rng, config.init_std);
  c.encoder = nn::make_decoder(c.encoder_config, "encoder.", rng, config.init_std);
  c.head_weight = nn::make_parameter("head.w", config.d_model, label_count(axis),
                                     rng, config.init_std);
  c.head_bias = nn::make_parameter("head.b", 1, label_count(axis), rng, 0.0);
  return c;
}

std::vector<LabeledText> labeled_texts(const corpus::Corpus& corpus,
                                       ClassifierAxis axis) {
  std::vector<LabeledText> out;
  for (const auto& c : corpus) {
    switch (axis) {
      case ClassifierAxis::da:
        for (const auto& u : c.utterances) out.push_back({u.text, u.da.index()});
        break;
      case ClassifierAxis::em:
        for (const auto& u : c.utterances) out.push_back({u.text, u.em.index()});
        break;
      default: {
        const Mechanism m =
            kMechanisms[static_cast<std::size_t>(axis) -
                        static_cast<std::size_t>(ClassifierAxis::cm_er)];
        out.push_back({c.response().text, c.response_cm.get(m) ? 1 : 0});
      }
    }
  }
  return out;
}

TrainedClassifier train_classifier(std::span<const LabeledText> data,
                                   ClassifierAxis axis,
                                   const ClassifierConfig& config) {
  config.validate();
  std::set<int> labels;
  for (const auto& d : data) {
    if (d.label < 0 || static_cast<std::size_t>(d.label) >= label_count(axis)) {
      throw DataError("label " + std::to_string(d.label) + " out of range for " +
                      std::string(classifier_axis_name(axis)));
    }
    labels.insert(d.label);
  }
  if (labels.size() < 2) {
    throw DataError("classifier training data for " +
                    std::string(classifier_axis_name(axis)) +
                    " needs at least two distinct labels");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Rng rng(config.seed ^ 0xc1a55ULL);
  rng.shuffle(order);
  const std::size_t held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.held_out_fraction *
                                            static_cast<double>(data.size()))),
      1, data.size() - 1);
  const std::vector<std::size_t> held_idx(order.end() - static_cast<long>(held),
                                          order.end());
  order.resize(order.size() - held);

  std::vector<std::string> texts;
  for (std::size_t i : order) texts.push_back(data[i].text);
  TrainedClassifier out{make_classifier(axis, text::Vocabulary::build(texts),
                                        config),
                        {},
                        config};
  TextClassifier& c = out.classifier;
  std::vector<std::vector<int>> encoded(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    encoded[i] = c.vocab.encode(data[i].text);
    if (encoded[i].empty()) {
      throw DataError("classifier training text without tokens: '" +
                      data[i].text + "'");
    }
    if (encoded[i].size() > config.max_positions) {
      encoded[i].resize(config.max_positions);
    }
  }

  training::TrainingConfig schedule;
  schedule.learning_rate = config.learning_rate;
  schedule.warmup_steps = config.warmup_steps;
  schedule.total_steps =
      config.epochs * ((order.size() + config.batch_size - 1) / config.batch_size);
  auto params = c.parameters();
  training::Adam adam(params, 0.9, 0.999, 1e-8);
  std::vector<nn::Tensor> grads(params.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      GradientTape tape;
      std::optional<Var> total;
      for (std::size_t i = start; i < end; ++i) {
        const int label = data[order[i]].label;
        Var loss = nn::cross_entropy(logits(tape, c, encoded[order[i]]),
                                     std::span(&label, 1));
        total = total ? nn::add(*total, loss) : loss;
      }
      Var mean = nn::scale(*total, 1.0 / static_cast<double>(end - start));
      if (!std::isfinite(mean.scalar())) {
        throw NumericError("classifier loss became non-finite at step " +
                           std::to_string(step + 1));
      }
      tape.backward(mean);
      std::vector<nn::Tensor*> slots(params.size(), nullptr);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (const nn::Tensor* g = tape.find_param_grad(*params[i])) {
          grads[i] = *g;
          slots[i] = &grads[i];
        }
      }
      training::clip_global_norm(slots, config.clip_norm);
      const std::vector<const nn::Tensor*> const_slots(slots.begin(), slots.end());
      ++step;
      adam.step(const_slots, training::lr_at_step(step, schedule));
    }
  }

  std::vector<int> truth, predicted;
  for (std::size_t i : held_idx) {
    truth.push_back(data[i].label);
    predicted.push_back(classify(c, data[i].text).label);
  }
  out.metrics = {held, accuracy(truth, predicted), macro_f1(truth, predicted)};
  return out;
}

Classification classify(const TextClassifier& classifier, std::string_view text) {
  GradientTape tape(false);
  const auto ids = encode(classifier, text);
  Classification out;
  out.probabilities = nn::softmax(logits(tape, classifier, ids).value().row(0));
  out.label = static_cast<int>(nn::argmax(out.probabilities));
  return out;
}

double accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw UsageError("accuracy needs equally long, non-empty label lists");
  }
  std::size_t right = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) right += truth[i] == predicted[i];
  return static_cast<double>(right) / static_cast<double>(truth.size());
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw UsageError("macro-F1 needs equally long, non-empty label lists");
  }
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  double sum = 0.0;
  for (int k : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (predicted[i] == k && truth[i] == k) ++tp;
      else if (predicted[i] == k) ++fp;
      else if (truth[i] == k) ++fn;
    }
    if (tp > 0) sum += 2.0 * static_cast<double>(tp) /
                       static_cast<double>(2 * tp + fp + fn);
  }
  return sum / static_cast<double>(classes.size());
}

corpus::Corpus annotate_corpus(const corpus::Corpus& corpus,
                               const ClassifierSet& classifiers) {
  for (ClassifierAxis a : kAllAxes) {
    if (!classifiers.contains(a)) {
      throw UsageError("no classifier for axis " +
                       std::string(classifier_axis_name(a)));
    }
  }
  const TextClassifier& da = classifiers.at(ClassifierAxis::da);
  const TextClassifier& em = classifiers.at(ClassifierAxis::em);
  corpus::Corpus out = corpus;
  for (auto& c : out) {
    for (auto& u : c.utterances) {
      if (!u.original) u.original = corpus::OriginalLabels{u.da, u.em};
      u.da = DialogAct(classify(da, u.text).label);
      u.em = Emotion(classify(em, u.text).label);
    }
    if (!c.original_response_cm) c.original_response_cm = c.response_cm;
    const std::string& text = c.response().text;
    c.response_cm.er = classify(classifiers.at(ClassifierAxis::cm_er), text).label == 1;
    c.response_cm.ip = classify(classifiers.at(ClassifierAxis::cm_ip), text).label == 1;
    c.response_cm.ex = classify(classifiers.at(ClassifierAxis::cm_ex), text).label == 1;
  }
  return out;
}

void save_classifier(const std::string& path, const TrainedClassifier& trained) {
  const TextClassifier& c = trained.classifier;
  nlohmann::ordered_json header;
  header["kind"] = "comae-classifier";
  header["axis"] = classifier_axis_name(c.axis);
  header["labels"] = label_count(c.axis);
  header["config"] = config_json(trained.config);
  header["vocabulary"] = c.vocab.tokens();
  header["metrics"] = {{"held_out", trained.metrics.held_out},
                       {"accuracy", trained.metrics.accuracy},
                       {"macro_f1", trained.metrics.macro_f1}};
  training::write_container(path, std::move(header), c.parameters());
}

TrainedClassifier load_classifier(const std::string& path) {
  const training::Container container = training::read_container(path);
  const auto& h = container.header;
  if (h.value("kind", "") != "comae-classifier") {
    throw DataError("'" + path + "' is not a classifier checkpoint");
  }
  TrainedClassifier out;
  try {
    const ClassifierAxis axis =
        parse_classifier_axis(h.at("axis").get<std::string>());
    out.config = config_from(h.at("config"));
    out.classifier = make_classifier(
        axis,
        text::Vocabulary::from_tokens(
            h.at("vocabulary").get<std::vector<std::string>>()),
        out.config);
    const auto& m = h.at("metrics");
    out.metrics = {m.at("held_out").get<std::size_t>(),
                   m.at("accuracy").get<double>(),
                   m.at("macro_f1").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("classifier checkpoint '" + path + "' header: " + e.what());
  } catch (const UsageError& e) {
    throw DataError("classifier checkpoint '" + path + "' header: " + e.what());
  }
  training::restore_parameters(container, out.classifier.parameters());
  return out;
}

}  // namespace comae::classifier
