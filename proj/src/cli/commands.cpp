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

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "comae/cli/cli.hpp"
#include "comae/corpus/distribution.hpp"
#include "comae/corpus/synth.hpp"
#include "comae/error.hpp"
#include "comae/evaluation/evaluation.hpp"
#include "comae/training/checkpoint.hpp"
#include "comae/util/hash.hpp"

namespace comae::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw DataError("failed writing " + path);
}

std::string sibling(const std::string& path, const std::string& suffix) {
  return path + suffix;
}

ordered_json factors_json(const FactorTriple& f) {
  return {{"cm", {{"er", f.cm.er}, {"ip", f.cm.ip}, {"ex", f.cm.ex}}},
          {"da", f.da.name()},
          {"em", f.em.name()}};
}

std::vector<std::string> unique_ids(const std::vector<std::string>& paths) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& p : paths) {
    std::string id = fs::path(p).stem().string();
    std::string candidate = id;
    for (int i = 2; seen.contains(candidate); ++i) {
      candidate = id + "-" + std::to_string(i);
    }
    seen.insert(candidate);
    ids.push_back(candidate);
  }
  return ids;
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  auto files = [](const std::vector<std::string>& paths) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : paths) {
      arr.push_back({{"path", p}, {"fnv1a64", file_checksum(p)}});
    }
    return arr;
  };
  ordered_json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["config_hash"] = to_hex(fnv1a(m.config));
  j["seed"] = m.seed;
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

std::string classifier_path(const std::string& dir, classifier::ClassifierAxis axis) {
  return (fs::path(dir) / (std::string(classifier::classifier_axis_name(axis)) + ".clf"))
      .string();
}

classifier::ClassifierSet load_classifier_set(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("no classifier directory " + dir);
  classifier::ClassifierSet set;
  for (auto axis : classifier::kAllAxes) {
    const auto path = classifier_path(dir, axis);
    if (fs::exists(path)) set.emplace(axis, classifier::load_classifier(path).classifier);
  }
  return set;
}

RunManifest cmd_synth(const SynthOptions& o) {
  RunManifest m{"synth", "n=" + std::to_string(o.n) + "\nseed=" + std::to_string(o.seed) + "\n",
                o.seed, {o.spec}, {o.out}, utc_timestamp(), ""};
  if (o.n == 0) throw UsageError("n must be >= 1");
  const auto spec = corpus::load_synth_spec(o.spec);
  corpus::validate_synth_spec(spec);
  ensure_parent(o.out);
  corpus::save_corpus(o.out, corpus::generate_synthetic_corpus(spec, o.n, o.seed));
  return m;
}

RunManifest cmd_stats(const StatsOptions& o) {
  RunManifest m{"stats", "", 0, o.corpora, {}, utc_timestamp(), ""};
  if (o.corpora.empty()) throw UsageError("stats needs at least one corpus");
  corpus::Corpus all;
  for (const auto& path : o.corpora) {
    auto part = corpus::load_corpus(path);
    all.insert(all.end(), part.begin(), part.end());
  }
  using corpus::Axis;
  const std::pair<Axis, Axis> pairs[] = {
      {Axis::cm, Axis::da}, {Axis::cm, Axis::em}, {Axis::da, Axis::em}};
  for (auto [x, y] : pairs) {
    const auto table = corpus::conditional_distribution(all, x, y);
    const std::string stem = std::string(corpus::axis_name(y)) + "_given_" +
                             std::string(corpus::axis_name(x));
    const auto base = (fs::path(o.out_dir) / stem).string();
    {
      auto out = open_out(base + ".csv");
      corpus::write_csv(out, table);
      finish(out, base + ".csv");
    }
    {
      auto out = open_out(base + ".svg");
      std::string title = "P(" + std::string(corpus::axis_name(y)) + " | " +
                          std::string(corpus::axis_name(x)) + ")";
      for (auto& ch : title) ch = static_cast<char>(std::toupper(ch));
      corpus::write_svg(out, table, title);
      finish(out, base + ".svg");
    }
    m.outputs.push_back(base + ".csv");
    m.outputs.push_back(base + ".svg");
  }
  return m;
}

RunManifest cmd_train(const TrainOptions& o, std::ostream& log) {
  const auto variant = model::Variant::parse(o.variant);
  o.config.validate();
  RunManifest m{"train", "variant=" + variant.name() + "\n" + describe(o.config),
                o.config.seed, {o.corpus}, {}, utc_timestamp(), ""};
  auto train_set = corpus::load_corpus(o.corpus);
  corpus::Corpus valid_set;
  if (o.valid.empty()) {
    const std::size_t held = std::max<std::size_t>(1, train_set.size() / 10);
    if (train_set.size() < 2) throw DataError("corpus too small to hold out validation");
    valid_set.assign(train_set.end() - static_cast<std::ptrdiff_t>(held), train_set.end());
    train_set.resize(train_set.size() - held);
  } else {
    valid_set = corpus::load_corpus(o.valid);
    m.inputs.push_back(o.valid);
  }
  const std::string metrics_path = sibling(o.out, ".metrics.csv");
  auto metrics = open_out(metrics_path);
  training::write_metrics_header(metrics);
  auto result = training::train_on_corpus(
      train_set, valid_set, variant, o.config,
      [&](const training::StepRecord& r) { training::write_metrics_row(metrics, r); });
  finish(metrics, metrics_path);
  for (const auto& e : result.epochs) {
    log << "epoch " << e.epoch << " step " << e.step << " val_ppl " << e.val_ppl << '\n';
  }
  training::save_checkpoint(o.out, result.best);
  m.outputs = {o.out, metrics_path};
  return m;
}

RunManifest cmd_train_classifier(const ClassifierOptions& o, std::ostream& log) {
  o.config.validate();
  RunManifest m{"train-classifier", describe(o.config), o.config.seed, {o.corpus},
                {}, utc_timestamp(), ""};
  const auto data = corpus::load_corpus(o.corpus);
  const auto axes = o.axes.empty()
                        ? std::vector<classifier::ClassifierAxis>(
                              std::begin(classifier::kAllAxes), std::end(classifier::kAllAxes))
                        : o.axes;
  const std::string metrics_path = (fs::path(o.out_dir) / "metrics.csv").string();
  auto metrics = open_out(metrics_path);
  metrics << "axis,held_out,accuracy,macro_f1\n";
  for (auto axis : axes) {
    const auto texts = classifier::labeled_texts(data, axis);
    const auto trained = classifier::train_classifier(texts, axis, o.config);
    const auto path = classifier_path(o.out_dir, axis);
    classifier::save_classifier(path, trained);
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g\n",
                  std::string(classifier::classifier_axis_name(axis)).c_str(),
                  trained.metrics.held_out, trained.metrics.accuracy,
                  trained.metrics.macro_f1);
    metrics << buf;
    log << classifier::classifier_axis_name(axis) << " accuracy "
        << trained.metrics.accuracy << " macro_f1 " << trained.metrics.macro_f1 << '\n';
    m.outputs.push_back(path);
  }
  finish(metrics, metrics_path);
  m.outputs.push_back(metrics_path);
  return m;
}

RunManifest cmd_annotate(const AnnotateOptions& o) {
  RunManifest m{"annotate", "", 0, {o.corpus}, {o.out}, utc_timestamp(), ""};
  const auto set = load_classifier_set(o.classifiers_dir);
  for (auto axis : classifier::kAllAxes) {
    if (set.contains(axis)) m.inputs.push_back(classifier_path(o.classifiers_dir, axis));
  }
  ensure_parent(o.out);
  corpus::save_corpus(o.out, classifier::annotate_corpus(corpus::load_corpus(o.corpus), set));
  return m;
}

RunManifest cmd_generate(const GenerateOptions& o) {
  o.decode.validate();
  RunManifest m{"generate",
                "mode=" + std::string(decoding::mode_name(o.mode)) + "\n" + describe(o.decode),
                o.decode.seed, {o.checkpoint, o.corpus}, {o.out}, utc_timestamp(), ""};
  const auto ckpt = training::load_checkpoint(o.checkpoint);
  const auto data = corpus::load_corpus(o.corpus);
  const auto examples = model::encode_corpus(data, ckpt.vocab);
  const auto& variant = ckpt.model.config.variant;
  nn::Rng rng(o.decode.seed);
  auto out = open_out(o.out);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    std::optional<FactorTriple> given;
    if (o.mode == decoding::Mode::ground_truth) given = ex.factors;
    const auto gen = decoding::generate(ckpt.model, ex.context, ex.response_speaker,
                                        o.mode, given, o.decode, rng);
    ordered_json line;
    line["id"] = data[i].id;
    line["mode"] = decoding::mode_name(o.mode);
    line["response"] = ckpt.vocab.decode(gen.tokens);
    line["stopped_at_eos"] = gen.stopped_at_eos;
    line["factors"] = factors_json(gen.factors);
    line["reference"] = {{"response", data[i].response().text},
                         {"factors", factors_json(ex.factors)}};
    if (o.mode == decoding::Mode::predicted && variant.any()) {
      ordered_json stages;
      if (variant.cm) {
        for (std::size_t k = 0; k < kNumMechanisms; ++k) {
          stages["cm"][std::string(mechanism_short_name(kMechanisms[k]))] =
              gen.stages.cm[k][1];
        }
      }
      if (variant.da) stages["da"] = gen.stages.da;
      if (variant.em) stages["em"] = gen.stages.em;
      line["stages"] = std::move(stages);
    }
    out << line.dump() << '\n';
  }
  finish(out, o.out);
  return m;
}

RunManifest cmd_evaluate(const EvaluateOptions& o) {
  o.decode.validate();
  if (o.checkpoints.empty()) throw UsageError("evaluate needs at least one checkpoint");
  const bool realization = o.realization || !o.classifiers_dir.empty();
  if (realization && o.classifiers_dir.empty()) {
    throw UsageError("realization requested but no classifier directory given");
  }
  RunManifest m{"evaluate", "split=" + o.split + "\n" + describe(o.decode),
                o.decode.seed, o.checkpoints, {}, utc_timestamp(), ""};
  m.inputs.push_back(o.corpus);

  std::vector<training::ModelCheckpoint> ckpts;
  for (const auto& p : o.checkpoints) ckpts.push_back(training::load_checkpoint(p));
  const auto ids = unique_ids(o.checkpoints);
  std::vector<evaluation::EvaluatedModel> models;
  for (std::size_t i = 0; i < ckpts.size(); ++i) {
    models.push_back({ids[i], &ckpts[i].model, &ckpts[i].vocab});
  }
  evaluation::EmbeddingTable table;
  classifier::ClassifierSet classifiers;
  evaluation::EvaluationOptions eo;
  eo.split = o.split;
  eo.decode = o.decode;
  eo.rouge_beta = o.rouge_beta;
  if (!o.embeddings.empty()) {
    table = evaluation::EmbeddingTable::load(o.embeddings);
    eo.embeddings = &table;
    m.inputs.push_back(o.embeddings);
  }
  if (realization) {
    classifiers = load_classifier_set(o.classifiers_dir);
    eo.classifiers = &classifiers;
    eo.realization = true;
    for (auto axis : classifier::kAllAxes) {
      if (classifiers.contains(axis)) {
        m.inputs.push_back(classifier_path(o.classifiers_dir, axis));
      }
    }
  }
  const auto report = evaluation::evaluate(models, corpus::load_corpus(o.corpus), eo);

  auto json_out = open_out(o.out);
  json_out << evaluation::to_json(report);
  finish(json_out, o.out);
  fs::path csv_path(o.out);
  csv_path.replace_extension(".csv");
  if (csv_path.string() == o.out) csv_path = o.out + ".csv";
  auto csv = open_out(csv_path.string());
  evaluation::write_csv(csv, report);
  finish(csv, csv_path.string());
  m.outputs = {o.out, csv_path.string()};
  return m;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Empathetic response generation with hierarchical factors"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, warmup, d_model, layers, heads,
      max_new_tokens;
  std::optional<double> lambda, lr, top_p, temperature, factor_top_p,
      factor_temperature;
  auto add_config = [&](CLI::App* s) {
    s->add_option("--config", config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "Random seed");
  };
  auto add_training = [&](CLI::App* s) {
    s->add_option("--epochs", epochs);
    s->add_option("--batch-size", batch_size);
    s->add_option("--lambda", lambda, "Weight of the factor losses");
    s->add_option("--lr", lr, "Peak learning rate");
    s->add_option("--warmup", warmup, "Warmup steps");
    s->add_option("--d-model", d_model);
    s->add_option("--layers", layers);
    s->add_option("--heads", heads);
  };
  auto add_decoding = [&](CLI::App* s) {
    s->add_option("--top-p", top_p, "Token nucleus mass");
    s->add_option("--temperature", temperature, "Token temperature");
    s->add_option("--factor-top-p", factor_top_p);
    s->add_option("--factor-temperature", factor_temperature);
    s->add_option("--max-new-tokens", max_new_tokens);
  };

  SynthOptions synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic corpus from a spec");
  s_synth->add_option("--spec", synth.spec)->required()->check(CLI::ExistingFile);
  s_synth->add_option("--n", synth.n, "Number of conversations")->required();
  s_synth->add_option("--out", synth.out)->required();
  add_config(s_synth);

  StatsOptions stats;
  auto* s_stats = app.add_subcommand("stats", "Conditional factor tables and heat maps");
  s_stats->add_option("--corpus", stats.corpora,
                      "Corpus files pooled together (default use: the training split)")
      ->required();
  s_stats->add_option("--out", stats.out_dir, "Output directory")->required();

  TrainOptions train;
  auto* s_train = app.add_subcommand("train", "Train one model variant");
  s_train->add_option("--corpus", train.corpus)->required();
  s_train->add_option("--valid", train.valid, "Validation corpus");
  s_train->add_option("--variant", train.variant)->required();
  s_train->add_option("--out", train.out)->required();
  add_config(s_train);
  add_training(s_train);

  ClassifierOptions clf;
  std::vector<std::string> clf_axes;
  auto* s_clf = app.add_subcommand("train-classifier", "Train factor classifiers");
  s_clf->add_option("--corpus", clf.corpus)->required();
  s_clf->add_option("--axis", clf_axes, "cm_er, cm_ip, cm_ex, da or em (default: all)");
  s_clf->add_option("--out", clf.out_dir, "Output directory")->required();
  add_config(s_clf);
  add_training(s_clf);

  AnnotateOptions ann;
  auto* s_ann = app.add_subcommand("annotate", "Relabel a corpus with classifiers");
  s_ann->add_option("--corpus", ann.corpus)->required();
  s_ann->add_option("--classifiers", ann.classifiers_dir)->required();
  s_ann->add_option("--out", ann.out)->required();

  GenerateOptions gen;
  std::string mode = "predicted";
  auto* s_gen = app.add_subcommand("generate", "Sample responses");
  s_gen->add_option("--checkpoint", gen.checkpoint)->required();
  s_gen->add_option("--corpus", gen.corpus)->required();
  s_gen->add_option("--mode", mode, "ground_truth or predicted");
  s_gen->add_option("--out", gen.out)->required();
  add_config(s_gen);
  add_decoding(s_gen);

  EvaluateOptions ev;
  auto* s_ev = app.add_subcommand("evaluate", "Score checkpoints on a corpus");
  s_ev->add_option("--checkpoint", ev.checkpoints)->required();
  s_ev->add_option("--corpus", ev.corpus)->required();
  s_ev->add_option("--split", ev.split, "Split label for the report");
  s_ev->add_option("--classifiers", ev.classifiers_dir);
  s_ev->add_flag("--realization", ev.realization);
  s_ev->add_option("--embeddings", ev.embeddings, "Word vector text file");
  s_ev->add_option("--rouge-beta", ev.rouge_beta);
  s_ev->add_option("--out", ev.out)->required();
  add_config(s_ev);
  add_decoding(s_ev);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err) == 0 ? 0 : 1;
    }

    Settings settings;
    if (!config_path.empty()) apply_config(load_config(config_path), settings);
    auto& tc = settings.training;
    auto& dc = settings.decode;
    auto& cc = settings.classifier;
    if (seed) tc.seed = dc.seed = cc.seed = *seed;
    if (epochs) tc.epochs = cc.epochs = *epochs;
    if (batch_size) tc.batch_size = cc.batch_size = *batch_size;
    if (lambda) tc.lambda = *lambda;
    if (lr) tc.learning_rate = cc.learning_rate = *lr;
    if (warmup) tc.warmup_steps = cc.warmup_steps = *warmup;
    if (d_model) tc.d_model = cc.d_model = *d_model;
    if (layers) tc.layers = cc.layers = *layers;
    if (heads) tc.heads = cc.heads = *heads;
    if (top_p) dc.token_top_p = *top_p;
    if (temperature) dc.temperature = *temperature;
    if (factor_top_p) dc.factor_top_p = *factor_top_p;
    if (factor_temperature) dc.factor_temperature = *factor_temperature;
    if (max_new_tokens) dc.max_new_tokens = *max_new_tokens;

    RunManifest manifest;
    std::string manifest_path;
    if (s_synth->parsed()) {
      synth.seed = tc.seed;
      manifest = cmd_synth(synth);
      manifest_path = sibling(synth.out, ".manifest.json");
    } else if (s_stats->parsed()) {
      manifest = cmd_stats(stats);
      manifest_path = (fs::path(stats.out_dir) / "manifest.json").string();
    } else if (s_train->parsed()) {
      train.config = tc;
      manifest = cmd_train(train, out);
      manifest_path = sibling(train.out, ".manifest.json");
    } else if (s_clf->parsed()) {
      for (const auto& a : clf_axes) clf.axes.push_back(classifier::parse_classifier_axis(a));
      clf.config = cc;
      manifest = cmd_train_classifier(clf, out);
      manifest_path = (fs::path(clf.out_dir) / "manifest.json").string();
    } else if (s_ann->parsed()) {
      manifest = cmd_annotate(ann);
      manifest_path = sibling(ann.out, ".manifest.json");
    } else if (s_gen->parsed()) {
      gen.mode = decoding::parse_mode(mode);
      gen.decode = dc;
      manifest = cmd_generate(gen);
      manifest_path = sibling(gen.out, ".manifest.json");
    } else if (s_ev->parsed()) {
      ev.decode = dc;
      manifest = cmd_evaluate(ev);
      manifest_path = sibling(ev.out, ".manifest.json");
    }
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest_path, manifest);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::usage: return 1;
      case ErrorKind::data: return 2;
      case ErrorKind::numeric: return 3;
    }
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace comae::cli
