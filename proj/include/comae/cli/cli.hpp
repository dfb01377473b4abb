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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "comae/classifier/classifier.hpp"
#include "comae/decoding/decoding.hpp"
#include "comae/training/training.hpp"

namespace comae::cli {

// Config files hold one "key = value" pair per line; '#' starts a comment.
// Keys are the field names of TrainingConfig and DecodeConfig (token_top_p
// may be written top_p) and, prefixed with "classifier.", of
// ClassifierConfig. Flags given on the command line win over file values.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config(std::istream& in, const std::string& source = "<config>");
KeyValues load_config(const std::string& path);

struct Settings {
  training::TrainingConfig training;
  decoding::DecodeConfig decode;
  classifier::ClassifierConfig classifier;
};

// Throws UsageError on an unknown key or a malformed value.
void apply_config(const KeyValues& values, Settings& settings);

// Canonical key=value text of every resolved field.
std::string describe(const training::TrainingConfig& config);
std::string describe(const decoding::DecodeConfig& config);
std::string describe(const classifier::ClassifierConfig& config);

struct RunManifest {
  std::string command;
  std::string config;  // canonical key=value text
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;
};

std::string utc_timestamp();
// Checksums are taken from the files when the manifest is written.
void write_manifest(const std::string& path, const RunManifest& manifest);

struct SynthOptions {
  std::string spec;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

struct StatsOptions {
  std::vector<std::string> corpora;
  std::string out_dir;
};

struct TrainOptions {
  std::string corpus;
  std::string valid;  // empty: the last tenth of the corpus is held out
  std::string variant;
  training::TrainingConfig config;
  std::string out;
};

struct ClassifierOptions {
  std::string corpus;
  std::vector<classifier::ClassifierAxis> axes;
  classifier::ClassifierConfig config;
  std::string out_dir;
};

struct AnnotateOptions {
  std::string corpus;
  std::string classifiers_dir;
  std::string out;
};

struct GenerateOptions {
  std::string checkpoint;
  std::string corpus;
  decoding::Mode mode = decoding::Mode::predicted;
  decoding::DecodeConfig decode;
  std::string out;
};

struct EvaluateOptions {
  std::vector<std::string> checkpoints;
  std::string corpus;
  std::string split = "test";
  std::string classifiers_dir;
  bool realization = false;
  std::string embeddings;
  double rouge_beta = 1.2;
  decoding::DecodeConfig decode;
  std::string out;  // JSON report; the CSV goes next to it
};

RunManifest cmd_synth(const SynthOptions& options);
RunManifest cmd_stats(const StatsOptions& options);
RunManifest cmd_train(const TrainOptions& options, std::ostream& log);
RunManifest cmd_train_classifier(const ClassifierOptions& options,
                                 std::ostream& log);
RunManifest cmd_annotate(const AnnotateOptions& options);
RunManifest cmd_generate(const GenerateOptions& options);
RunManifest cmd_evaluate(const EvaluateOptions& options);

// Path of the classifier file for an axis inside a directory.
std::string classifier_path(const std::string& dir, classifier::ClassifierAxis axis);
// Loads every classifier file present in the directory.
classifier::ClassifierSet load_classifier_set(const std::string& dir);

// Parses arguments, runs one command and writes its manifest. Returns 0 on
// success, 1 on usage errors, 2 on data errors, 3 on numeric failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace comae::cli
