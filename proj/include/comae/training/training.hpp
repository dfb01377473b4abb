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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "comae/corpus/conversation.hpp"
#include "comae/model/model.hpp"
#include "comae/nn/tape.hpp"
#include "comae/text/vocabulary.hpp"

namespace comae::training {

struct TrainingConfig {
  double lambda = 1.0;
  double learning_rate = 1e-4;
  std::size_t warmup_steps = 4000;
  // 0 means epochs * batches per epoch.
  std::size_t total_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 1.0;  // 0 disables clipping
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double init_std = 0.02;
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t max_positions = 1024;

  // Throws UsageError on a non-positive field or negative lambda.
  void validate() const;
};

// Linear ramp from 0 to learning_rate over warmup_steps, then linear decay
// to 0 at total_steps; 0 from total_steps on.
double lr_at_step(std::size_t step, const TrainingConfig& config);

struct LossValues {
  double total = 0.0;
  double nll = 0.0;
  double l_c = 0.0;
  double l_a = 0.0;
  double l_e = 0.0;
};

struct LossTerms {
  nn::Var total, nll, l_c, l_a, l_e;
  LossValues values() const;
};

// nll: per-response token mean (including <eos>), averaged over the batch.
// l_c: sum of the three mechanism cross-entropies; l_a, l_e: act and
// emotion cross-entropies, each conditioned on the true upstream factors
// and averaged over the batch. Losses of factors the variant does not
// model are 0. total = nll + lambda (l_c + l_a + l_e).
LossTerms loss_terms(nn::GradientTape& tape, const model::ComaeModel& model,
                     std::span<const model::Example> batch, double lambda);
LossValues compute_loss(const model::ComaeModel& model,
                        std::span<const model::Example> batch, double lambda);

// Scales every gradient so the global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_global_norm(std::span<nn::Tensor* const> grads, double max_norm);

class Adam {
 public:
  Adam(std::vector<nn::Parameter*> params, double beta1, double beta2,
       double epsilon);

  // grads[i] belongs to params[i]; nullptr means a zero gradient.
  void step(std::span<const nn::Tensor* const> grads, double learning_rate);
  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<nn::Parameter*> params_;
  std::vector<nn::Tensor> m_, v_;
  double beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
};

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  LossValues loss;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double val_ppl = 0.0;
};

struct ModelCheckpoint {
  model::ComaeModel model;
  text::Vocabulary vocab;
  TrainingConfig config;
  std::size_t step = 0;
  double val_ppl = 0.0;
};

struct TrainResult {
  ModelCheckpoint best;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

using StepCallback = std::function<void(const StepRecord&)>;

// Adam training with the warmup schedule and global-norm clipping. After
// every epoch the validation perplexity is measured and the parameters
// with the lowest one are kept. Throws NumericError if the loss stops
// being finite. Deterministic in (data, config).
TrainResult train(std::span<const model::Example> train_set,
                  std::span<const model::Example> valid_set,
                  const text::Vocabulary& vocab, const model::Variant& variant,
                  const TrainingConfig& config,
                  const StepCallback& on_step = {});

// Builds the vocabulary from every utterance of the training corpus, then
// trains on the encoded corpora.
TrainResult train_on_corpus(const corpus::Corpus& train_corpus,
                            const corpus::Corpus& valid_corpus,
                            const model::Variant& variant,
                            const TrainingConfig& config,
                            const StepCallback& on_step = {});

text::Vocabulary build_vocabulary(const corpus::Corpus& corpus);

// exp of the mean per-token negative log-likelihood of the responses.
double perplexity(const model::ComaeModel& model,
                  std::span<const model::Example> examples);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const StepRecord& record);

}  // namespace comae::training
