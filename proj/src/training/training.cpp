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

#include "comae/training/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "comae/error.hpp"
#include "comae/nn/ops.hpp"
#include "comae/nn/rng.hpp"

namespace comae::training {

using model::ComaeModel;
using model::Example;
using nn::GradientTape;
using nn::Tensor;
using nn::Var;

void TrainingConfig::validate() const {
  auto positive = [](bool ok, const char* field) {
    if (!ok) throw UsageError(std::string(field) + " must be positive");
  };
  if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
  positive(learning_rate > 0.0, "learning_rate");
  positive(warmup_steps > 0, "warmup_steps");
  positive(beta1 > 0.0 && beta1 < 1.0, "beta1 (below 1)");
  positive(beta2 > 0.0 && beta2 < 1.0, "beta2 (below 1)");
  positive(adam_epsilon > 0.0, "adam_epsilon");
  if (!(clip_norm >= 0.0)) throw UsageError("clip_norm must be >= 0");
  positive(epochs > 0, "epochs");
  positive(batch_size > 0, "batch_size");
  positive(init_std > 0.0, "init_std");
  positive(d_model > 0, "d_model");
  positive(layers > 0, "layers");
  positive(heads > 0, "heads");
  positive(max_positions > 0, "max_positions");
  if (d_model % heads != 0) throw UsageError("d_model must be divisible by heads");
}

double lr_at_step(std::size_t step, const TrainingConfig& config) {
  const double peak = config.learning_rate;
  const std::size_t warmup = config.warmup_steps;
  const std::size_t total = config.total_steps;
  if (total > 0 && step >= total) return 0.0;
  if (step < warmup) {
    return peak * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total == 0) return peak;
  return peak * static_cast<double>(total - step) /
         static_cast<double>(total - warmup);
}

LossValues LossTerms::values() const {
  return {total.scalar(), nll.scalar(), l_c.scalar(), l_a.scalar(),
          l_e.scalar()};
}

LossTerms loss_terms(GradientTape& tape, const ComaeModel& model,
                     std::span<const Example> batch, double lambda) {
  if (batch.empty()) throw DataError("empty training batch");
  const model::Variant& v = model.config.variant;
  std::vector<Var> nll, l_c, l_a, l_e;
  for (const Example& ex : batch) {
    std::optional<Var> fused;
    if (v.any()) fused = model::fuse_factors(tape, model, ex.factors);
    const model::ForwardPass pass = model::forward(
        tape, model, ex.context, ex.response, ex.response_speaker, fused);
    std::vector<int> targets = ex.response;
    targets.push_back(text::Vocabulary::kEos);
    nll.push_back(nn::scale(nn::cross_entropy(pass.token_logits, targets),
                            1.0 / static_cast<double>(targets.size())));
    const FactorTriple& f = ex.factors;
    if (v.cm) {
      const auto logits = model::cm_logits(tape, model, pass.h_x);
      for (std::size_t i = 0; i < kNumMechanisms; ++i) {
        const int bit = f.cm.get(kMechanisms[i]) ? 1 : 0;
        l_c.push_back(nn::cross_entropy(logits[i], std::span(&bit, 1)));
      }
    }
    if (v.da) {
      const int target = f.da.index();
      l_a.push_back(nn::cross_entropy(
          model::da_logits(tape, model, pass.h_x, f.cm), std::span(&target, 1)));
    }
    if (v.em) {
      const int target = f.em.index();
      l_e.push_back(nn::cross_entropy(
          model::em_logits(tape, model, pass.h_x, f.cm, f.da),
          std::span(&target, 1)));
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  auto batch_mean = [&](const std::vector<Var>& terms) {
    if (terms.empty()) return tape.constant(Tensor(1, 1));
    Var acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = nn::add(acc, terms[i]);
    return nn::scale(acc, inv);
  };
  LossTerms out;
  out.nll = batch_mean(nll);
  out.l_c = batch_mean(l_c);
  out.l_a = batch_mean(l_a);
  out.l_e = batch_mean(l_e);
  out.total = out.nll;
  if (v.any()) {
    const Var factors = nn::add(nn::add(out.l_c, out.l_a), out.l_e);
    out.total = nn::add(out.nll, nn::scale(factors, lambda));
  }
  return out;
}

LossValues compute_loss(const ComaeModel& model, std::span<const Example> batch,
                        double lambda) {
  GradientTape tape(false);
  return loss_terms(tape, model, batch, lambda).values();
}

double clip_global_norm(std::span<Tensor* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads) {
    if (g == nullptr) continue;
    for (double v : g->values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor* g : grads) {
      if (g == nullptr) continue;
      for (double& v : g->values()) v *= factor;
    }
  }
  return norm;
}

Adam::Adam(std::vector<nn::Parameter*> params, double beta1, double beta2,
           double epsilon)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {
  for (const nn::Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step(std::span<const Tensor* const> grads, double learning_rate) {
  if (grads.size() != params_.size()) {
    throw UsageError("Adam::step: one gradient slot per parameter required");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto value = params_[i]->value.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    const Tensor* g = grads[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double gk = g != nullptr ? g->values()[k] : 0.0;
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      value[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + epsilon_);
    }
  }
}

double perplexity(const ComaeModel& model, std::span<const Example> examples) {
  if (examples.empty()) throw DataError("perplexity of an empty corpus");
  const model::TokenNll nll = model::response_nll(model, examples);
  return std::exp(nll.sum / static_cast<double>(nll.tokens));
}

TrainResult train(std::span<const Example> train_set,
                  std::span<const Example> valid_set,
                  const text::Vocabulary& vocab, const model::Variant& variant,
                  const TrainingConfig& input_config,
                  const StepCallback& on_step) {
  input_config.validate();
  if (train_set.empty()) throw DataError("empty training split");
  if (valid_set.empty()) throw DataError("empty validation split");
  TrainingConfig config = input_config;
  const std::size_t batches =
      (train_set.size() + config.batch_size - 1) / config.batch_size;
  if (config.total_steps == 0) config.total_steps = config.epochs * batches;

  model::ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.decoder = {config.d_model, config.layers, config.heads,
                config.max_positions};
  mc.variant = variant;
  ComaeModel model = model::make_model(mc, config.seed, config.init_std);
  std::vector<nn::Parameter*> params = model.parameters();
  Adam adam(params, config.beta1, config.beta2, config.adam_epsilon);
  nn::Rng rng(config.seed ^ 0x5eed5eed5eedULL);

  TrainResult result;
  result.best.vocab = vocab;
  result.best.config = config;
  bool have_best = false;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  std::vector<Tensor> grads(params.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

      GradientTape tape;
      const LossTerms terms = loss_terms(tape, model, batch, config.lambda);
      const LossValues values = terms.values();
      if (!std::isfinite(values.total)) {
        throw NumericError("loss became non-finite at step " +
                           std::to_string(step + 1) + " (nll " +
                           std::to_string(values.nll) + ")");
      }
      tape.backward(terms.total);
      std::vector<Tensor*> grad_slots(params.size(), nullptr);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (const Tensor* g = tape.find_param_grad(*params[i])) {
          grads[i] = *g;
          grad_slots[i] = &grads[i];
        }
      }
      const double norm = clip_global_norm(grad_slots, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("gradient norm became non-finite at step " +
                           std::to_string(step + 1));
      }
      const std::vector<const Tensor*> const_slots(grad_slots.begin(),
                                                   grad_slots.end());
      ++step;
      const double lr = lr_at_step(step, config);
      adam.step(const_slots, lr);
      result.steps.push_back({step, lr, values});
      if (on_step) on_step(result.steps.back());
    }
    const double ppl = perplexity(model, valid_set);
    if (!std::isfinite(ppl)) {
      throw NumericError("validation perplexity is non-finite after epoch " +
                         std::to_string(epoch));
    }
    result.epochs.push_back({epoch, step, ppl});
    if (!have_best || ppl < result.best.val_ppl) {
      have_best = true;
      result.best.model = model;
      result.best.step = step;
      result.best.val_ppl = ppl;
    }
  }
  return result;
}

text::Vocabulary build_vocabulary(const corpus::Corpus& corpus) {
  std::vector<std::string> texts;
  for (const auto& c : corpus) {
    for (const auto& u : c.utterances) texts.push_back(u.text);
  }
  return text::Vocabulary::build(texts);
}

TrainResult train_on_corpus(const corpus::Corpus& train_corpus,
                            const corpus::Corpus& valid_corpus,
                            const model::Variant& variant,
                            const TrainingConfig& config,
                            const StepCallback& on_step) {
  const text::Vocabulary vocab = build_vocabulary(train_corpus);
  const auto train_set = model::encode_corpus(train_corpus, vocab);
  const auto valid_set = model::encode_corpus(valid_corpus, vocab);
  return train(train_set, valid_set, vocab, variant, config, on_step);
}

void write_metrics_header(std::ostream& out) {
  out << "# nll: per-response token mean (incl. <eos>), averaged over the "
         "batch; total = nll + lambda * (l_c + l_a + l_e)\n"
      << "step,lr,total,nll,l_c,l_a,l_e\n";
}

void write_metrics_row(std::ostream& out, const StepRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step,
                r.lr, r.loss.total, r.loss.nll, r.loss.l_c, r.loss.l_a,
                r.loss.l_e);
  out << buf;
}

}  // namespace comae::training
