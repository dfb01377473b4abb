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

#include "comae/model/model.hpp"

#include <algorithm>

#include "comae/error.hpp"
#include "comae/nn/ops.hpp"
#include "comae/nn/rng.hpp"

namespace comae::model {
namespace {

using nn::GradientTape;
using nn::Parameter;
using nn::Tensor;
using nn::Var;

HeadTransform make_head(const std::string& name, std::size_t in, std::size_t d,
                        nn::Rng& rng, double init_std) {
  return {nn::make_parameter(name + ".w", in, d, rng, init_std),
          nn::make_parameter(name + ".b", 1, d, rng, 0.0)};
}

Var apply_head(Var input, const HeadTransform& head, const Parameter& table) {
  return nn::tied_projection(nn::tanh(nn::linear(input, head.weight, &head.bias)),
                             table);
}

void require(bool enabled, const char* factor) {
  if (!enabled) {
    throw UsageError(std::string("this model variant does not predict ") +
                     factor);
  }
}

std::vector<double> softmax_of(Var logits) {
  return nn::softmax(logits.value().row(0));
}

double log_prob(Var logits, std::size_t index) {
  return -nn::cross_entropy_from_logits(logits.value().row(0), index);
}

}  // namespace

std::string Variant::name() const {
  std::vector<std::string> parts;
  if (cm) parts.emplace_back("cm");
  if (da) parts.emplace_back("da");
  if (em) parts.emplace_back("em");
  if (parts.empty()) return "vanilla";
  if (parts.size() == 1) return "+" + parts[0];
  const std::string sep = hierarchical ? "->" : "||";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += sep + parts[i];
  return out;
}

Variant Variant::parse(std::string_view name) {
  std::string s(name);
  for (std::size_t pos; (pos = s.find("→")) != std::string::npos;) {
    s.replace(pos, std::string("→").size(), "->");
  }
  for (const std::string& valid : variant_names()) {
    if (s != valid) continue;
    Variant v;
    v.cm = s.find("cm") != std::string::npos;
    v.da = s.find("da") != std::string::npos;
    v.em = s.find("em") != std::string::npos;
    v.hierarchical = s.find("->") != std::string::npos;
    return v;
  }
  std::string list;
  for (const std::string& valid : variant_names()) {
    list += (list.empty() ? "" : ", ") + valid;
  }
  throw UsageError("unknown variant '" + std::string(name) + "'; valid: " + list);
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{
      "vanilla", "+cm",    "+da",    "+em",        "cm||da", "cm||em",
      "da||em",  "cm||da||em", "cm->da", "cm->em", "da->em", "cm->da->em"};
  return names;
}

std::size_t da_head_blocks(const Variant& v) {
  return 1 + (v.hierarchical && v.cm ? 1 : 0);
}

std::size_t em_head_blocks(const Variant& v) {
  return 1 + (v.hierarchical && v.cm ? 1 : 0) + (v.hierarchical && v.da ? 1 : 0);
}

ComaeModel make_model(const ModelConfig& config, std::uint64_t seed,
                      double init_std) {
  if (config.vocab_size < 2) throw UsageError("vocabulary must hold <unk> and <eos>");
  const std::size_t d = config.decoder.d_model;
  if (d == 0 || config.decoder.heads == 0 || d % config.decoder.heads != 0) {
    throw UsageError("d_model must be a positive multiple of heads");
  }
  nn::Rng rng(seed);
  ComaeModel m;
  m.config = config;
  const Variant& v = config.variant;
  m.word = nn::make_parameter("wte", config.vocab_size, d, rng, init_std);
  m.position = nn::make_parameter("wpe", config.decoder.max_positions, d, rng,
                                  init_std);
  m.speaker = nn::make_parameter("speaker", 2, d, rng, init_std);
  if (v.cm) {
    for (std::size_t i = 0; i < kNumMechanisms; ++i) {
      const std::string tag(mechanism_short_name(kMechanisms[i]));
      m.cm_tables[i] = nn::make_parameter("cm." + tag, 2, d, rng, init_std);
      m.cm_heads[i] = make_head("head.cm." + tag, d, d, rng, init_std);
    }
  }
  if (v.da) {
    m.da_table = nn::make_parameter("da", kNumDialogActs, d, rng, init_std);
    m.da_head = make_head("head.da", da_head_blocks(v) * d, d, rng, init_std);
  }
  if (v.em) {
    m.em_table = nn::make_parameter("em", kNumEmotions, d, rng, init_std);
    m.em_head = make_head("head.em", em_head_blocks(v) * d, d, rng, init_std);
  }
  m.decoder = nn::make_decoder(config.decoder, "decoder.", rng, init_std);
  return m;
}

std::vector<Parameter*> ComaeModel::parameters() {
  std::vector<Parameter*> out{&word, &position, &speaker};
  const Variant& v = config.variant;
  if (v.cm) {
    for (std::size_t i = 0; i < kNumMechanisms; ++i) {
      out.insert(out.end(), {&cm_tables[i], &cm_heads[i].weight,
                             &cm_heads[i].bias});
    }
  }
  if (v.da) out.insert(out.end(), {&da_table, &da_head.weight, &da_head.bias});
  if (v.em) out.insert(out.end(), {&em_table, &em_head.weight, &em_head.bias});
  nn::append_parameters(decoder, out);
  return out;
}

std::vector<const Parameter*> ComaeModel::parameters() const {
  auto mutable_list = const_cast<ComaeModel*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

Example encode_example(const corpus::Conversation& conversation,
                       const text::Vocabulary& vocab) {
  if (conversation.utterances.size() < 2) {
    throw DataError("conversation '" + conversation.id +
                    "' needs a context and a response");
  }
  Example ex;
  for (const auto& u : conversation.context()) {
    if (u.speaker != 0 && u.speaker != 1) {
      throw DataError("conversation '" + conversation.id +
                      "': speakers must be 0 or 1 (run the filter first)");
    }
    ex.context.push_back({vocab.encode(u.text), u.speaker, u.da, u.em});
    if (ex.context.back().tokens.empty()) {
      throw DataError("conversation '" + conversation.id +
                      "': utterance without tokens");
    }
  }
  const auto& r = conversation.response();
  if (r.speaker != 0 && r.speaker != 1) {
    throw DataError("conversation '" + conversation.id +
                    "': speakers must be 0 or 1 (run the filter first)");
  }
  ex.response_speaker = r.speaker;
  ex.response = vocab.encode(r.text);
  ex.factors = conversation.response_factors();
  return ex;
}

std::vector<Example> encode_corpus(const corpus::Corpus& corpus,
                                   const text::Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& c : corpus) out.push_back(encode_example(c, vocab));
  return out;
}

std::size_t context_length(std::span<const EncodedUtterance> context) {
  std::size_t n = 0;
  for (const auto& u : context) n += u.tokens.size();
  return context.empty() ? 0 : n + context.size() - 1;
}

Var embed_context(GradientTape& tape, const ComaeModel& model,
                  std::span<const EncodedUtterance> context) {
  const std::size_t length = context_length(context);
  if (length == 0) throw DataError("empty context");
  if (length > model.config.decoder.max_positions) {
    throw DataError("context of " + std::to_string(length) +
                    " tokens exceeds the " +
                    std::to_string(model.config.decoder.max_positions) +
                    "-position limit");
  }
  std::vector<int> words, positions, speakers, das, ems;
  for (std::size_t i = 0; i < context.size(); ++i) {
    const auto& u = context[i];
    std::size_t count = u.tokens.size();
    words.insert(words.end(), u.tokens.begin(), u.tokens.end());
    if (i + 1 < context.size()) {
      words.push_back(text::Vocabulary::kEos);
      ++count;
    }
    speakers.insert(speakers.end(), count, u.speaker);
    das.insert(das.end(), count, u.da.index());
    ems.insert(ems.end(), count, u.em.index());
  }
  for (std::size_t p = 0; p < length; ++p) positions.push_back(static_cast<int>(p));
  const Variant& v = model.config.variant;
  Var x = nn::add(nn::embedding(tape, model.word, words),
                  nn::embedding(tape, model.position, positions));
  x = nn::add(x, nn::embedding(tape, model.speaker, speakers));
  if (v.da) x = nn::add(x, nn::embedding(tape, model.da_table, das));
  if (v.em) x = nn::add(x, nn::embedding(tape, model.em_table, ems));
  return x;
}

std::array<Var, kNumMechanisms> cm_logits(GradientTape& tape,
                                          const ComaeModel& model, Var h_x) {
  (void)tape;
  require(model.config.variant.cm, "communication mechanisms");
  std::array<Var, kNumMechanisms> out;
  for (std::size_t i = 0; i < kNumMechanisms; ++i) {
    out[i] = apply_head(h_x, model.cm_heads[i], model.cm_tables[i]);
  }
  return out;
}

Var cm_embedding(GradientTape& tape, const ComaeModel& model,
                 const CommMechanism& cm) {
  require(model.config.variant.cm, "communication mechanisms");
  std::optional<Var> total;
  for (std::size_t i = 0; i < kNumMechanisms; ++i) {
    const int bit = cm.get(kMechanisms[i]) ? 1 : 0;
    Var row = nn::embedding(tape, model.cm_tables[i], std::span(&bit, 1));
    total = total ? nn::add(*total, row) : row;
  }
  return *total;
}

Var da_logits(GradientTape& tape, const ComaeModel& model, Var h_x,
              const CommMechanism& cm) {
  const Variant& v = model.config.variant;
  require(v.da, "dialog acts");
  Var input = h_x;
  if (v.hierarchical && v.cm) {
    const Var parts[] = {h_x, cm_embedding(tape, model, cm)};
    input = nn::concat_cols(parts);
  }
  return apply_head(input, model.da_head, model.da_table);
}

Var em_logits(GradientTape& tape, const ComaeModel& model, Var h_x,
              const CommMechanism& cm, DialogAct da) {
  const Variant& v = model.config.variant;
  require(v.em, "emotions");
  std::vector<Var> parts{h_x};
  if (v.hierarchical && v.cm) parts.push_back(cm_embedding(tape, model, cm));
  if (v.hierarchical && v.da) {
    const int id = da.index();
    parts.push_back(nn::embedding(tape, model.da_table, std::span(&id, 1)));
  }
  Var input = parts.size() == 1 ? h_x : nn::concat_cols(parts);
  return apply_head(input, model.em_head, model.em_table);
}

Var fuse_factors(GradientTape& tape, const ComaeModel& model,
                 const FactorTriple& factors) {
  const Variant& v = model.config.variant;
  Var total = tape.constant(Tensor(1, model.d()));
  if (v.cm) total = nn::add(total, cm_embedding(tape, model, factors.cm));
  if (v.da) {
    const int id = factors.da.index();
    total = nn::add(total, nn::embedding(tape, model.da_table, std::span(&id, 1)));
  }
  if (v.em) {
    const int id = factors.em.index();
    total = nn::add(total, nn::embedding(tape, model.em_table, std::span(&id, 1)));
  }
  return total;
}

ForwardPass forward(GradientTape& tape, const ComaeModel& model,
                    std::span<const EncodedUtterance> context,
                    std::span<const int> prefix, int response_speaker,
                    std::optional<Var> fused) {
  const std::size_t context_len = context_length(context);
  const std::size_t total = context_len + 1 + prefix.size();
  if (total > model.config.decoder.max_positions) {
    throw DataError("sequence of " + std::to_string(total) +
                    " tokens exceeds the " +
                    std::to_string(model.config.decoder.max_positions) +
                    "-position limit");
  }
  if (response_speaker != 0 && response_speaker != 1) {
    throw DataError("response speaker must be 0 or 1");
  }
  std::vector<int> words{text::Vocabulary::kEos};
  words.insert(words.end(), prefix.begin(), prefix.end());
  std::vector<int> positions(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    positions[i] = static_cast<int>(context_len + i);
  }
  const std::vector<int> speakers(words.size(), response_speaker);
  Var response = nn::add(nn::embedding(tape, model.word, words),
                         nn::embedding(tape, model.position, positions));
  response = nn::add(response, nn::embedding(tape, model.speaker, speakers));
  if (fused) response = nn::add(response, *fused);

  const Var rows[] = {embed_context(tape, model, context), response};
  ForwardPass out;
  out.hidden = nn::run_decoder(nn::concat_rows(rows), model.decoder,
                               model.config.decoder);
  out.h_x = nn::select_rows(out.hidden, context_len - 1, 1);
  out.token_logits = nn::tied_projection(
      nn::select_rows(out.hidden, context_len, words.size()), model.word);
  return out;
}

ContextEncoding encode_context(const ComaeModel& model,
                               std::span<const EncodedUtterance> context) {
  GradientTape tape(false);
  Var hidden = nn::run_decoder(embed_context(tape, model, context),
                               model.decoder, model.config.decoder);
  ContextEncoding out{hidden.value(), Tensor(1, model.d())};
  const auto last = hidden.value().row(hidden.rows() - 1);
  std::copy(last.begin(), last.end(), out.h_x.row(0).begin());
  return out;
}

std::array<std::array<double, 2>, kNumMechanisms> predict_cm(
    const ComaeModel& model, const Tensor& h_x) {
  GradientTape tape(false);
  const auto logits = cm_logits(tape, model, tape.constant(h_x));
  std::array<std::array<double, 2>, kNumMechanisms> out{};
  for (std::size_t i = 0; i < kNumMechanisms; ++i) {
    const auto p = softmax_of(logits[i]);
    out[i] = {p[0], p[1]};
  }
  return out;
}

std::vector<double> predict_da(const ComaeModel& model, const Tensor& h_x,
                               const CommMechanism& cm) {
  GradientTape tape(false);
  return softmax_of(da_logits(tape, model, tape.constant(h_x), cm));
}

std::vector<double> predict_em(const ComaeModel& model, const Tensor& h_x,
                               const CommMechanism& cm, DialogAct da) {
  GradientTape tape(false);
  return softmax_of(em_logits(tape, model, tape.constant(h_x), cm, da));
}

CommMechanism argmax_cm(
    const std::array<std::array<double, 2>, kNumMechanisms>& p) {
  CommMechanism cm;
  for (std::size_t i = 0; i < kNumMechanisms; ++i) {
    cm.set(kMechanisms[i], p[i][1] > p[i][0]);
  }
  return cm;
}

Tensor cm_embedding(const ComaeModel& model, const CommMechanism& cm) {
  GradientTape tape(false);
  return cm_embedding(tape, model, cm).value();
}

Tensor fuse_factors(const ComaeModel& model, const FactorTriple& factors) {
  GradientTape tape(false);
  return fuse_factors(tape, model, factors).value();
}

std::vector<double> next_token_distribution(
    const ComaeModel& model, std::span<const EncodedUtterance> context,
    std::span<const int> prefix, const Tensor& fused, int response_speaker) {
  if (fused.rows() != 1 || fused.cols() != model.d()) {
    throw UsageError("fused factor embedding must be 1 x d");
  }
  GradientTape tape(false);
  const ForwardPass pass = forward(tape, model, context, prefix,
                                   response_speaker, tape.constant(fused));
  const Tensor& logits = pass.token_logits.value();
  return nn::softmax(logits.row(logits.rows() - 1));
}

JointLogProb joint_log_prob(const ComaeModel& model, const Example& example) {
  GradientTape tape(false);
  const Variant& v = model.config.variant;
  const FactorTriple& f = example.factors;
  std::optional<Var> fused;
  if (v.any()) fused = fuse_factors(tape, model, f);
  const ForwardPass pass = forward(tape, model, example.context,
                                   example.response, example.response_speaker,
                                   fused);
  JointLogProb out;
  if (v.cm) {
    const auto logits = cm_logits(tape, model, pass.h_x);
    for (std::size_t i = 0; i < kNumMechanisms; ++i) {
      out.cm += log_prob(logits[i], f.cm.get(kMechanisms[i]) ? 1 : 0);
    }
  }
  if (v.da) {
    out.da = log_prob(da_logits(tape, model, pass.h_x, f.cm),
                      static_cast<std::size_t>(f.da.index()));
  }
  if (v.em) {
    out.em = log_prob(em_logits(tape, model, pass.h_x, f.cm, f.da),
                      static_cast<std::size_t>(f.em.index()));
  }
  const Tensor& logits = pass.token_logits.value();
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    const int target = t < example.response.size() ? example.response[t]
                                                    : text::Vocabulary::kEos;
    out.tokens -= nn::cross_entropy_from_logits(logits.row(t),
                                                static_cast<std::size_t>(target));
  }
  out.total = out.cm + out.da + out.em + out.tokens;
  return out;
}

TokenNll response_nll(const ComaeModel& model,
                      std::span<const Example> examples) {
  TokenNll out;
  for (const Example& ex : examples) {
    GradientTape tape(false);
    std::optional<Var> fused;
    if (model.config.variant.any()) fused = fuse_factors(tape, model, ex.factors);
    const ForwardPass pass = forward(tape, model, ex.context, ex.response,
                                     ex.response_speaker, fused);
    std::vector<int> targets = ex.response;
    targets.push_back(text::Vocabulary::kEos);
    out.sum += nn::cross_entropy(pass.token_logits, targets).scalar();
    out.tokens += targets.size();
  }
  return out;
}

}  // namespace comae::model
