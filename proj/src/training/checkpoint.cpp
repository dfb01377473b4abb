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

#include "comae/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "comae/error.hpp"
#include "comae/taxonomy.hpp"
#include "comae/util/hash.hpp"

namespace comae::training {
namespace {

constexpr char kMagic[8] = {'C', 'O', 'M', 'A', 'E', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

// Unsigned integers, little-endian regardless of the host.
template <class T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <class T>
T load_le(const char* bytes) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return value;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, const std::string& path)
      : bytes_(bytes), end_(end), path_(path) {}

  template <class T>
  T get() {
    need(sizeof(T));
    const T value = load_le<T>(bytes_.data() + pos_);
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return end_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw DataError("checkpoint '" + path_ + "' is truncated");
  }

  const std::string& bytes_;
  std::size_t end_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

std::uint64_t as_bits(double v) { return std::bit_cast<std::uint64_t>(v); }
double from_bits(std::uint64_t v) { return std::bit_cast<double>(v); }

}  // namespace

void write_container(const std::string& path, nlohmann::ordered_json header,
                     std::span<const nn::Parameter* const> arrays) {
  header["taxonomy"] = taxonomy_table();
  header["taxonomy_hash"] = to_hex(taxonomy_hash());
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  put<std::uint64_t>(out, arrays.size());
  for (const nn::Parameter* p : arrays) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put<std::uint64_t>(out, p->value.rows());
    put<std::uint64_t>(out, p->value.cols());
    for (double v : p->value.values()) put<std::uint64_t>(out, as_bits(v));
  }
  put<std::uint64_t>(out, fnv1a(out));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("cannot write checkpoint '" + path + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("failed writing checkpoint '" + path + "'");
}

Container read_container(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(file)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8 + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("'" + path + "' is not a checkpoint (bad magic or truncated)");
  }
  const std::size_t body = bytes.size() - 8;
  if (load_le<std::uint64_t>(bytes.data() + body) !=
      fnv1a(std::string_view(bytes).substr(0, body))) {
    throw DataError("checkpoint '" + path +
                    "' failed its checksum (truncated or corrupted)");
  }
  Reader in(bytes, body, path);
  in.get_string(sizeof kMagic);
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) {
    throw DataError("checkpoint '" + path + "' has format version " +
                    std::to_string(version) + "; expected " +
                    std::to_string(kVersion));
  }
  Container c;
  const auto header_len = in.get<std::uint64_t>();
  if (header_len > in.remaining()) {
    throw DataError("checkpoint '" + path + "' is truncated");
  }
  try {
    c.header = nlohmann::ordered_json::parse(in.get_string(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' has a corrupt header: " + e.what());
  }
  const auto hash = c.header.find("taxonomy_hash");
  if (hash == c.header.end() || !hash->is_string() ||
      hash->get<std::string>() != to_hex(taxonomy_hash())) {
    throw DataError("checkpoint '" + path +
                    "' was written under a different label taxonomy");
  }
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t a = 0; a < count; ++a) {
    const auto name_len = in.get<std::uint32_t>();
    std::string name = in.get_string(name_len);
    const auto rows = in.get<std::uint64_t>();
    const auto cols = in.get<std::uint64_t>();
    if (cols != 0 && rows > in.remaining() / 8 / cols) {
      throw DataError("checkpoint '" + path + "' is truncated");
    }
    nn::Tensor t(rows, cols);
    for (double& v : t.values()) v = from_bits(in.get<std::uint64_t>());
    if (!c.arrays.emplace(std::move(name), std::move(t)).second) {
      throw DataError("checkpoint '" + path + "' repeats an array name");
    }
  }
  if (in.remaining() != 0) {
    throw DataError("checkpoint '" + path + "' has trailing bytes");
  }
  return c;
}

void restore_parameters(const Container& container,
                        std::span<nn::Parameter* const> params) {
  std::set<std::string> used;
  std::vector<std::pair<nn::Parameter*, const nn::Tensor*>> plan;
  for (nn::Parameter* p : params) {
    auto it = container.arrays.find(p->name);
    if (it == container.arrays.end()) {
      throw DataError("checkpoint lacks parameter '" + p->name + "'");
    }
    if (it->second.rows() != p->value.rows() ||
        it->second.cols() != p->value.cols()) {
      throw DataError("checkpoint parameter '" + p->name + "' has shape " +
                      std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", expected " +
                      std::to_string(p->value.rows()) + "x" +
                      std::to_string(p->value.cols()));
    }
    used.insert(p->name);
    plan.emplace_back(p, &it->second);
  }
  if (used.size() != container.arrays.size()) {
    throw DataError("checkpoint holds arrays the model does not use");
  }
  for (auto& [p, t] : plan) p->value = *t;
}

nlohmann::ordered_json config_to_json(const TrainingConfig& c) {
  return {{"lambda", c.lambda},
          {"learning_rate", c.learning_rate},
          {"warmup_steps", c.warmup_steps},
          {"total_steps", c.total_steps},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"clip_norm", c.clip_norm},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"init_std", c.init_std},
          {"d_model", c.d_model},
          {"layers", c.layers},
          {"heads", c.heads},
          {"max_positions", c.max_positions}};
}

TrainingConfig config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  try {
    c.lambda = j.at("lambda").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.warmup_steps = j.at("warmup_steps").get<std::size_t>();
    c.total_steps = j.at("total_steps").get<std::size_t>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.adam_epsilon = j.at("adam_epsilon").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.init_std = j.at("init_std").get<double>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad training config in header: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& ck) {
  nlohmann::ordered_json header;
  header["kind"] = "comae-model";
  header["variant"] = ck.model.config.variant.name();
  header["config"] = config_to_json(ck.config);
  header["vocabulary"] = ck.vocab.tokens();
  header["step"] = ck.step;
  header["val_ppl"] = ck.val_ppl;
  const auto params = ck.model.parameters();
  write_container(path, std::move(header), params);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  const Container c = read_container(path);
  if (c.header.value("kind", "") != "comae-model") {
    throw DataError("'" + path + "' is not a response model checkpoint");
  }
  ModelCheckpoint ck;
  try {
    ck.config = config_from_json(c.header.at("config"));
    ck.vocab = text::Vocabulary::from_tokens(
        c.header.at("vocabulary").get<std::vector<std::string>>());
    ck.step = c.header.at("step").get<std::size_t>();
    ck.val_ppl = c.header.at("val_ppl").get<double>();
    model::ModelConfig mc;
    mc.vocab_size = ck.vocab.size();
    mc.decoder = {ck.config.d_model, ck.config.layers, ck.config.heads,
                  ck.config.max_positions};
    mc.variant = model::Variant::parse(c.header.at("variant").get<std::string>());
    ck.model = model::make_model(mc, 0, ck.config.init_std);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' header: " + e.what());
  } catch (const UsageError& e) {
    throw DataError("checkpoint '" + path + "' header: " + e.what());
  }
  restore_parameters(c, ck.model.parameters());
  return ck;
}

}  // namespace comae::training
