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

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "comae/cli/cli.hpp"
#include "comae/error.hpp"

namespace comae::cli {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw UsageError("config key '" + key + "': bad value '" + value + "'");
  }
  return out;
}

using Setter = std::function<void(const std::string&, const std::string&)>;

template <class T>
Setter bind(T& field) {
  return [&field](const std::string& key, const std::string& value) {
    field = parse_number<T>(key, value);
  };
}

std::map<std::string, Setter> setters(Settings& s) {
  auto& t = s.training;
  auto& d = s.decode;
  auto& c = s.classifier;
  return {
      {"lambda", bind(t.lambda)},
      {"learning_rate", bind(t.learning_rate)},
      {"warmup_steps", bind(t.warmup_steps)},
      {"total_steps", bind(t.total_steps)},
      {"beta1", bind(t.beta1)},
      {"beta2", bind(t.beta2)},
      {"adam_epsilon", bind(t.adam_epsilon)},
      {"clip_norm", bind(t.clip_norm)},
      {"epochs", bind(t.epochs)},
      {"batch_size", bind(t.batch_size)},
      {"seed",
       [&](const std::string& k, const std::string& v) {
         t.seed = parse_number<std::uint64_t>(k, v);
         d.seed = t.seed;
         c.seed = t.seed;
       }},
      {"init_std", bind(t.init_std)},
      {"d_model", bind(t.d_model)},
      {"layers", bind(t.layers)},
      {"heads", bind(t.heads)},
      {"max_positions", bind(t.max_positions)},
      {"token_top_p", bind(d.token_top_p)},
      {"top_p", bind(d.token_top_p)},
      {"temperature", bind(d.temperature)},
      {"factor_top_p", bind(d.factor_top_p)},
      {"factor_temperature", bind(d.factor_temperature)},
      {"max_new_tokens", bind(d.max_new_tokens)},
      {"classifier.d_model", bind(c.d_model)},
      {"classifier.layers", bind(c.layers)},
      {"classifier.heads", bind(c.heads)},
      {"classifier.max_positions", bind(c.max_positions)},
      {"classifier.epochs", bind(c.epochs)},
      {"classifier.batch_size", bind(c.batch_size)},
      {"classifier.learning_rate", bind(c.learning_rate)},
      {"classifier.warmup_steps", bind(c.warmup_steps)},
      {"classifier.clip_norm", bind(c.clip_norm)},
      {"classifier.init_std", bind(c.init_std)},
      {"classifier.held_out_fraction", bind(c.held_out_fraction)},
  };
}

class Lines {
 public:
  template <class T>
  Lines& add(const char* key, T value) {
    if constexpr (std::is_floating_point_v<T>) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", value);
      out_ << key << '=' << buf << '\n';
    } else {
      out_ << key << '=' << value << '\n';
    }
    return *this;
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

}  // namespace

KeyValues parse_config(std::istream& in, const std::string& source) {
  KeyValues out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw UsageError(source + ":" + std::to_string(n) + ": empty key or value");
    }
    out[std::move(key)] = std::move(value);
  }
  return out;
}

KeyValues load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  return parse_config(in, path);
}

void apply_config(const KeyValues& values, Settings& settings) {
  const auto table = setters(settings);
  for (const auto& [key, value] : values) {
    auto it = table.find(key);
    if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
    it->second(key, value);
  }
}

std::string describe(const training::TrainingConfig& c) {
  return Lines()
      .add("lambda", c.lambda)
      .add("learning_rate", c.learning_rate)
      .add("warmup_steps", c.warmup_steps)
      .add("total_steps", c.total_steps)
      .add("beta1", c.beta1)
      .add("beta2", c.beta2)
      .add("adam_epsilon", c.adam_epsilon)
      .add("clip_norm", c.clip_norm)
      .add("epochs", c.epochs)
      .add("batch_size", c.batch_size)
      .add("seed", c.seed)
      .add("init_std", c.init_std)
      .add("d_model", c.d_model)
      .add("layers", c.layers)
      .add("heads", c.heads)
      .add("max_positions", c.max_positions)
      .str();
}

std::string describe(const decoding::DecodeConfig& c) {
  return Lines()
      .add("token_top_p", c.token_top_p)
      .add("temperature", c.temperature)
      .add("factor_top_p", c.factor_top_p)
      .add("factor_temperature", c.factor_temperature)
      .add("max_new_tokens", c.max_new_tokens)
      .add("seed", c.seed)
      .str();
}

std::string describe(const classifier::ClassifierConfig& c) {
  return Lines()
      .add("classifier.d_model", c.d_model)
      .add("classifier.layers", c.layers)
      .add("classifier.heads", c.heads)
      .add("classifier.max_positions", c.max_positions)
      .add("classifier.epochs", c.epochs)
      .add("classifier.batch_size", c.batch_size)
      .add("classifier.learning_rate", c.learning_rate)
      .add("classifier.warmup_steps", c.warmup_steps)
      .add("classifier.clip_norm", c.clip_norm)
      .add("classifier.init_std", c.init_std)
      .add("classifier.held_out_fraction", c.held_out_fraction)
      .add("seed", c.seed)
      .str();
}

}  // namespace comae::cli
