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

#include "comae/corpus/conversation.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "comae/error.hpp"

namespace comae::corpus {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& require(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw DataError(std::string("missing field '") + key + "' in " + where);
  }
  return *it;
}

std::string require_string(const json& obj, const char* key,
                           const char* where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) {
    throw DataError(std::string("field '") + key + "' in " + where +
                    " must be a string");
  }
  return v.get<std::string>();
}

CommMechanism parse_cm(const json& v, const char* where) {
  if (!v.is_object()) {
    throw DataError(std::string(where) + " must be an object");
  }
  CommMechanism cm;
  for (Mechanism m : kMechanisms) {
    const std::string key(mechanism_short_name(m));
    const json& flag = require(v, key.c_str(), where);
    if (!flag.is_boolean()) {
      throw DataError(std::string(where) + "." + key + " must be a boolean");
    }
    cm.set(m, flag.get<bool>());
  }
  return cm;
}

ordered_json cm_json(const CommMechanism& cm) {
  return ordered_json{{"er", cm.er}, {"ip", cm.ip}, {"ex", cm.ex}};
}

}  // namespace

Domain parse_domain(std::string_view name) {
  if (name == "happy") return Domain::happy;
  if (name == "offmychest") return Domain::offmychest;
  throw DataError("unknown domain '" + std::string(name) + "'");
}

std::string_view domain_name(Domain d) {
  return d == Domain::happy ? "happy" : "offmychest";
}

Conversation parse_conversation_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record must be a JSON object");

  Conversation c;
  c.id = require_string(j, "id", "conversation");
  c.domain = parse_domain(require_string(j, "domain", "conversation"));

  const json& utts = require(j, "utterances", "conversation");
  if (!utts.is_array() || utts.size() < 2) {
    throw DataError("'utterances' must be an array of at least 2 entries");
  }
  for (const json& u : utts) {
    if (!u.is_object()) throw DataError("utterance must be an object");
    Utterance out;
    const json& speaker = require(u, "speaker", "utterance");
    if (!speaker.is_number_integer() || speaker.get<long long>() < 0) {
      throw DataError("utterance speaker must be a nonnegative integer");
    }
    out.speaker = speaker.get<int>();
    out.text = require_string(u, "text", "utterance");
    if (out.text.empty()) throw DataError("utterance text must be non-empty");
    out.da = DialogAct::from_name(require_string(u, "da", "utterance"));
    out.em = Emotion::from_name(require_string(u, "em", "utterance"));
    if (auto it = u.find("original"); it != u.end()) {
      out.original = OriginalLabels{
          DialogAct::from_name(require_string(*it, "da", "original")),
          Emotion::from_name(require_string(*it, "em", "original"))};
    }
    c.utterances.push_back(std::move(out));
  }
  if (c.utterances.back().speaker == c.utterances.front().speaker) {
    throw DataError("final response must come from a different speaker than "
                    "the first post");
  }
  c.response_cm = parse_cm(require(j, "response_cm", "conversation"),
                           "response_cm");
  if (auto it = j.find("original_response_cm"); it != j.end()) {
    c.original_response_cm = parse_cm(*it, "original_response_cm");
  }
  return c;
}

Corpus parse_corpus(std::istream& in, const std::string& source) {
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(parse_conversation_line(line));
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  return parse_corpus(in, path);
}

std::string to_json_line(const Conversation& c) {
  ordered_json j;
  j["id"] = c.id;
  j["domain"] = std::string(domain_name(c.domain));
  ordered_json utts = ordered_json::array();
  for (const Utterance& u : c.utterances) {
    ordered_json ju;
    ju["speaker"] = u.speaker;
    ju["text"] = u.text;
    ju["da"] = std::string(u.da.name());
    ju["em"] = std::string(u.em.name());
    if (u.original) {
      ju["original"] = ordered_json{{"da", std::string(u.original->da.name())},
                                    {"em", std::string(u.original->em.name())}};
    }
    utts.push_back(std::move(ju));
  }
  j["utterances"] = std::move(utts);
  j["response_cm"] = cm_json(c.response_cm);
  if (c.original_response_cm) {
    j["original_response_cm"] = cm_json(*c.original_response_cm);
  }
  return j.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const Conversation& c : corpus) out << to_json_line(c) << '\n';
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus '" + path + "'");
  write_corpus(out, corpus);
  if (!out) throw DataError("failed writing corpus '" + path + "'");
}

FilterResult filter_conversations(const Corpus& corpus) {
  FilterResult result;
  result.report.input = corpus.size();
  for (const Conversation& c : corpus) {
    std::set<int> speakers;
    for (const Utterance& u : c.utterances) speakers.insert(u.speaker);
    if (speakers.size() > 2) {
      ++result.report.multi_speaker;
      continue;
    }
    if (!c.response_cm.any()) {
      ++result.report.no_cm;
      continue;
    }
    Conversation kept = c;
    const int first = c.utterances.front().speaker;
    for (Utterance& u : kept.utterances) u.speaker = u.speaker == first ? 0 : 1;
    result.kept.push_back(std::move(kept));
  }
  result.report.kept = result.kept.size();
  return result;
}

}  // namespace comae::corpus
