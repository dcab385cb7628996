// Copyright 2026 The msim Authors
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

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "msim/corpus.hpp"
#include "msim/errors.hpp"

namespace msim {

using Json = nlohmann::json;

// Record layout: Sentence = {"tokens":[int],"lang":int,"sem":[int]|null};
// pair = {"a":Sentence,"b":Sentence} plus optional "neg", "score", "label".
// Labeled sentences are Sentence records with an extra "label".

inline Json sentence_to_json(const Sentence& s) {
  Json j;
  j["tokens"] = s.tokens;
  j["lang"] = s.lang;
  j["sem"] = s.sem ? Json(*s.sem) : Json(nullptr);
  return j;
}

inline Json pair_to_json(const PairRecord& r) {
  Json j;
  j["a"] = sentence_to_json(r.a);
  j["b"] = sentence_to_json(r.b);
  if (r.neg) j["neg"] = sentence_to_json(*r.neg);
  if (r.score) j["score"] = *r.score;
  if (r.label) j["label"] = *r.label;
  return j;
}

inline Json labeled_to_json(const LabeledSentence& s) {
  Json j = sentence_to_json(s.sentence);
  j["label"] = s.label;
  return j;
}

namespace detail {

inline std::vector<std::size_t> id_list(const Json& j, const std::string& what) {
  if (!j.is_array()) throw DataError(what + " must be an array of non-negative integers");
  std::vector<std::size_t> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number_unsigned()) throw DataError(what + " must hold non-negative integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

}  // namespace detail

inline Sentence sentence_from_json(const Json& j) {
  if (!j.is_object()) throw DataError("sentence record must be an object");
  if (!j.contains("tokens") || !j.contains("lang")) {
    throw DataError("sentence record needs \"tokens\" and \"lang\"");
  }
  Sentence s;
  s.tokens = detail::id_list(j.at("tokens"), "\"tokens\"");
  if (!j.at("lang").is_number_unsigned()) throw DataError("\"lang\" must be a non-negative integer");
  s.lang = j.at("lang").get<std::size_t>();
  if (j.contains("sem") && !j.at("sem").is_null()) {
    s.sem = detail::id_list(j.at("sem"), "\"sem\"");
    if (s.sem->size() != s.tokens.size()) throw DataError("\"sem\" length differs from \"tokens\"");
  }
  return s;
}

inline PairRecord pair_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("a") || !j.contains("b")) {
    throw DataError("pair record needs \"a\" and \"b\"");
  }
  PairRecord r;
  r.a = sentence_from_json(j.at("a"));
  r.b = sentence_from_json(j.at("b"));
  if (j.contains("neg") && !j.at("neg").is_null()) r.neg = sentence_from_json(j.at("neg"));
  if (j.contains("score") && !j.at("score").is_null()) {
    if (!j.at("score").is_number()) throw DataError("\"score\" must be a number");
    r.score = j.at("score").get<double>();
  }
  if (j.contains("label") && !j.at("label").is_null()) {
    if (!j.at("label").is_number_integer()) throw DataError("\"label\" must be an integer");
    r.label = j.at("label").get<int>();
  }
  return r;
}

inline LabeledSentence labeled_from_json(const Json& j) {
  LabeledSentence s{sentence_from_json(j), 0};
  if (!j.contains("label") || !j.at("label").is_number_integer()) {
    throw DataError("labeled sentence needs an integer \"label\"");
  }
  s.label = j.at("label").get<int>();
  return s;
}

template <class T, class ToJson>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& records, ToJson&& to_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

/// Reads one JSON value per non-empty line; any parse or schema failure is
/// a DataError naming the file and line.
template <class FromJson>
auto read_jsonl(const std::filesystem::path& path, FromJson&& from_json) {
  using T = decltype(from_json(Json{}));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline void write_sentences(const std::filesystem::path& p, const std::vector<Sentence>& xs) {
  write_jsonl(p, xs, sentence_to_json);
}
inline void write_pairs(const std::filesystem::path& p, const std::vector<PairRecord>& xs) {
  write_jsonl(p, xs, pair_to_json);
}
inline void write_labeled(const std::filesystem::path& p, const std::vector<LabeledSentence>& xs) {
  write_jsonl(p, xs, labeled_to_json);
}
inline std::vector<Sentence> read_sentences(const std::filesystem::path& p) {
  return read_jsonl(p, sentence_from_json);
}
inline std::vector<PairRecord> read_pairs(const std::filesystem::path& p) {
  return read_jsonl(p, pair_from_json);
}
inline std::vector<LabeledSentence> read_labeled(const std::filesystem::path& p) {
  return read_jsonl(p, labeled_from_json);
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace msim
