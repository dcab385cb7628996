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

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "msim/batch.hpp"
#include "msim/corpus.hpp"
#include "msim/encoder.hpp"
#include "msim/errors.hpp"
#include "msim/rng.hpp"
#include "msim/train.hpp"

namespace msim {

// ---------------------------------------------------------------------------
// Document layer: sections of `key = value` lines.

struct ConfigValue {
  using List = std::vector<ConfigValue>;
  // Non-negative integers are stored unsigned so 64-bit seeds round-trip.
  std::variant<std::uint64_t, std::int64_t, double, bool, std::string, List> v;
  int line = 0;
};

using ConfigSection = std::map<std::string, ConfigValue>;
using ConfigDocument = std::map<std::string, ConfigSection>;

namespace detail {

class ValueParser {
 public:
  ValueParser(std::string_view text, int line) : s_(text), line_(line) {}

  ConfigValue parse_all() {
    ConfigValue v = parse();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  ConfigValue parse() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return {parse_string(), line_};
    if (c == '[') return parse_list();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return {true, line_};
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return {false, line_};
    }
    return parse_number();
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\') {
        if (++pos_ >= s_.size()) break;
        const char e = s_[pos_];
        if (e == 'n') out += '\n';
        else if (e == 't') out += '\t';
        else if (e == '"' || e == '\\') out += e;
        else fail(std::string("unknown escape \\") + e);
      } else {
        out += s_[pos_];
      }
      ++pos_;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  ConfigValue parse_list() {
    ++pos_;
    ConfigValue::List items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return {items, line_};
    }
    while (true) {
      items.push_back(parse());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated list");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in list");
    }
    return {items, line_};
  }

  ConfigValue parse_number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::string_view("+-0123456789.eE_").find(s_[pos_]) != std::string_view::npos) {
      ++pos_;
    }
    std::string tok(s_.substr(start, pos_ - start));
    tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
    if (tok.empty()) fail("unrecognized value");
    const char* b = tok.data();
    const char* e = tok.data() + tok.size();
    if (tok.find_first_of(".eE") == std::string::npos) {
      if (tok[0] == '-') {
        std::int64_t i = 0;
        auto [ptr, ec] = std::from_chars(b, e, i);
        if (ec != std::errc() || ptr != e) fail("bad integer '" + tok + "'");
        return {i, line_};
      }
      std::uint64_t u = 0;
      const char* p = b + (tok[0] == '+' ? 1 : 0);
      auto [ptr, ec] = std::from_chars(p, e, u);
      if (ec != std::errc() || ptr != e) fail("bad integer '" + tok + "'");
      return {u, line_};
    }
    double d = 0.0;
    const char* p = b + (tok[0] == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(p, e, d);
    if (ec != std::errc() || ptr != e) fail("bad number '" + tok + "'");
    return {d, line_};
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
};

inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace detail

/// Parses `[section]` headers and `key = value` lines. Values are integers,
/// floats, booleans, double-quoted strings, or flat/nested lists of those.
inline ConfigDocument parse_config_document(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = detail::trim(detail::strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": bad section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (!detail::valid_key(section)) {
        throw ConfigError("line " + std::to_string(line) + ": bad section name '" + section + "'");
      }
      if (doc.count(section)) {
        throw ConfigError("line " + std::to_string(line) + ": duplicate section [" + section + "]");
      }
      doc[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    if (!detail::valid_key(key)) throw ConfigError("line " + std::to_string(line) + ": bad key '" + key + "'");
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' outside any section");
    }
    auto& sec = doc[section];
    if (sec.count(key)) {
      throw ConfigError("line " + std::to_string(line) + ": duplicate key [" + section + "]." + key);
    }
    sec[key] = detail::ValueParser(detail::trim(s.substr(eq + 1)), line).parse_all();
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Typed experiment configuration.

struct ExperimentSection {
  std::string name = "default";
  std::uint64_t seed = 0;
  friend bool operator==(const ExperimentSection&, const ExperimentSection&) = default;
};

struct CorpusSection {
  std::uint64_t seed = 0;
  std::size_t semantic_vocab = 2000;
  std::size_t languages = 4;
  std::size_t topic_pools = 15;
  std::size_t topic_pool_size = 40;
  std::size_t generic_pool_size = 100;
  std::size_t min_len = 3;
  std::size_t max_len = 6;
  std::size_t unsupervised_count = 0;
  std::size_t unsupervised_lang = 0;
  std::size_t nli_count = 64000;
  std::size_t nli_lang = 0;
  std::size_t xnli_count = 0;
  std::vector<std::size_t> xnli_pool = {0, 1, 2, 3};
  std::size_t parallel_count = 0;
  std::size_t parallel_src = 0;
  std::size_t parallel_tgt = 1;
  std::size_t eval_pivot = 0;
  std::vector<std::size_t> eval_langs = {1, 2, 3};
  std::size_t eval_parallel_count = 500;
  std::size_t sts_count = 600;
  std::vector<std::string> sts_pairs = {"0-0", "0-1"};
  std::size_t topics_count = 600;
  std::size_t topics_lang = 0;
  std::size_t topics_k = 15;
  std::size_t probe_items = 500;
  friend bool operator==(const CorpusSection&, const CorpusSection&) = default;

  LexiconConfig lexicon() const {
    LexiconConfig c;
    c.semantic_vocab = semantic_vocab;
    c.languages = languages;
    c.topic_pools = topic_pools;
    c.topic_pool_size = topic_pool_size;
    c.generic_pool_size = generic_pool_size;
    c.min_len = min_len;
    c.max_len = max_len;
    c.seed = seed;
    return c;
  }
};

struct InitSection {
  std::uint64_t seed = 0;
  std::size_t dim = 32;
  double offset_scale = 2.0;
  double noise_scale = 0.1;
  friend bool operator==(const InitSection&, const InitSection&) = default;
};

struct EncoderSection {
  std::uint64_t seed = 0;
  std::size_t hidden_layers = 2;
  std::size_t hidden_dim = 32;
  std::size_t output_dim = 32;
  double dropout = 0.1;
  double identity_gain = 1.0;
  double init_std = 0.5;
  friend bool operator==(const EncoderSection&, const EncoderSection&) = default;

  EncoderConfig encoder() const {
    EncoderConfig c;
    c.hidden_layers = hidden_layers;
    c.hidden_dim = hidden_dim;
    c.output_dim = output_dim;
    c.dropout = dropout;
    c.identity_gain = identity_gain;
    c.init_std = init_std;
    c.seed = seed;
    return c;
  }
};

struct TrainSection {
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::size_t max_steps = 2000;
  double learning_rate = 1e-3;
  double temperature = 0.05;
  bool shared_hard_negatives = true;
  bool drop_hard_negatives = false;
  bool train_embeddings = true;
  double mix_unsupervised = 0.0;
  double mix_nli = 1.0;
  double mix_xnli = 0.0;
  double mix_parallel = 0.0;
  friend bool operator==(const TrainSection&, const TrainSection&) = default;

  StrategyMix mix() const {
    StrategyMix m;
    m[Strategy::kUnsupervised] = mix_unsupervised;
    m[Strategy::kNli] = mix_nli;
    m[Strategy::kXnli] = mix_xnli;
    m[Strategy::kParallel] = mix_parallel;
    return m;
  }

  TrainConfig train() const {
    TrainConfig c;
    c.batch_size = batch_size;
    c.epochs = epochs;
    c.max_steps = max_steps;
    c.learning_rate = learning_rate;
    c.temperature = temperature;
    c.shared_hard_negatives = shared_hard_negatives;
    c.drop_hard_negatives = drop_hard_negatives;
    c.train_embeddings = train_embeddings;
    c.mix = mix();
    c.seed = seed;
    return c;
  }
};

inline const std::vector<std::string>& known_evaluators() {
  static const std::vector<std::string> names = {"retrieval", "mining", "sts", "clustering",
                                                 "probe"};
  return names;
}

struct EvalSection {
  std::uint64_t seed = 0;
  std::vector<std::string> evaluators = known_evaluators();
  std::size_t mining_grid = 200;
  std::size_t mining_distractors = 100;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_max_iter = 300;
  std::size_t probe_epochs = 500;
  double probe_lr = 0.1;
  double probe_train_fraction = 0.5;
  friend bool operator==(const EvalSection&, const EvalSection&) = default;

  bool wants(const std::string& name) const {
    return std::find(evaluators.begin(), evaluators.end(), name) != evaluators.end();
  }
};

struct AblationSection {
  std::uint64_t seed = 0;
  std::vector<std::size_t> counts = {0, 100, 1000, 10000};
  std::size_t repeats = 3;
  friend bool operator==(const AblationSection&, const AblationSection&) = default;
};

struct ExperimentConfig {
  ExperimentSection experiment;
  CorpusSection corpus;
  InitSection init;
  EncoderSection encoder;
  TrainSection train;
  EvalSection eval;
  AblationSection ablation;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Calls `f(section, key, field, required)` for every field in canonical
/// order. Seeds are the required fields.
template <class Config, class F>
void visit_config_fields(Config& c, F&& f) {
  f("experiment", "name", c.experiment.name, false);
  f("experiment", "seed", c.experiment.seed, true);

  auto& k = c.corpus;
  f("corpus", "seed", k.seed, true);
  f("corpus", "semantic_vocab", k.semantic_vocab, false);
  f("corpus", "languages", k.languages, false);
  f("corpus", "topic_pools", k.topic_pools, false);
  f("corpus", "topic_pool_size", k.topic_pool_size, false);
  f("corpus", "generic_pool_size", k.generic_pool_size, false);
  f("corpus", "min_len", k.min_len, false);
  f("corpus", "max_len", k.max_len, false);
  f("corpus", "unsupervised_count", k.unsupervised_count, false);
  f("corpus", "unsupervised_lang", k.unsupervised_lang, false);
  f("corpus", "nli_count", k.nli_count, false);
  f("corpus", "nli_lang", k.nli_lang, false);
  f("corpus", "xnli_count", k.xnli_count, false);
  f("corpus", "xnli_pool", k.xnli_pool, false);
  f("corpus", "parallel_count", k.parallel_count, false);
  f("corpus", "parallel_src", k.parallel_src, false);
  f("corpus", "parallel_tgt", k.parallel_tgt, false);
  f("corpus", "eval_pivot", k.eval_pivot, false);
  f("corpus", "eval_langs", k.eval_langs, false);
  f("corpus", "eval_parallel_count", k.eval_parallel_count, false);
  f("corpus", "sts_count", k.sts_count, false);
  f("corpus", "sts_pairs", k.sts_pairs, false);
  f("corpus", "topics_count", k.topics_count, false);
  f("corpus", "topics_lang", k.topics_lang, false);
  f("corpus", "topics_k", k.topics_k, false);
  f("corpus", "probe_items", k.probe_items, false);

  f("init", "seed", c.init.seed, true);
  f("init", "dim", c.init.dim, false);
  f("init", "offset_scale", c.init.offset_scale, false);
  f("init", "noise_scale", c.init.noise_scale, false);

  auto& e = c.encoder;
  f("encoder", "seed", e.seed, true);
  f("encoder", "hidden_layers", e.hidden_layers, false);
  f("encoder", "hidden_dim", e.hidden_dim, false);
  f("encoder", "output_dim", e.output_dim, false);
  f("encoder", "dropout", e.dropout, false);
  f("encoder", "identity_gain", e.identity_gain, false);
  f("encoder", "init_std", e.init_std, false);

  auto& t = c.train;
  f("train", "seed", t.seed, true);
  f("train", "batch_size", t.batch_size, false);
  f("train", "epochs", t.epochs, false);
  f("train", "max_steps", t.max_steps, false);
  f("train", "learning_rate", t.learning_rate, false);
  f("train", "temperature", t.temperature, false);
  f("train", "shared_hard_negatives", t.shared_hard_negatives, false);
  f("train", "drop_hard_negatives", t.drop_hard_negatives, false);
  f("train", "train_embeddings", t.train_embeddings, false);
  f("train", "mix_unsupervised", t.mix_unsupervised, false);
  f("train", "mix_nli", t.mix_nli, false);
  f("train", "mix_xnli", t.mix_xnli, false);
  f("train", "mix_parallel", t.mix_parallel, false);

  auto& v = c.eval;
  f("eval", "seed", v.seed, true);
  f("eval", "evaluators", v.evaluators, false);
  f("eval", "mining_grid", v.mining_grid, false);
  f("eval", "mining_distractors", v.mining_distractors, false);
  f("eval", "kmeans_restarts", v.kmeans_restarts, false);
  f("eval", "kmeans_max_iter", v.kmeans_max_iter, false);
  f("eval", "probe_epochs", v.probe_epochs, false);
  f("eval", "probe_lr", v.probe_lr, false);
  f("eval", "probe_train_fraction", v.probe_train_fraction, false);

  f("ablation", "seed", c.ablation.seed, true);
  f("ablation", "counts", c.ablation.counts, false);
  f("ablation", "repeats", c.ablation.repeats, false);
}

inline const std::vector<std::string>& config_sections() {
  static const std::vector<std::string> names = {"experiment", "corpus", "init", "encoder",
                                                 "train", "eval", "ablation"};
  return names;
}

namespace detail {

inline std::string field_name(const std::string& section, const std::string& key) {
  return "[" + section + "]." + key;
}

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "config fields assume 64-bit size_t");

inline void read_value(const ConfigValue& v, const std::string& field, std::uint64_t& out) {
  if (const auto* u = std::get_if<std::uint64_t>(&v.v)) {
    out = *u;
    return;
  }
  if (const auto* i = std::get_if<std::int64_t>(&v.v)) {
    throw ConfigError(field + " must be >= 0, got " + std::to_string(*i));
  }
  throw ConfigError(field + " (line " + std::to_string(v.line) + ") must be an integer");
}

inline void read_value(const ConfigValue& v, const std::string& field, double& out) {
  if (const auto* d = std::get_if<double>(&v.v)) {
    out = *d;
  } else if (const auto* i = std::get_if<std::int64_t>(&v.v)) {
    out = static_cast<double>(*i);
  } else if (const auto* u = std::get_if<std::uint64_t>(&v.v)) {
    out = static_cast<double>(*u);
  } else {
    throw ConfigError(field + " (line " + std::to_string(v.line) + ") must be a number");
  }
}

inline void read_value(const ConfigValue& v, const std::string& field, bool& out) {
  const auto* b = std::get_if<bool>(&v.v);
  if (!b) throw ConfigError(field + " (line " + std::to_string(v.line) + ") must be true or false");
  out = *b;
}

inline void read_value(const ConfigValue& v, const std::string& field, std::string& out) {
  const auto* s = std::get_if<std::string>(&v.v);
  if (!s) throw ConfigError(field + " (line " + std::to_string(v.line) + ") must be a string");
  out = *s;
}

template <class T>
void read_value(const ConfigValue& v, const std::string& field, std::vector<T>& out) {
  const auto* list = std::get_if<ConfigValue::List>(&v.v);
  if (!list) throw ConfigError(field + " (line " + std::to_string(v.line) + ") must be a list");
  out.clear();
  for (const auto& item : *list) {
    T x{};
    read_value(item, field + "[]", x);
    out.push_back(std::move(x));
  }
}

inline std::string format_double(double d) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, ptr);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string write_value(std::uint64_t x) { return std::to_string(x); }
inline std::string write_value(double x) { return format_double(x); }
inline std::string write_value(bool x) { return x ? "true" : "false"; }
inline std::string write_value(const std::string& x) { return quote(x); }
template <class T>
std::string write_value(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + write_value(xs[i]);
  return out + "]";
}

inline std::string join_langs(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

}  // namespace detail

/// Splits an STS pair spec such as "0-1" into its two languages.
inline std::pair<std::size_t, std::size_t> parse_lang_pair(const std::string& spec) {
  const auto dash = spec.find('-');
  std::size_t a = 0, b = 0;
  const char* s = spec.data();
  const char* e = spec.data() + spec.size();
  if (dash == std::string::npos ||
      std::from_chars(s, s + dash, a).ptr != s + dash ||
      std::from_chars(s + dash + 1, e, b).ptr != e || dash == 0 || dash + 1 == spec.size()) {
    throw ConfigError("language pair '" + spec + "' must look like \"0-1\"");
  }
  return {a, b};
}

/// Field-level validation; the message always names the offending field.
inline void validate_config(const ExperimentConfig& c) {
  auto field_error = [](const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
  };
  const auto& k = c.corpus;
  try {
    SemanticLexicon probe(k.lexicon());
  } catch (const ConfigError& e) {
    field_error("[corpus]", e.what());
  }
  auto lang_ok = [&](std::size_t l, const std::string& field) {
    if (l >= k.languages) {
      field_error(field, "language " + std::to_string(l) + " outside [0, " +
                             std::to_string(k.languages) + ")");
    }
  };
  lang_ok(k.unsupervised_lang, "[corpus].unsupervised_lang");
  lang_ok(k.nli_lang, "[corpus].nli_lang");
  if (k.xnli_pool.empty()) field_error("[corpus].xnli_pool", "must not be empty");
  for (auto l : k.xnli_pool) lang_ok(l, "[corpus].xnli_pool");
  lang_ok(k.parallel_src, "[corpus].parallel_src");
  lang_ok(k.parallel_tgt, "[corpus].parallel_tgt");
  if (k.parallel_src == k.parallel_tgt) {
    field_error("[corpus].parallel_tgt", "must differ from parallel_src");
  }
  lang_ok(k.eval_pivot, "[corpus].eval_pivot");
  for (auto l : k.eval_langs) {
    lang_ok(l, "[corpus].eval_langs");
    if (l == k.eval_pivot) field_error("[corpus].eval_langs", "must not contain eval_pivot");
  }
  for (const auto& p : k.sts_pairs) {
    try {
      const auto [a, b] = parse_lang_pair(p);
      lang_ok(a, "[corpus].sts_pairs");
      lang_ok(b, "[corpus].sts_pairs");
    } catch (const ConfigError& e) {
      if (std::string(e.what()).rfind("[corpus]", 0) == 0) throw;
      field_error("[corpus].sts_pairs", e.what());
    }
  }
  lang_ok(k.topics_lang, "[corpus].topics_lang");
  if (k.topics_k < 1 || k.topics_k > k.topic_pools) {
    field_error("[corpus].topics_k", "must be in [1, topic_pools]");
  }

  if (c.init.dim < 2) field_error("[init].dim", "must be >= 2");
  if (!(c.init.offset_scale >= 0.0)) field_error("[init].offset_scale", "must be >= 0");
  if (!(c.init.noise_scale >= 0.0)) field_error("[init].noise_scale", "must be >= 0");

  const auto& e = c.encoder;
  if (e.hidden_dim < 1) field_error("[encoder].hidden_dim", "must be >= 1");
  if (e.output_dim < 1) field_error("[encoder].output_dim", "must be >= 1");
  if (!(e.dropout >= 0.0 && e.dropout < 1.0)) field_error("[encoder].dropout", "must be in [0, 1)");
  if (!std::isfinite(e.identity_gain)) field_error("[encoder].identity_gain", "must be finite");
  if (!(e.init_std >= 0.0) || !std::isfinite(e.init_std)) {
    field_error("[encoder].init_std", "must be finite and >= 0");
  }

  const auto& t = c.train;
  if (t.batch_size < 2) field_error("[train].batch_size", "must be >= 2");
  if (t.epochs < 1) field_error("[train].epochs", "must be >= 1");
  if (!(t.learning_rate >= 0.0) || !std::isfinite(t.learning_rate)) {
    field_error("[train].learning_rate", "must be finite and >= 0");
  }
  if (!(t.temperature > 0.0) || !std::isfinite(t.temperature)) {
    field_error("[train].temperature", "must be finite and > 0");
  }
  const std::pair<const char*, double> mix[] = {{"mix_unsupervised", t.mix_unsupervised},
                                                {"mix_nli", t.mix_nli},
                                                {"mix_xnli", t.mix_xnli},
                                                {"mix_parallel", t.mix_parallel}};
  double total = 0.0;
  for (const auto& [name, w] : mix) {
    if (!(w >= 0.0) || !std::isfinite(w)) field_error(std::string("[train].") + name, "must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) field_error("[train].mix_*", "mix weights must sum to > 0");

  const auto& v = c.eval;
  for (const auto& name : v.evaluators) {
    const auto& known = known_evaluators();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      field_error("[eval].evaluators", "unknown evaluator '" + name + "'");
    }
  }
  if (!(v.probe_train_fraction > 0.0 && v.probe_train_fraction < 1.0)) {
    field_error("[eval].probe_train_fraction", "must be in (0, 1)");
  }
  if (!(v.probe_lr > 0.0) || !std::isfinite(v.probe_lr)) field_error("[eval].probe_lr", "must be > 0");
  if (v.kmeans_restarts < 1) field_error("[eval].kmeans_restarts", "must be >= 1");
  if (2 * v.mining_distractors >= k.eval_parallel_count && v.wants("mining") &&
      !k.eval_langs.empty()) {
    field_error("[eval].mining_distractors", "needs 2 * mining_distractors < eval_parallel_count");
  }

  const auto& a = c.ablation;
  if (a.repeats < 1) field_error("[ablation].repeats", "must be >= 1");
  for (std::size_t i = 1; i < a.counts.size(); ++i) {
    if (a.counts[i] <= a.counts[i - 1]) field_error("[ablation].counts", "must be strictly ascending");
  }
}

/// Builds a typed config from a parsed document. Unknown sections or keys
/// and missing seeds are errors; other missing keys keep their defaults.
inline ExperimentConfig config_from_document(const ConfigDocument& doc) {
  for (const auto& [section, keys] : doc) {
    const auto& known = config_sections();
    if (std::find(known.begin(), known.end(), section) == known.end()) {
      throw ConfigError("unknown section [" + section + "]");
    }
  }
  ExperimentConfig c;
  std::set<std::string> consumed;
  visit_config_fields(c, [&](const std::string& section, const std::string& key, auto& field,
                             bool required) {
    const std::string name = detail::field_name(section, key);
    const auto sec = doc.find(section);
    const ConfigValue* v = nullptr;
    if (sec != doc.end()) {
      const auto it = sec->second.find(key);
      if (it != sec->second.end()) v = &it->second;
    }
    if (!v) {
      if (required) throw ConfigError("missing required field " + name);
      return;
    }
    detail::read_value(*v, name, field);
    consumed.insert(name);
  });
  for (const auto& [section, keys] : doc) {
    for (const auto& [key, value] : keys) {
      const std::string name = detail::field_name(section, key);
      if (!consumed.count(name)) {
        throw ConfigError("unknown key " + name + " (line " + std::to_string(value.line) + ")");
      }
    }
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  return config_from_document(parse_config_document(text));
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Canonical text: every field, fixed order, shortest round-trip numbers.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::string out, current;
  auto& mc = const_cast<ExperimentConfig&>(c);
  visit_config_fields(mc, [&](const std::string& section, const std::string& key,
                              const auto& field, bool) {
    if (section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + section + "]\n";
      current = section;
    }
    out += key + " = " + detail::write_value(field) + "\n";
  });
  return out;
}

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

inline std::string config_hash(const ExperimentConfig& c) {
  return sha256_hex(serialize_config(c));
}

/// Replaces every section seed with one derived from `seed`.
inline ExperimentConfig with_seed(ExperimentConfig c, std::uint64_t seed) {
  c.experiment.seed = seed;
  c.corpus.seed = derive_seed(seed, "corpus");
  c.init.seed = derive_seed(seed, "init");
  c.encoder.seed = derive_seed(seed, "encoder");
  c.train.seed = derive_seed(seed, "train");
  c.eval.seed = derive_seed(seed, "eval");
  c.ablation.seed = derive_seed(seed, "ablation");
  return c;
}

/// The runnable toy-scale defaults with every seed derived from `seed`.
inline ExperimentConfig default_config(std::uint64_t seed) {
  return with_seed(ExperimentConfig{}, seed);
}

}  // namespace msim
