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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "msim/errors.hpp"
#include "msim/rng.hpp"
#include "msim/tensor.hpp"

namespace msim {

using Language = std::size_t;
using SemanticId = std::size_t;
using TokenId = std::size_t;

struct Sentence {
  std::vector<TokenId> tokens;
  Language lang = 0;
  /// Semantic ids behind the surface tokens. Never shown to the encoder;
  /// absent for external corpora.
  std::optional<std::vector<SemanticId>> sem;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

/// Generic record for every corpus file: parallel pairs, NLI triples
/// (`neg` = contradiction), STS pairs (`score`), or topic-labeled sentences
/// (`label`, with `b` unused).
struct PairRecord {
  Sentence a;
  Sentence b;
  std::optional<Sentence> neg;
  std::optional<double> score;
  std::optional<int> label;

  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

struct LabeledSentence {
  Sentence sentence;
  int label = 0;

  friend bool operator==(const LabeledSentence&, const LabeledSentence&) = default;
};

struct LexiconConfig {
  std::size_t semantic_vocab = 2000;
  std::size_t languages = 4;
  std::size_t topic_pools = 15;
  std::size_t topic_pool_size = 40;
  std::size_t generic_pool_size = 100;
  std::size_t min_len = 3;
  std::size_t max_len = 6;
  std::uint64_t seed = 0;
};

/// The synthetic semantic world shared by every language.
///
/// Id layout: [0, G) is the generic filler pool used by entailments, then
/// `topic_pools` consecutive blocks of `topic_pool_size` ids, then common
/// ids. Every non-generic id takes part in the antonym involution.
class SemanticLexicon {
 public:
  explicit SemanticLexicon(const LexiconConfig& cfg) : cfg_(cfg) {
    if (cfg.languages < 1) throw ConfigError("languages must be >= 1");
    if (cfg.min_len < 1 || cfg.max_len < cfg.min_len) {
      throw ConfigError("sentence lengths need 1 <= min_len <= max_len");
    }
    const std::size_t reserved =
        cfg.generic_pool_size + cfg.topic_pools * cfg.topic_pool_size;
    if (cfg.generic_pool_size < 1 || reserved + 2 * cfg.max_len > cfg.semantic_vocab) {
      throw ConfigError("semantic_vocab " + std::to_string(cfg.semantic_vocab) +
                        " too small for generic/topic pools and max_len");
    }
    if (cfg.topic_pools > 0 && cfg.topic_pool_size < cfg.max_len) {
      throw ConfigError("topic_pool_size must be >= max_len");
    }
    antonym_.assign(cfg.semantic_vocab, kNone);
    std::vector<SemanticId> eligible;
    for (SemanticId s = cfg.generic_pool_size; s < cfg.semantic_vocab; ++s) {
      eligible.push_back(s);
    }
    Rng rng(derive_seed(cfg.seed, "antonyms"));
    rng.shuffle(eligible);
    for (std::size_t i = 0; i + 1 < eligible.size(); i += 2) {
      antonym_[eligible[i]] = eligible[i + 1];
      antonym_[eligible[i + 1]] = eligible[i];
    }
  }

  const LexiconConfig& config() const noexcept { return cfg_; }
  std::size_t vocab() const noexcept { return cfg_.semantic_vocab; }
  std::size_t languages() const noexcept { return cfg_.languages; }
  std::size_t surface_vocab() const noexcept { return vocab() * languages(); }

  bool has_antonym(SemanticId s) const { return s < vocab() && antonym_[s] != kNone; }
  SemanticId antonym(SemanticId s) const {
    if (!has_antonym(s)) throw LexiconError("id " + std::to_string(s) + " has no antonym");
    return antonym_[s];
  }

  bool is_generic(SemanticId s) const { return s < cfg_.generic_pool_size; }
  SemanticId content_begin() const { return cfg_.generic_pool_size; }

  SemanticId topic_begin(std::size_t pool) const {
    return cfg_.generic_pool_size + pool * cfg_.topic_pool_size;
  }
  SemanticId common_begin() const { return topic_begin(cfg_.topic_pools); }

  /// Topic pool owning `s`, if any.
  std::optional<std::size_t> topic_of(SemanticId s) const {
    if (s < topic_begin(0) || s >= common_begin()) return std::nullopt;
    return (s - topic_begin(0)) / cfg_.topic_pool_size;
  }

 private:
  static constexpr SemanticId kNone = static_cast<SemanticId>(-1);
  LexiconConfig cfg_;
  std::vector<SemanticId> antonym_;
};

// ---------------------------------------------------------------------------
// Rendering

inline Sentence render(const SemanticLexicon& lex,
                       const std::vector<SemanticId>& ids, Language lang) {
  if (lang >= lex.languages()) {
    throw LexiconError("language " + std::to_string(lang) + " outside [0, " +
                       std::to_string(lex.languages()) + ")");
  }
  Sentence s;
  s.lang = lang;
  s.tokens.reserve(ids.size());
  for (SemanticId id : ids) {
    if (id >= lex.vocab()) {
      throw LexiconError("semantic id " + std::to_string(id) + " >= vocab " +
                         std::to_string(lex.vocab()));
    }
    s.tokens.push_back(lang * lex.vocab() + id);
  }
  s.sem = ids;
  return s;
}

/// Inverse of render(); recovers semantic ids from surface tokens alone.
inline std::vector<SemanticId> derender(const SemanticLexicon& lex,
                                        const Sentence& s) {
  std::vector<SemanticId> ids;
  ids.reserve(s.tokens.size());
  for (TokenId t : s.tokens) {
    if (t / lex.vocab() != s.lang) {
      throw LexiconError("token " + std::to_string(t) +
                         " does not belong to language " + std::to_string(s.lang));
    }
    ids.push_back(t % lex.vocab());
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Generators. Record i depends only on (seed, i), so a corpus of n records is
// a prefix of the corpus of n+1 records with the same seed.

namespace detail {

/// `count` distinct ids drawn uniformly from [lo, hi), avoiding `exclude`.
inline std::vector<SemanticId> draw_distinct(
    Rng& rng, std::size_t count, SemanticId lo, SemanticId hi,
    const std::unordered_set<SemanticId>& exclude = {}) {
  std::vector<SemanticId> out;
  std::unordered_set<SemanticId> seen = exclude;
  while (out.size() < count) {
    const SemanticId s = lo + rng.below(hi - lo);
    if (seen.insert(s).second) out.push_back(s);
  }
  return out;
}

inline std::size_t draw_length(Rng& rng, const LexiconConfig& cfg,
                               std::size_t floor = 1) {
  const std::size_t lo = std::max(cfg.min_len, floor);
  return static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(cfg.max_len)));
}

inline std::vector<SemanticId> draw_content(Rng& rng, const SemanticLexicon& lex,
                                            std::size_t len) {
  return draw_distinct(rng, len, lex.content_begin(), lex.vocab());
}

inline void check_language(const SemanticLexicon& lex, Language l) {
  if (l >= lex.languages()) {
    throw ConfigError("language " + std::to_string(l) + " outside [0, " +
                      std::to_string(lex.languages()) + ")");
  }
}

}  // namespace detail

/// Monolingual sentences (the unsupervised-strategy corpus).
inline std::vector<Sentence> gen_sentences(const SemanticLexicon& lex,
                                           std::size_t n, Language lang,
                                           std::uint64_t seed) {
  detail::check_language(lex, lang);
  std::vector<Sentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    out.push_back(render(lex, detail::draw_content(rng, lex, detail::draw_length(rng, lex.config())), lang));
  }
  return out;
}

inline std::vector<PairRecord> gen_parallel(const SemanticLexicon& lex,
                                            std::size_t n, Language lang_a,
                                            Language lang_b, std::uint64_t seed) {
  if (lang_a == lang_b) {
    throw ConfigError("parallel corpus needs two different languages, got " +
                      std::to_string(lang_a) + " twice");
  }
  detail::check_language(lex, lang_a);
  detail::check_language(lex, lang_b);
  std::vector<PairRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const auto ids = detail::draw_content(rng, lex, detail::draw_length(rng, lex.config()));
    out.push_back(PairRecord{render(lex, ids, lang_a), render(lex, ids, lang_b),
                             std::nullopt, std::nullopt, std::nullopt});
  }
  return out;
}

/// (premise, entailment, contradiction) triples. With `cross_lingual`, each
/// of the three languages is drawn independently and uniformly from `pool`.
inline std::vector<PairRecord> gen_nli(const SemanticLexicon& lex, std::size_t n,
                                       const std::vector<Language>& pool,
                                       bool cross_lingual, std::uint64_t seed) {
  if (pool.empty()) throw ConfigError("NLI language pool is empty");
  if (!cross_lingual && pool.size() != 1) {
    throw ConfigError("monolingual NLI needs exactly one language in the pool");
  }
  for (Language l : pool) detail::check_language(lex, l);
  const auto& cfg = lex.config();
  std::vector<PairRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    std::vector<SemanticId> premise;
    std::vector<std::size_t> eligible;
    do {
      premise = detail::draw_content(rng, lex, detail::draw_length(rng, cfg, 2));
      eligible.clear();
      for (std::size_t p = 0; p < premise.size(); ++p) {
        if (lex.has_antonym(premise[p])) eligible.push_back(p);
      }
    } while (eligible.empty());

    // Entailment: a proper subset of the premise (at least half), plus up to
    // two generic fillers.
    std::vector<std::size_t> order(premise.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
    rng.shuffle(order);
    const std::size_t keep_lo = std::max<std::size_t>(1, premise.size() / 2);
    const std::size_t keep = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(keep_lo),
                    static_cast<std::int64_t>(premise.size() - 1)));
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<SemanticId> entail;
    for (std::size_t p : order) entail.push_back(premise[p]);
    const std::size_t fillers = rng.below(3);
    std::unordered_set<SemanticId> used(entail.begin(), entail.end());
    for (SemanticId f : detail::draw_distinct(rng, fillers, 0, cfg.generic_pool_size, used)) {
      entail.push_back(f);
    }

    // Contradiction: 1 or 2 antonym substitutions.
    rng.shuffle(eligible);
    const std::size_t swaps = std::min<std::size_t>(eligible.size(), 1 + rng.below(2));
    std::vector<SemanticId> contra = premise;
    for (std::size_t k = 0; k < swaps; ++k) {
      contra[eligible[k]] = lex.antonym(premise[eligible[k]]);
    }

    Language lp = pool[0], le = pool[0], lc = pool[0];
    if (cross_lingual) {
      lp = pool[rng.below(pool.size())];
      le = pool[rng.below(pool.size())];
      lc = pool[rng.below(pool.size())];
    }
    out.push_back(PairRecord{render(lex, premise, lp), render(lex, entail, le),
                             render(lex, contra, lc), std::nullopt, std::nullopt});
  }
  return out;
}

inline double jaccard(std::vector<SemanticId> a, std::vector<SemanticId> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<SemanticId> inter;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(inter));
  const std::size_t uni = a.size() + b.size() - inter.size();
  return uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

/// Graded similarity pairs. Shared-token fractions cycle through six levels
/// 0, 0.2, ..., 1.0 so gold ranks are spread over the whole [0, 5] range.
inline std::vector<PairRecord> gen_sts(const SemanticLexicon& lex, std::size_t n,
                                       Language lang_a, Language lang_b,
                                       std::uint64_t seed) {
  detail::check_language(lex, lang_a);
  detail::check_language(lex, lang_b);
  std::vector<PairRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const std::size_t len = detail::draw_length(rng, lex.config());
    const auto a = detail::draw_content(rng, lex, len);
    const double frac = static_cast<double>(i % 6) / 5.0;
    const auto shared = static_cast<std::size_t>(std::lround(frac * static_cast<double>(len)));
    std::vector<SemanticId> b(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(shared));
    std::unordered_set<SemanticId> exclude(a.begin(), a.end());
    for (SemanticId s : detail::draw_distinct(rng, len - shared, lex.content_begin(),
                                              lex.vocab(), exclude)) {
      b.push_back(s);
    }
    rng.shuffle(b);
    const double gold = 5.0 * jaccard(a, b);
    out.push_back(PairRecord{render(lex, a, lang_a), render(lex, b, lang_b),
                             std::nullopt, gold, std::nullopt});
  }
  return out;
}

/// Topic-labeled sentences: label = i mod k, and at least 80% of each
/// sentence's tokens come from the label's topic pool.
inline std::vector<LabeledSentence> gen_topics(const SemanticLexicon& lex,
                                               std::size_t n, Language lang,
                                               std::size_t k, std::uint64_t seed) {
  const auto& cfg = lex.config();
  if (k < 1 || k > cfg.topic_pools) {
    throw ConfigError("topic categories k=" + std::to_string(k) +
                      " exceeds the " + std::to_string(cfg.topic_pools) +
                      " topic pools");
  }
  detail::check_language(lex, lang);
  std::vector<LabeledSentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const std::size_t label = i % k;
    const std::size_t len = detail::draw_length(rng, cfg);
    const auto on_topic = static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(len)));
    const SemanticId lo = lex.topic_begin(label);
    auto ids = detail::draw_distinct(rng, on_topic, lo, lo + cfg.topic_pool_size);
    for (SemanticId s : detail::draw_distinct(rng, len - on_topic, lex.common_begin(), lex.vocab())) {
      ids.push_back(s);
    }
    rng.shuffle(ids);
    out.push_back(LabeledSentence{render(lex, ids, lang), static_cast<int>(label)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stand-in for multilingual pretraining: each surface token (l, s) embeds as
// E_sem[s] + offset_scale * E_lang[l] + noise. This encodes one hypothesis
// (shared semantics plus an additive language offset), not a fact about
// real pretrained models.

struct PretrainInit {
  Tensor semantic;   // [V x d]
  Tensor language;   // [L x d]
  Tensor table;      // [(L*V) x d], row l*V + s
  double offset_scale = 2.0;
  double noise_scale = 0.1;
  std::uint64_t seed = 0;
};

inline PretrainInit init_pretrained_embeddings(const SemanticLexicon& lex,
                                               std::size_t dim, double offset_scale,
                                               double noise_scale,
                                               std::uint64_t seed) {
  if (dim < 2) throw ConfigError("embedding dim must be >= 2");
  if (!(offset_scale >= 0.0)) throw ConfigError("language offset scale must be >= 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("noise scale must be >= 0");
  const std::size_t V = lex.vocab(), L = lex.languages();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));

  PretrainInit init;
  init.offset_scale = offset_scale;
  init.noise_scale = noise_scale;
  init.seed = seed;
  init.semantic = Tensor(Shape{V, dim});
  init.language = Tensor(Shape{L, dim});
  init.table = Tensor(Shape{L * V, dim});

  Rng sem_rng(derive_seed(seed, "semantic"));
  for (double& x : init.semantic.data()) x = sem_rng.normal() * inv_sqrt_d;
  Rng lang_rng(derive_seed(seed, "language"));
  for (double& x : init.language.data()) x = lang_rng.normal() * inv_sqrt_d;
  Rng noise_rng(derive_seed(seed, "noise"));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t s = 0; s < V; ++s) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double noise = noise_scale > 0.0 ? noise_rng.normal() * noise_scale : 0.0;
        init.table(l * V + s, j) =
            init.semantic(s, j) + offset_scale * init.language(l, j) + noise;
      }
    }
  }
  return init;
}

}  // namespace msim
