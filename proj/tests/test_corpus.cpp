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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "msim/corpus.hpp"
#include "msim/corpus_io.hpp"
#include "msim/errors.hpp"
#include "msim/retrieval.hpp"
#include "oracles.hpp"

namespace {

using namespace msim;

LexiconConfig small_lexicon(std::size_t vocab = 400) {
  LexiconConfig c;
  c.semantic_vocab = vocab;
  c.languages = 4;
  c.topic_pools = 5;
  c.topic_pool_size = 20;
  c.generic_pool_size = 30;
  c.min_len = 3;
  c.max_len = 6;
  c.seed = 9;
  return c;
}

std::set<SemanticId> as_set(const std::vector<SemanticId>& v) { return {v.begin(), v.end()}; }

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "msim_test_corpus";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(Lexicon, AntonymIsFixedPointFreeInvolution) {
  const SemanticLexicon lex(small_lexicon());
  std::size_t paired = 0;
  for (SemanticId s = 0; s < lex.vocab(); ++s) {
    if (lex.is_generic(s)) {
      EXPECT_FALSE(lex.has_antonym(s));
      continue;
    }
    if (!lex.has_antonym(s)) continue;
    ++paired;
    EXPECT_NE(lex.antonym(s), s);
    EXPECT_EQ(lex.antonym(lex.antonym(s)), s);
  }
  // 370 non-generic ids pair up exactly.
  EXPECT_EQ(paired, 370u);
}

TEST(Lexicon, TopicPoolsDisjoint) {
  const SemanticLexicon lex(small_lexicon());
  std::set<SemanticId> seen;
  for (std::size_t p = 0; p < 5; ++p) {
    for (SemanticId s = lex.topic_begin(p); s < lex.topic_begin(p) + 20; ++s) {
      EXPECT_TRUE(seen.insert(s).second);
      EXPECT_EQ(lex.topic_of(s), p);
      EXPECT_FALSE(lex.is_generic(s));
    }
  }
  EXPECT_EQ(lex.topic_of(lex.common_begin()), std::nullopt);
}

TEST(Lexicon, RejectsImpossibleSizes) {
  auto c = small_lexicon();
  c.semantic_vocab = 50;
  EXPECT_THROW(SemanticLexicon{c}, ConfigError);
  c = small_lexicon();
  c.max_len = 2;
  EXPECT_THROW(SemanticLexicon{c}, ConfigError);
}

TEST(Render, OffsetsByLanguage) {
  auto c = small_lexicon(100);
  c.topic_pools = 2;
  const SemanticLexicon lex(c);
  const Sentence s = render(lex, {3, 7}, 1);
  EXPECT_EQ(s.tokens, (std::vector<TokenId>{103, 107}));
  EXPECT_EQ(s.lang, 1u);
  EXPECT_EQ(render(lex, {3, 7}, 0).tokens, (std::vector<TokenId>{3, 7}));
}

TEST(Render, OutOfRangeIsLexiconError) {
  const SemanticLexicon lex(small_lexicon());
  EXPECT_THROW(render(lex, {400}, 0), LexiconError);
  EXPECT_THROW(render(lex, {1}, 4), LexiconError);
}

TEST(Render, RoundTripProperty) {
  const SemanticLexicon lex(small_lexicon());
  Rng rng(77);
  for (int i = 0; i < 1000; ++i) {
    std::vector<SemanticId> ids(1 + rng.below(10));
    for (auto& x : ids) x = rng.below(lex.vocab());
    const Language l = rng.below(lex.languages());
    const Sentence s = render(lex, ids, l);
    EXPECT_EQ(derender(lex, s), ids);
    for (std::size_t p = 0; p < ids.size(); ++p) EXPECT_EQ(s.tokens[p], l * lex.vocab() + ids[p]);
  }
}

TEST(Render, DerenderRejectsForeignToken) {
  const SemanticLexicon lex(small_lexicon());
  Sentence s = render(lex, {5}, 0);
  s.lang = 2;
  EXPECT_THROW(derender(lex, s), LexiconError);
}

TEST(Parallel, SidesShareSemanticsWithDisjointSurface) {
  const SemanticLexicon lex(small_lexicon());
  const auto pairs = gen_parallel(lex, 300, 0, 2, 5);
  ASSERT_EQ(pairs.size(), 300u);
  std::set<TokenId> side_a, side_b;
  for (const auto& p : pairs) {
    EXPECT_EQ(derender(lex, p.a), derender(lex, p.b));
    EXPECT_EQ(p.a.lang, 0u);
    EXPECT_EQ(p.b.lang, 2u);
    EXPECT_GE(p.a.tokens.size(), 3u);
    EXPECT_LE(p.a.tokens.size(), 6u);
    side_a.insert(p.a.tokens.begin(), p.a.tokens.end());
    side_b.insert(p.b.tokens.begin(), p.b.tokens.end());
  }
  for (TokenId t : side_a) EXPECT_EQ(side_b.count(t), 0u);
}

TEST(Parallel, SameLanguageIsConfigError) {
  const SemanticLexicon lex(small_lexicon());
  EXPECT_THROW(gen_parallel(lex, 10, 1, 1, 0), ConfigError);
}

TEST(Parallel, LargeCountSupported) {
  const SemanticLexicon lex(SemanticLexicon(LexiconConfig{}));
  const auto pairs = gen_parallel(lex, 100000, 0, 1, 3);
  EXPECT_EQ(pairs.size(), 100000u);
}

TEST(Generators, PrefixAndDeterminism) {
  const SemanticLexicon lex(small_lexicon());
  EXPECT_EQ(gen_parallel(lex, 50, 0, 1, 8), gen_parallel(lex, 50, 0, 1, 8));
  const auto longer = gen_nli(lex, 80, {0}, false, 8);
  const auto shorter = gen_nli(lex, 40, {0}, false, 8);
  EXPECT_TRUE(std::equal(shorter.begin(), shorter.end(), longer.begin()));
  EXPECT_NE(gen_sentences(lex, 20, 0, 1), gen_sentences(lex, 20, 0, 2));
}

TEST(Nli, EntailmentAndContradictionStructure) {
  const SemanticLexicon lex(small_lexicon());
  const auto triples = gen_nli(lex, 2000, {0}, false, 21);
  for (const auto& t : triples) {
    ASSERT_TRUE(t.neg.has_value());
    const auto premise = derender(lex, t.a);
    const auto entail = derender(lex, t.b);
    const auto contra = derender(lex, *t.neg);
    const auto pset = as_set(premise);

    std::size_t overlap = 0, fillers = 0;
    for (SemanticId s : entail) {
      if (pset.count(s)) {
        ++overlap;
      } else {
        EXPECT_TRUE(lex.is_generic(s)) << s;
        ++fillers;
      }
    }
    EXPECT_GE(overlap, 1u);
    EXPECT_LE(fillers, 2u);

    ASSERT_EQ(contra.size(), premise.size());
    std::size_t replaced = 0;
    for (std::size_t p = 0; p < premise.size(); ++p) {
      if (contra[p] != premise[p]) {
        ++replaced;
        EXPECT_EQ(contra[p], lex.antonym(premise[p]));
      }
    }
    EXPECT_GE(replaced, 1u);
    EXPECT_EQ(t.a.lang, 0u);
    EXPECT_EQ(t.b.lang, 0u);
    EXPECT_EQ(t.neg->lang, 0u);
  }
}

TEST(Nli, CrossLingualMarginalsUniform) {
  const SemanticLexicon lex(small_lexicon());
  const std::vector<Language> pool{0, 1, 3};
  const std::size_t n = 10000;
  const auto triples = gen_nli(lex, n, pool, true, 4);
  for (int role = 0; role < 3; ++role) {
    std::map<Language, std::size_t> counts;
    for (const auto& t : triples) {
      const Language l = role == 0 ? t.a.lang : role == 1 ? t.b.lang : t.neg->lang;
      ++counts[l];
    }
    EXPECT_EQ(counts.size(), 3u);
    const double expect = static_cast<double>(n) / 3.0;
    const double sd = std::sqrt(static_cast<double>(n) * (1.0 / 3.0) * (2.0 / 3.0));
    for (Language l : pool) EXPECT_NEAR(static_cast<double>(counts[l]), expect, 3.0 * sd) << role << ":" << l;
  }
}

TEST(Nli, PoolChecks) {
  const SemanticLexicon lex(small_lexicon());
  EXPECT_THROW(gen_nli(lex, 5, {}, true, 0), ConfigError);
  EXPECT_THROW(gen_nli(lex, 5, {0, 1}, false, 0), ConfigError);
}

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(5.0 * jaccard({4, 9, 2}, {2, 4, 9}), 5.0);
  EXPECT_DOUBLE_EQ(5.0 * jaccard({1, 2}, {3, 4}), 0.0);
  EXPECT_DOUBLE_EQ(5.0 * jaccard({1, 2}, {2, 3}), 5.0 / 3.0);
}

TEST(Sts, GoldIsFiveTimesJaccardAndSpansRange) {
  const SemanticLexicon lex(small_lexicon());
  const auto pairs = gen_sts(lex, 600, 0, 1, 12);
  std::set<double> levels;
  bool saw_zero = false, saw_five = false;
  for (const auto& p : pairs) {
    ASSERT_TRUE(p.score.has_value());
    const auto a = as_set(derender(lex, p.a)), b = as_set(derender(lex, p.b));
    std::size_t inter = 0;
    for (auto s : a) inter += b.count(s);
    const double expect = 5.0 * static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
    EXPECT_NEAR(*p.score, expect, 1e-12);
    EXPECT_GE(*p.score, 0.0);
    EXPECT_LE(*p.score, 5.0);
    saw_zero = saw_zero || *p.score == 0.0;
    saw_five = saw_five || *p.score == 5.0;
    levels.insert(*p.score);
  }
  EXPECT_TRUE(saw_zero);
  EXPECT_TRUE(saw_five);
  EXPECT_GE(levels.size(), 6u);
}

TEST(Sts, SameLanguageAllowed) {
  const SemanticLexicon lex(small_lexicon());
  const auto pairs = gen_sts(lex, 10, 2, 2, 1);
  for (const auto& p : pairs) EXPECT_EQ(p.a.lang, p.b.lang);
}

TEST(Topics, MostlyOnePoolAndBalanced) {
  const SemanticLexicon lex(small_lexicon());
  const std::size_t k = 5;
  const auto docs = gen_topics(lex, 503, 1, k, 6);
  std::map<int, std::size_t> counts;
  for (const auto& d : docs) {
    ++counts[d.label];
    const auto ids = derender(lex, d.sentence);
    std::size_t on = 0;
    for (SemanticId s : ids) on += lex.topic_of(s) == static_cast<std::size_t>(d.label);
    EXPECT_GE(static_cast<double>(on), 0.8 * static_cast<double>(ids.size()));
  }
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [l, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  EXPECT_EQ(counts.size(), k);
  EXPECT_LE(hi - lo, 1u);
}

TEST(Topics, WithinTopicOverlapExceedsCrossTopic) {
  const SemanticLexicon lex(small_lexicon());
  const auto docs = gen_topics(lex, 200, 0, 5, 2);
  double within = 0.0, across = 0.0;
  std::size_t nw = 0, na = 0;
  for (std::size_t i = 0; i < docs.size(); ++i)
    for (std::size_t j = i + 1; j < docs.size(); ++j) {
      const double jac = jaccard(derender(lex, docs[i].sentence), derender(lex, docs[j].sentence));
      if (docs[i].label == docs[j].label) {
        within += jac;
        ++nw;
      } else {
        across += jac;
        ++na;
      }
    }
  EXPECT_GT(within / static_cast<double>(nw), across / static_cast<double>(na));
}

TEST(Topics, TooManyCategories) {
  const SemanticLexicon lex(small_lexicon());
  EXPECT_THROW(gen_topics(lex, 10, 0, 6, 0), ConfigError);
  EXPECT_EQ(LexiconConfig{}.topic_pools, 15u);
}

TEST(PretrainInit, EntryFormula) {
  const SemanticLexicon lex(small_lexicon());
  const auto init = init_pretrained_embeddings(lex, 8, 1.5, 0.0, 3);
  const std::size_t V = lex.vocab();
  for (std::size_t l = 0; l < 4; ++l)
    for (std::size_t s = 0; s < V; s += 37)
      for (std::size_t j = 0; j < 8; ++j)
        EXPECT_DOUBLE_EQ(init.table(l * V + s, j), init.semantic(s, j) + 1.5 * init.language(l, j));
  EXPECT_EQ(init.table, init_pretrained_embeddings(lex, 8, 1.5, 0.0, 3).table);
}

TEST(PretrainInit, NoiseHasRequestedScale) {
  const SemanticLexicon lex(small_lexicon());
  const auto clean = init_pretrained_embeddings(lex, 16, 2.0, 0.0, 3);
  const auto noisy = init_pretrained_embeddings(lex, 16, 2.0, 0.3, 3);
  double ss = 0.0;
  for (std::size_t i = 0; i < clean.table.numel(); ++i) {
    const double e = noisy.table[i] - clean.table[i];
    ss += e * e;
  }
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(clean.table.numel())), 0.3, 0.01);
}

TEST(PretrainInit, ZeroOffsetAlignsTranslations) {
  const SemanticLexicon lex(small_lexicon());
  const auto init = init_pretrained_embeddings(lex, 16, 0.0, 0.0, 4);
  const std::size_t V = lex.vocab();
  for (std::size_t s = 0; s < V; ++s)
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(init.table(s, j), init.table(3 * V + s, j));

  const auto pairs = gen_parallel(lex, 200, 0, 3, 2);
  auto pool = [&](const Sentence& x) {
    std::vector<double> v(16, 0.0);
    for (TokenId t : x.tokens)
      for (std::size_t j = 0; j < 16; ++j) v[j] += init.table(t, j) / static_cast<double>(x.tokens.size());
    return v;
  };
  Tensor a(Shape{200, 16}), b(Shape{200, 16});
  std::vector<RowMeta> ma, mb;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto va = pool(pairs[i].a), vb = pool(pairs[i].b);
    std::copy(va.begin(), va.end(), a.row(i).begin());
    std::copy(vb.begin(), vb.end(), b.row(i).begin());
    ma.push_back({0, static_cast<std::int64_t>(i), -1});
    mb.push_back({3, static_cast<std::int64_t>(i), -1});
  }
  const auto r = retrieval_accuracy(EmbeddingSet(a, ma), EmbeddingSet(b, mb));
  EXPECT_DOUBLE_EQ(r.mean, 1.0);
}

TEST(PretrainInit, LargeOffsetSeparatesLanguages) {
  const SemanticLexicon lex(small_lexicon());
  const auto init = init_pretrained_embeddings(lex, 32, 4.0, 0.1, 5);
  const std::size_t V = lex.vocab();
  Rng rng(1);
  double cross = 0.0, same = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const std::size_t s = rng.below(V), t = rng.below(V);
    cross += oracle::cosine(init.table.row(s), init.table.row(2 * V + s));
    same += oracle::cosine(init.table.row(V + s), init.table.row(V + t));
  }
  EXPECT_LT(cross / n, same / n);
}

TEST(PretrainInit, RejectsBadArguments) {
  const SemanticLexicon lex(small_lexicon());
  EXPECT_THROW(init_pretrained_embeddings(lex, 1, 1.0, 0.0, 0), ConfigError);
  EXPECT_THROW(init_pretrained_embeddings(lex, 4, -1.0, 0.0, 0), ConfigError);
  EXPECT_THROW(init_pretrained_embeddings(lex, 4, 1.0, -0.5, 0), ConfigError);
}

TEST(CorpusIo, RoundTripAllRecordKinds) {
  const SemanticLexicon lex(small_lexicon());
  const auto sents = gen_sentences(lex, 30, 2, 1);
  const auto nli = gen_nli(lex, 30, {0, 1}, true, 1);
  const auto sts = gen_sts(lex, 30, 0, 1, 1);
  const auto topics = gen_topics(lex, 30, 0, 5, 1);
  write_sentences(temp_file("s.jsonl"), sents);
  write_pairs(temp_file("n.jsonl"), nli);
  write_pairs(temp_file("t.jsonl"), sts);
  write_labeled(temp_file("l.jsonl"), topics);
  EXPECT_EQ(read_sentences(temp_file("s.jsonl")), sents);
  EXPECT_EQ(read_pairs(temp_file("n.jsonl")), nli);
  EXPECT_EQ(read_pairs(temp_file("t.jsonl")), sts);
  EXPECT_EQ(read_labeled(temp_file("l.jsonl")), topics);
}

TEST(CorpusIo, SameSeedSameBytes) {
  const SemanticLexicon lex(small_lexicon());
  write_pairs(temp_file("a.jsonl"), gen_nli(lex, 50, {0}, false, 3));
  write_pairs(temp_file("b.jsonl"), gen_nli(lex, 50, {0}, false, 3));
  EXPECT_EQ(read_file_bytes(temp_file("a.jsonl")), read_file_bytes(temp_file("b.jsonl")));
}

TEST(CorpusIo, MalformedLineReportsLocation) {
  {
    std::ofstream f(temp_file("bad.jsonl"));
    f << R"({"tokens":[1,2],"lang":0})" << "\n" << R"({"tokens":"x","lang":0})" << "\n";
  }
  try {
    read_sentences(temp_file("bad.jsonl"));
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(CorpusIo, EmptyCorpusWritesEmptyFile) {
  write_pairs(temp_file("empty.jsonl"), {});
  EXPECT_EQ(std::filesystem::file_size(temp_file("empty.jsonl")), 0u);
  EXPECT_TRUE(read_pairs(temp_file("empty.jsonl")).empty());
}

}  // namespace
