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

#include <cmath>
#include <set>

#include "msim/cluster.hpp"
#include "msim/config.hpp"
#include "msim/corpus.hpp"
#include "msim/encoder.hpp"
#include "msim/pipeline.hpp"
#include "msim/probe.hpp"
#include "msim/projection.hpp"
#include "msim/retrieval.hpp"
#include "msim/sts.hpp"
#include "oracles.hpp"

namespace {

using namespace msim;

std::vector<RowMeta> metas(std::size_t n, Language lang = 0) {
  std::vector<RowMeta> m;
  for (std::size_t i = 0; i < n; ++i) m.push_back({lang, static_cast<std::int64_t>(i), -1});
  return m;
}

EmbeddingSet set_of(const Tensor& x, Language lang = 0) { return EmbeddingSet(x, metas(x.rows(), lang)); }

// ---------------------------------------------------------------------------
// EmbeddingSet

TEST(EmbeddingSet, RowsNormalizedAndMetaChecked) {
  Rng rng(1);
  const EmbeddingSet s = set_of(oracle::random_matrix(rng, 10, 4, 5.0));
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(norm2(s.row(i)), 1.0, 1e-9);
  EXPECT_THROW(EmbeddingSet(Tensor(Shape{3, 2}, 1.0), metas(2)), ContractError);
  EXPECT_THROW(EmbeddingSet(Tensor::matrix({{1, 1}, {0, 0}}), metas(2)), DegenerateVectorError);
}

// ---------------------------------------------------------------------------
// Retrieval

TEST(Retrieval, IdenticalPoolsArePerfect) {
  Rng rng(2);
  const Tensor x = oracle::random_matrix(rng, 50, 6);
  const auto r = retrieval_accuracy(set_of(x), set_of(x, 1));
  EXPECT_EQ(r.src_to_tgt, 1.0);
  EXPECT_EQ(r.tgt_to_src, 1.0);
  EXPECT_EQ(r.mean, 1.0);
}

TEST(Retrieval, HandInstanceWithConfusablePair) {
  const Tensor src = Tensor::matrix({{1, 0}, {0, 1}, {0.8, 0.6}});
  const Tensor tgt = Tensor::matrix({{1, 0}, {0, 1}, {1, -0.2}});
  const auto r = retrieval_accuracy(set_of(src), set_of(tgt, 1));
  EXPECT_NEAR(r.src_to_tgt, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.tgt_to_src, 2.0 / 3.0, 1e-15);
  const auto [fwd, bwd] = oracle::retrieval_hits(src, tgt);
  EXPECT_EQ(r.hits_src_to_tgt, fwd);
  EXPECT_EQ(r.hits_tgt_to_src, bwd);
}

TEST(Retrieval, TiesGoToLowestIndex) {
  const Tensor src = Tensor::matrix({{1, 0}, {1, 0}});
  const Tensor tgt = Tensor::matrix({{1, 0}, {1, 0}});
  const auto r = retrieval_accuracy(set_of(src), set_of(tgt));
  EXPECT_EQ(r.hits_src_to_tgt, 1u);
  EXPECT_EQ(r.hits_tgt_to_src, 1u);
}

TEST(Retrieval, MatchesBruteForceOnRandomPools) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Tensor src = oracle::random_matrix(rng, 40, 5);
    Tensor tgt = src;
    for (double& v : tgt.data()) v += rng.normal() * 0.8;
    const auto r = retrieval_accuracy(set_of(src), set_of(tgt));
    const auto [fwd, bwd] = oracle::retrieval_hits(src, tgt);
    EXPECT_EQ(r.hits_src_to_tgt, fwd);
    EXPECT_EQ(r.hits_tgt_to_src, bwd);
    EXPECT_GE(r.mean, 0.0);
    EXPECT_LE(r.mean, 1.0);
  }
}

TEST(Retrieval, EmptyPoolIsContractError) {
  EXPECT_THROW(retrieval_accuracy(EmbeddingSet(), EmbeddingSet()), ContractError);
}

// ---------------------------------------------------------------------------
// Mining

TEST(Mining, IdenticalGoldOrthogonalDistractors) {
  const Tensor src = Tensor::matrix({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}});
  const Tensor tgt = Tensor::matrix({{1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 0, 1}});
  const auto r = mine_bitext(set_of(src), set_of(tgt, 1), {{0, 0}, {1, 1}, {2, 2}});
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  EXPECT_FALSE(r.no_candidates);
}

TEST(Mining, EmptyGoldGivesZero) {
  Rng rng(4);
  const Tensor x = oracle::random_matrix(rng, 6, 3);
  const auto r = mine_bitext(set_of(x), set_of(x, 1), {});
  EXPECT_GT(r.candidates, 0u);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Mining, NoCandidatesFlagged) {
  const auto r = mine_bitext(EmbeddingSet(), EmbeddingSet(), {});
  EXPECT_TRUE(r.no_candidates);
  EXPECT_EQ(r.f1, 0.0);
}

TEST(Mining, FivePairsTwoDistractorsMatchesExhaustiveSearch) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    Tensor src = oracle::random_matrix(rng, 7, 3), tgt(Shape{7, 3});
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) tgt(i, j) = src(i, j) + rng.normal() * 0.5;
    for (std::size_t i = 5; i < 7; ++i)
      for (std::size_t j = 0; j < 3; ++j) tgt(i, j) = rng.normal();
    std::vector<std::pair<std::size_t, std::size_t>> gold;
    std::set<std::pair<std::size_t, std::size_t>> gold_set;
    for (std::size_t i = 0; i < 5; ++i) {
      gold.push_back({i, i});
      gold_set.insert({i, i});
    }
    const auto exact = mine_bitext(set_of(src), set_of(tgt, 1), gold, {0});
    const auto want = oracle::mining(src, tgt, gold_set);
    EXPECT_NEAR(exact.f1, want.f1, 1e-12) << seed;
    const auto gridded = mine_bitext(set_of(src), set_of(tgt, 1), gold);
    EXPECT_LE(gridded.f1, want.f1 + 1e-12);
    for (const auto& r : {exact, gridded}) {
      const double h = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
      EXPECT_NEAR(r.f1, h, 1e-12);
    }
  }
}

TEST(Mining, ReturnedF1DominatesGrid) {
  Rng rng(8);
  const Tensor src = oracle::random_matrix(rng, 30, 4);
  Tensor tgt = src;
  for (double& v : tgt.data()) v += rng.normal();
  std::vector<std::pair<std::size_t, std::size_t>> gold;
  for (std::size_t i = 0; i < 20; ++i) gold.push_back({i, i});
  const EmbeddingSet a = set_of(src), b = set_of(tgt, 1);
  const auto best = mine_bitext(a, b, gold, {50});
  const auto cands = mutual_nn_candidates(a, b);
  const std::set<std::pair<std::size_t, std::size_t>> gs(gold.begin(), gold.end());
  for (double t : threshold_grid(cands, 50)) {
    std::size_t tp = 0, pred = 0;
    for (const auto& c : cands) {
      if (c.score >= t) {
        ++pred;
        tp += gs.count({c.src, c.tgt});
      }
    }
    EXPECT_GE(best.f1, prf(tp, pred, gold.size()).f1);
  }
}

TEST(Mining, GridSpansObservedRange) {
  std::vector<MiningCandidate> c{{0, 0, 0.2}, {1, 1, 0.9}, {2, 2, 0.5}};
  const auto g = threshold_grid(c, 200);
  ASSERT_EQ(g.size(), 200u);
  EXPECT_DOUBLE_EQ(g.front(), 0.2);
  EXPECT_DOUBLE_EQ(g.back(), 0.9);
}

// ---------------------------------------------------------------------------
// Spearman / STS

TEST(Spearman, Examples) {
  EXPECT_NEAR(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}), 1.0, 1e-15);
  EXPECT_NEAR(spearman_rho({4, 3, 2, 1}, {1, 2, 3, 4}), -1.0, 1e-15);
  EXPECT_NEAR(spearman_rho({1, 3, 2, 4}, {1, 2, 3, 4}), 0.8, 1e-15);
}

TEST(Spearman, AverageRanksOnTies) {
  const auto r = average_ranks({5, 1, 5, 3});
  EXPECT_EQ(r, (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Spearman, MatchesCountingOracleWithTies) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = static_cast<double>(rng.below(5));
    for (auto& x : b) x = static_cast<double>(rng.below(4));
    b[0] = 0;
    b[1] = 1;
    EXPECT_NEAR(spearman_rho(a, b), oracle::spearman(a, b), 1e-12) << seed;
  }
}

TEST(Spearman, SelfAndNegatedAndMonotoneTransform) {
  Rng rng(3);
  std::vector<double> x(40), neg(40), cube(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x[i] = rng.normal();
    neg[i] = -x[i];
    cube[i] = std::exp(3 * x[i]) + 2;
  }
  EXPECT_NEAR(spearman_rho(x, x), 1.0, 1e-12);
  EXPECT_NEAR(spearman_rho(neg, x), -1.0, 1e-12);
  std::vector<double> gold(40);
  for (auto& g : gold) g = rng.uniform();
  EXPECT_EQ(spearman_rho(x, gold), spearman_rho(cube, gold));
}

TEST(Spearman, ConstantGoldUndefined) {
  EXPECT_THROW(spearman_rho({1, 2, 3}, {2, 2, 2}), ContractError);
  EXPECT_THROW(spearman_rho({1}, {2}), ContractError);
  EXPECT_EQ(spearman_rho({1, 1, 1}, {1, 2, 3}), 0.0);
}

TEST(Spearman, RandomPredictionsNearZero) {
  LexiconConfig lc;
  const SemanticLexicon lex(lc);
  const auto pairs = gen_sts(lex, 1000, 0, 0, 5);
  std::vector<double> gold, pred;
  Rng rng(12);
  for (const auto& p : pairs) {
    gold.push_back(*p.score);
    pred.push_back(rng.normal());
  }
  // Under the null, rho ~ N(0, 1/(n-1)); 0.1 is about 3.2 sd.
  EXPECT_LT(std::abs(spearman_rho(pred, gold)), 0.1);
}

// One-hot-by-semantic-id table with no hidden layers: cosine of two
// equal-length sentences is |A∩B|/len, a strictly increasing function of
// their Jaccard overlap.
EncoderParams overlap_encoder(const SemanticLexicon& lex) {
  const std::size_t V = lex.vocab(), L = lex.languages();
  EncoderParams p;
  p.token_table = Tensor(Shape{L * V, V});
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t s = 0; s < V; ++s) p.token_table(l * V + s, s) = 1.0;
  p.output = {Tensor::identity(V), Tensor(Shape{V})};
  p.dropout = 0.0;
  return p;
}

TEST(Sts, PerfectOverlapEncoderGivesRhoOne) {
  LexiconConfig lc;
  lc.semantic_vocab = 200;
  lc.languages = 2;
  lc.topic_pools = 2;
  lc.topic_pool_size = 10;
  lc.generic_pool_size = 20;
  lc.min_len = lc.max_len = 5;  // equal lengths give bit-identical cosines per overlap level
  const SemanticLexicon lex(lc);
  const Encoder enc(overlap_encoder(lex), false);
  // Repeated tokens weight the pooled vector, so keep duplicate-free pairs.
  auto distinct = [&](std::vector<PairRecord> pairs) {
    std::vector<PairRecord> kept;
    for (auto& p : pairs) {
      const auto a = derender(lex, p.a), b = derender(lex, p.b);
      if (std::set<SemanticId>(a.begin(), a.end()).size() == a.size() &&
          std::set<SemanticId>(b.begin(), b.end()).size() == b.size()) {
        kept.push_back(std::move(p));
      }
    }
    return kept;
  };
  const auto cross = distinct(gen_sts(lex, 300, 0, 1, 3));
  const auto mono = distinct(gen_sts(lex, 300, 1, 1, 4));
  ASSERT_GT(cross.size(), 100u);
  EXPECT_NEAR(sts_eval(enc, cross), 1.0, 1e-12);
  EXPECT_NEAR(sts_eval(enc, mono), 1.0, 1e-12);
  EXPECT_THROW(sts_eval(enc, {}), ContractError);
}

// ---------------------------------------------------------------------------
// Clustering

TEST(Purity, HandArithmetic) {
  const std::vector<std::size_t> a{0, 0, 0, 1, 1};
  const std::vector<int> labels{7, 7, 9, 9, 9};
  const auto r = purity(a, labels);
  EXPECT_DOUBLE_EQ(r.purity, 0.8);
  EXPECT_DOUBLE_EQ(r.macro_purity, (2.0 / 3.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(oracle::purity(a, labels), 0.8);
}

TEST(Purity, MatchesTabulationOracle) {
  Rng rng(6);
  for (int t = 0; t < 30; ++t) {
    std::vector<std::size_t> a(50);
    std::vector<int> l(50);
    for (std::size_t i = 0; i < 50; ++i) {
      a[i] = rng.below(6);
      l[i] = static_cast<int>(rng.below(4));
    }
    const double p = purity(a, l).purity;
    EXPECT_NEAR(p, oracle::purity(a, l), 1e-15);
    EXPECT_GT(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(KMeans, SingletonsArePure) {
  Rng rng(7);
  const Tensor x = oracle::random_matrix(rng, 12, 3);
  std::vector<int> labels(12);
  for (auto& l : labels) l = static_cast<int>(rng.below(3));
  const auto r = kmeans_purity(x, labels, {12, 1, 3, 300, 1e-9});
  EXPECT_DOUBLE_EQ(r.purity.purity, 1.0);
}

TEST(KMeans, SeparatedBlobs) {
  Rng rng(8);
  Tensor x(Shape{60, 2});
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < 60; ++i) {
    labels[i] = i < 30 ? 0 : 1;
    x(i, 0) = (i < 30 ? -50.0 : 50.0) + rng.normal();
    x(i, 1) = rng.normal();
  }
  EXPECT_DOUBLE_EQ(kmeans_purity(x, labels, {2, 3, 5, 300, 1e-9}).purity.purity, 1.0);
}

TEST(KMeans, InertiaNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng data(seed);
    const Tensor x = oracle::random_matrix(data, 200, 4);
    Rng rng(seed + 100);
    const auto run = kmeans_once(x, {8, seed, 1, 300, 1e-9}, rng);
    for (std::size_t i = 1; i < run.inertia_trace.size(); ++i) {
      EXPECT_LE(run.inertia_trace[i], run.inertia_trace[i - 1] * (1 + 1e-12)) << seed << ":" << i;
    }
  }
}

TEST(KMeans, EmptyClusterReseeded) {
  // Duplicate points force k-means++ to place two centroids on one location.
  Tensor x = Tensor::matrix({{0, 0}, {0, 0}, {0, 0}, {10, 0}});
  Rng rng(0);
  const auto run = kmeans_once(x, {3, 0, 1, 50, 1e-9}, rng);
  std::set<std::size_t> used(run.assignment.begin(), run.assignment.end());
  EXPECT_GE(used.size(), 2u);
  EXPECT_TRUE(run.centroids.all_finite());
}

TEST(KMeans, BestRestartHasLowestInertia) {
  Rng data(9);
  const Tensor x = oracle::random_matrix(data, 100, 3);
  const KMeansOptions opt{5, 44, 6, 300, 1e-9};
  const auto best = kmeans(x, opt);
  for (std::size_t r = 0; r < 6; ++r) {
    Rng rng(derive_seed(opt.seed, r));
    EXPECT_LE(best.inertia, kmeans_once(x, opt, rng).inertia);
  }
  EXPECT_THROW(kmeans(x, {101, 0, 1, 10, 1e-9}), ContractError);
}

// ---------------------------------------------------------------------------
// Probe

EmbeddingSet labeled_set(const Tensor& x, const std::vector<Language>& langs) {
  std::vector<RowMeta> m;
  for (std::size_t i = 0; i < langs.size(); ++i) m.push_back({langs[i], -1, -1});
  return EmbeddingSet(x, m);
}

TEST(Probe, RandomLabelsAtChance) {
  Rng rng(10);
  const std::size_t ntr = 400, nte = 4000;
  const Tensor xtr = oracle::random_matrix(rng, ntr, 8), xte = oracle::random_matrix(rng, nte, 8);
  std::vector<Language> ltr(ntr), lte(nte);
  for (auto& l : ltr) l = rng.below(4);
  for (auto& l : lte) l = rng.below(4);
  const auto r = language_probe(labeled_set(xtr, ltr), labeled_set(xte, lte));
  EXPECT_EQ(r.classes, 4u);
  EXPECT_NEAR(r.accuracy, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / nte));
}

TEST(Probe, SeparableLanguagesPerfect) {
  Rng rng(11);
  auto make = [&](std::size_t n, std::vector<Language>& langs) {
    Tensor x(Shape{n, 3});
    langs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      langs[i] = i % 3;
      for (std::size_t j = 0; j < 3; ++j) x(i, j) = (j == langs[i] ? 5.0 : 0.0) + 0.3 * rng.normal();
    }
    return x;
  };
  std::vector<Language> ltr, lte;
  const Tensor xtr = make(90, ltr), xte = make(90, lte);
  EXPECT_DOUBLE_EQ(language_probe(labeled_set(xtr, ltr), labeled_set(xte, lte)).accuracy, 1.0);
}

TEST(Probe, SingleLanguageIsContractError) {
  Rng rng(1);
  const Tensor x = oracle::random_matrix(rng, 10, 3);
  EXPECT_THROW(language_probe(set_of(x), set_of(x)), ContractError);
}

TEST(Probe, LargeOffsetUntrainedEncoderIdentifiesLanguage) {
  ExperimentConfig cfg = default_config(5);
  cfg.init.offset_scale = 4.0;
  cfg.corpus.probe_items = 200;
  const World w = make_world(cfg);
  EvalCorpora e;
  e.probe = probe_sentences(w.lexicon, cfg.corpus);
  const Encoder enc(w.untrained, false);
  const auto r = eval_probe(enc, e, cfg.eval);
  EXPECT_GT(r.value, 0.95);
}

// ---------------------------------------------------------------------------
// Projection

TEST(Pca, CollinearFirstComponentExplainsAll) {
  Tensor x(Shape{20, 3});
  for (std::size_t i = 0; i < 20; ++i) {
    const double t = static_cast<double>(i) - 7.5;
    x(i, 0) = 2 * t;
    x(i, 1) = -t;
    x(i, 2) = 0.5 * t + 3;
  }
  const auto p = pca_project(x, 2);
  EXPECT_NEAR(p.explained_ratio[0], 1.0, 1e-12);
  EXPECT_NEAR(p.explained_ratio[1], 0.0, 1e-12);
}

TEST(Pca, IsotropicGaussianSplitsEvenly) {
  Rng rng(13);
  const std::size_t n = 10000;
  const Tensor x = oracle::random_matrix(rng, n, 2);
  const auto p = pca_project(x, 2);
  // The top ratio exceeds 1/2 by (l1 - l2) / (2 tr), whose scale is 1/sqrt(n).
  const double tol = 3.0 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(p.explained_ratio[0], 0.5, tol);
  EXPECT_NEAR(p.explained_ratio[1], 0.5, tol);
  EXPECT_NEAR(p.explained_ratio[0] + p.explained_ratio[1], 1.0, 1e-12);
}

TEST(Pca, FullDimensionPreservesDistances) {
  Rng rng(14);
  const Tensor x = oracle::random_matrix(rng, 30, 3);
  const auto p = pca_project(x, 3);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = i + 1; j < 30; ++j) {
      double a = 0.0, b = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        a += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
        b += (p.coords(i, k) - p.coords(j, k)) * (p.coords(i, k) - p.coords(j, k));
      }
      EXPECT_NEAR(a, b, 1e-10);
    }
}

TEST(Pca, SignConventionAndRankDeficiency) {
  Rng rng(15);
  const Tensor x = oracle::random_matrix(rng, 50, 4);
  const auto p = pca_project(x, 2);
  for (std::size_t c = 0; c < 2; ++c) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < 4; ++j)
      if (std::abs(p.components(c, j)) > std::abs(p.components(c, arg))) arg = j;
    EXPECT_GT(p.components(c, arg), 0.0);
  }
  const auto q = pca_project(Tensor::matrix({{1}, {2}, {4}}), 2);
  EXPECT_NEAR(q.explained_ratio[0], 1.0, 1e-12);
  EXPECT_EQ(q.explained_ratio[1], 0.0);
  EXPECT_THROW(pca_project(Tensor::matrix({{1, 2}}), 2), ContractError);
}

// ---------------------------------------------------------------------------
// Joint rotation invariance and purity of evaluation

TEST(Invariance, JointRotationLeavesMetricsUnchanged) {
  Rng rng(20);
  const std::size_t n = 60, d = 6;
  const Tensor q = oracle::random_orthogonal(rng, d);
  const Tensor src = oracle::random_matrix(rng, n, d);
  Tensor tgt = src;
  for (double& v : tgt.data()) v += rng.normal() * 0.9;
  const Tensor rs = oracle::rotate(src, q), rt = oracle::rotate(tgt, q);

  const auto r0 = retrieval_accuracy(set_of(src), set_of(tgt, 1));
  const auto r1 = retrieval_accuracy(set_of(rs), set_of(rt, 1));
  EXPECT_EQ(r0.hits_src_to_tgt, r1.hits_src_to_tgt);
  EXPECT_EQ(r0.hits_tgt_to_src, r1.hits_tgt_to_src);

  std::vector<std::pair<std::size_t, std::size_t>> gold;
  for (std::size_t i = 0; i < 40; ++i) gold.push_back({i, i});
  EXPECT_NEAR(mine_bitext(set_of(src), set_of(tgt, 1), gold, {0}).f1,
              mine_bitext(set_of(rs), set_of(rt, 1), gold, {0}).f1, 1e-12);

  std::vector<double> c0, c1, gold_scores;
  for (std::size_t i = 0; i < n; ++i) {
    c0.push_back(oracle::cosine(src.row(i), tgt.row(i)));
    c1.push_back(oracle::cosine(rs.row(i), rt.row(i)));
    gold_scores.push_back(rng.uniform());
  }
  EXPECT_NEAR(spearman_rho(c0, gold_scores), spearman_rho(c1, gold_scores), 1e-12);

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 4);
  const KMeansOptions ko{4, 9, 4, 300, 1e-9};
  EXPECT_EQ(kmeans_purity(src, labels, ko).purity.purity, kmeans_purity(rs, labels, ko).purity.purity);

  std::vector<Language> langs(n);
  Tensor shifted = src, shifted_rot(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    langs[i] = i % 3;
    shifted(i, langs[i]) += 1.5;
  }
  shifted_rot = oracle::rotate(shifted, q);
  const auto p0 = language_probe(labeled_set(shifted, langs), labeled_set(shifted, langs), {200, 0.1});
  const auto p1 = language_probe(labeled_set(shifted_rot, langs), labeled_set(shifted_rot, langs), {200, 0.1});
  EXPECT_EQ(p0.accuracy, p1.accuracy);
}

TEST(Invariance, StsUnderRotatedOutputLayer) {
  // Same-language pairs at full overlap embed identically up to summation
  // order; their ties must not depend on rounding noise.
  ExperimentConfig cfg = default_config(17);
  cfg.corpus.semantic_vocab = 400;
  cfg.corpus.topic_pools = 5;
  cfg.corpus.topic_pool_size = 20;
  cfg.corpus.generic_pool_size = 30;
  const World w = make_world(cfg);
  const auto pairs = gen_sts(w.lexicon, 600, 0, 0, 8);
  Rng rng(31);
  const Tensor q = oracle::random_orthogonal(rng, cfg.encoder.output_dim);
  EncoderParams rot = w.untrained;
  rot.output.weight = oracle::rotate(rot.output.weight, q);
  Tensor b(Shape{1, rot.output.bias.numel()});
  for (std::size_t j = 0; j < b.numel(); ++j) b[j] = rot.output.bias[j];
  b = oracle::rotate(b, q);
  for (std::size_t j = 0; j < b.numel(); ++j) rot.output.bias[j] = b[j];
  EXPECT_EQ(sts_eval(Encoder(w.untrained, false), pairs), sts_eval(Encoder(rot, false), pairs));
}

TEST(Invariance, EvaluatorsAreSideEffectFree) {
  Rng rng(21);
  const EmbeddingSet a = set_of(oracle::random_matrix(rng, 40, 5));
  const EmbeddingSet b = set_of(oracle::random_matrix(rng, 40, 5), 1);
  const auto m1 = mine_bitext(a, b, {{0, 0}, {1, 1}});
  const auto m2 = mine_bitext(a, b, {{0, 0}, {1, 1}});
  EXPECT_EQ(m1.f1, m2.f1);
  EXPECT_EQ(m1.threshold, m2.threshold);
  const auto r1 = retrieval_accuracy(a, b), r2 = retrieval_accuracy(a, b);
  EXPECT_EQ(r1.mean, r2.mean);
  const KMeansOptions ko{3, 1, 2, 100, 1e-9};
  EXPECT_EQ(kmeans(a.matrix(), ko).assignment, kmeans(a.matrix(), ko).assignment);
}

}  // namespace
