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
#include <set>
#include <utility>
#include <vector>

#include "msim/corpus.hpp"
#include "msim/errors.hpp"
#include "msim/tensor.hpp"

namespace msim {

struct RowMeta {
  Language lang = 0;
  std::int64_t pair_id = -1;
  int label = -1;

  friend bool operator==(const RowMeta&, const RowMeta&) = default;
};

/// Evaluation-mode embeddings, rows L2-normalized on construction.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  EmbeddingSet(Tensor raw, std::vector<RowMeta> meta, double eps = 1e-12)
      : matrix_(std::move(raw)), meta_(std::move(meta)) {
    if (matrix_.rank() != 2) throw DimensionError("embedding set must be a matrix");
    if (meta_.size() != matrix_.rows()) {
      throw ContractError("embedding set has " + std::to_string(matrix_.rows()) +
                          " rows but " + std::to_string(meta_.size()) + " metadata entries");
    }
    for (std::size_t i = 0; i < matrix_.rows(); ++i) {
      auto r = matrix_.row(i);
      const double n = norm2(r);
      if (!(n > eps)) {
        throw DegenerateVectorError("embedding row " + std::to_string(i) + " has zero norm");
      }
      for (double& x : r) x /= n;
    }
  }

  const Tensor& matrix() const noexcept { return matrix_; }
  const std::vector<RowMeta>& meta() const noexcept { return meta_; }
  std::size_t size() const noexcept { return meta_.size(); }
  std::size_t dim() const { return matrix_.cols(); }
  std::span<const double> row(std::size_t i) const { return matrix_.row(i); }

  EmbeddingSet subset(const std::vector<std::size_t>& rows) const {
    EmbeddingSet out;
    out.matrix_ = Tensor(Shape{rows.size(), dim()});
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::copy(matrix_.row(rows[k]).begin(), matrix_.row(rows[k]).end(),
                out.matrix_.row(k).begin());
      out.meta_.push_back(meta_[rows[k]]);
    }
    return out;
  }

 private:
  Tensor matrix_{Shape{0, 0}};
  std::vector<RowMeta> meta_;
};

/// Cosine similarity of every src row against every tgt row.
inline Tensor similarity(const EmbeddingSet& src, const EmbeddingSet& tgt) {
  if (src.dim() != tgt.dim()) {
    throw DimensionError("embedding width mismatch: " + std::to_string(src.dim()) +
                         " vs " + std::to_string(tgt.dim()));
  }
  Tensor s(Shape{src.size(), tgt.size()});
  for (std::size_t i = 0; i < src.size(); ++i)
    for (std::size_t j = 0; j < tgt.size(); ++j) s(i, j) = dot(src.row(i), tgt.row(j));
  return s;
}

/// argmax of each row of `s`; ties go to the lowest column index.
inline std::vector<std::size_t> row_argmax(const Tensor& s) {
  std::vector<std::size_t> best(s.rows(), 0);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 1; j < s.cols(); ++j) {
      if (s(i, j) > s(i, best[i])) best[i] = j;
    }
  }
  return best;
}

inline std::vector<std::size_t> col_argmax(const Tensor& s) {
  std::vector<std::size_t> best(s.cols(), 0);
  for (std::size_t j = 0; j < s.cols(); ++j) {
    for (std::size_t i = 1; i < s.rows(); ++i) {
      if (s(i, j) > s(best[j], j)) best[j] = i;
    }
  }
  return best;
}

struct RetrievalResult {
  double src_to_tgt = 0.0;
  double tgt_to_src = 0.0;
  double mean = 0.0;
  std::size_t hits_src_to_tgt = 0;
  std::size_t hits_tgt_to_src = 0;
};

/// Nearest-neighbour matching of parallel pools; row i of src is the gold
/// mate of row i of tgt.
inline RetrievalResult retrieval_accuracy(const EmbeddingSet& src, const EmbeddingSet& tgt) {
  if (src.size() == 0 || tgt.size() == 0) throw ContractError("retrieval over an empty pool");
  if (src.size() != tgt.size()) {
    throw ContractError("retrieval pools differ in size: " + std::to_string(src.size()) +
                        " vs " + std::to_string(tgt.size()));
  }
  const Tensor s = similarity(src, tgt);
  const auto fwd = row_argmax(s);
  const auto bwd = col_argmax(s);
  RetrievalResult r;
  for (std::size_t i = 0; i < fwd.size(); ++i) r.hits_src_to_tgt += fwd[i] == i;
  for (std::size_t j = 0; j < bwd.size(); ++j) r.hits_tgt_to_src += bwd[j] == j;
  const double n = static_cast<double>(src.size());
  r.src_to_tgt = static_cast<double>(r.hits_src_to_tgt) / n;
  r.tgt_to_src = static_cast<double>(r.hits_tgt_to_src) / n;
  r.mean = 0.5 * (r.src_to_tgt + r.tgt_to_src);
  return r;
}

// ---------------------------------------------------------------------------
// Bitext mining

struct MiningOptions {
  /// Evenly spaced thresholds over the observed candidate-score range;
  /// 0 means every distinct candidate score is tried.
  std::size_t grid = 200;
};

struct MiningCandidate {
  std::size_t src = 0;
  std::size_t tgt = 0;
  double score = 0.0;
};

struct MiningResult {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
  std::size_t candidates = 0;
  std::size_t predicted = 0;
  std::size_t true_positives = 0;
  std::size_t gold = 0;
  bool no_candidates = false;
};

struct PrfCounts {
  double precision, recall, f1;
};

inline PrfCounts prf(std::size_t tp, std::size_t predicted, std::size_t gold) {
  const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  const double r = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  // 2tp / (pred + gold): one rounding, so equal fractions compare equal.
  const double f1 = tp ? 2.0 * static_cast<double>(tp) / static_cast<double>(predicted + gold) : 0.0;
  return {p, r, f1};
}

/// Mutual nearest neighbours between the pools, scored by cosine.
inline std::vector<MiningCandidate> mutual_nn_candidates(const EmbeddingSet& src,
                                                         const EmbeddingSet& tgt) {
  std::vector<MiningCandidate> out;
  if (src.size() == 0 || tgt.size() == 0) return out;
  const Tensor s = similarity(src, tgt);
  const auto fwd = row_argmax(s);
  const auto bwd = col_argmax(s);
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    if (bwd[fwd[i]] == i) out.push_back({i, fwd[i], s(i, fwd[i])});
  }
  return out;
}

inline std::vector<double> threshold_grid(const std::vector<MiningCandidate>& cands,
                                          std::size_t grid) {
  std::vector<double> scores;
  for (const auto& c : cands) scores.push_back(c.score);
  std::sort(scores.begin(), scores.end());
  if (grid == 0) {
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    return scores;
  }
  const double lo = scores.front(), hi = scores.back();
  std::vector<double> ts(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    ts[k] = grid == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(grid - 1);
  }
  if (grid > 1) ts.back() = hi;
  return ts;
}

/// Threshold search for the F1-optimal mined set. Ties in F1 resolve to the
/// lowest threshold.
inline MiningResult mine_bitext(const EmbeddingSet& src, const EmbeddingSet& tgt,
                                const std::vector<std::pair<std::size_t, std::size_t>>& gold,
                                const MiningOptions& opt = {}) {
  std::set<std::pair<std::size_t, std::size_t>> gold_set;
  for (const auto& g : gold) {
    if (g.first >= src.size() || g.second >= tgt.size()) {
      throw ContractError("gold pair (" + std::to_string(g.first) + ", " +
                          std::to_string(g.second) + ") out of range");
    }
    gold_set.insert(g);
  }
  MiningResult best;
  best.gold = gold_set.size();
  const auto cands = mutual_nn_candidates(src, tgt);
  best.candidates = cands.size();
  if (cands.empty()) {
    best.no_candidates = true;
    return best;
  }
  const auto thresholds = threshold_grid(cands, opt.grid);
  std::vector<double> f1s;
  bool first = true;
  for (double t : thresholds) {
    std::size_t predicted = 0, tp = 0;
    for (const auto& c : cands) {
      if (c.score >= t) {
        ++predicted;
        tp += gold_set.count({c.src, c.tgt});
      }
    }
    const auto m = prf(tp, predicted, best.gold);
    f1s.push_back(m.f1);
    if (first || m.f1 > best.f1) {
      first = false;
      best.f1 = m.f1;
      best.precision = m.precision;
      best.recall = m.recall;
      best.threshold = t;
      best.predicted = predicted;
      best.true_positives = tp;
    }
  }
  for (double f : f1s) {
    if (f > best.f1) throw Error("mine_bitext: argmax certificate failed");
  }
  return best;
}

}  // namespace msim
