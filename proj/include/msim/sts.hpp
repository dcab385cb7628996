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
#include <numeric>
#include <vector>

#include "msim/corpus.hpp"
#include "msim/encoder.hpp"
#include "msim/errors.hpp"

namespace msim {

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Spearman rank correlation with average-rank ties. Constant predictions
/// give 0; constant gold scores are an error.
inline double spearman_rho(const std::vector<double>& pred, const std::vector<double>& gold) {
  if (pred.size() != gold.size() || pred.size() < 2) {
    throw ContractError("spearman_rho needs two equal-length series of length >= 2");
  }
  if (std::all_of(gold.begin(), gold.end(), [&gold](double g) { return g == gold[0]; })) {
    throw ContractError("spearman_rho undefined: gold scores are all equal");
  }
  return pearson(average_ranks(pred), average_ranks(gold));
}

/// Resolution at which STS cosines are ranked. Pairs whose embeddings
/// agree up to summation order would otherwise tie or not tie depending on
/// rounding noise.
inline constexpr double kStsResolution = 1e-9;

/// Cosine of each pair's evaluation-mode embeddings, rounded to
/// kStsResolution.
inline std::vector<double> sts_predictions(const Encoder& encoder,
                                           const std::vector<PairRecord>& pairs) {
  std::vector<Sentence> left, right;
  for (const auto& p : pairs) {
    left.push_back(p.a);
    right.push_back(p.b);
  }
  const Tensor ea = encoder.embed(left);
  const Tensor eb = encoder.embed(right);
  std::vector<double> pred(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double na = norm2(ea.row(i)), nb = norm2(eb.row(i));
    if (!(na > 0.0) || !(nb > 0.0)) {
      throw DegenerateVectorError("zero-norm embedding in STS pair " + std::to_string(i));
    }
    pred[i] = std::round(dot(ea.row(i), eb.row(i)) / (na * nb) / kStsResolution) * kStsResolution;
  }
  return pred;
}

inline double sts_eval(const Encoder& encoder, const std::vector<PairRecord>& pairs) {
  if (pairs.empty()) throw ContractError("sts_eval needs at least one pair");
  std::vector<double> gold;
  for (const auto& p : pairs) {
    if (!p.score) throw DataError("STS pair without gold score");
    gold.push_back(*p.score);
  }
  return spearman_rho(sts_predictions(encoder, pairs), gold);
}

}  // namespace msim
