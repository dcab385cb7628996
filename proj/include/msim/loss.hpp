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

#include <numeric>
#include <optional>

#include "msim/autodiff.hpp"
#include "msim/errors.hpp"

namespace msim {

struct LossOptions {
  double temperature = 0.05;
  /// Row i's denominator also sees the hard negatives of every other row.
  bool shared_hard_negatives = true;
};

/// Batch contrastive loss with optional hard negatives:
///
///   L = (1/N) sum_i [ logsumexp_j(s(h_i, h_j+)/tau, s(h_i, h_j-)/tau) - s(h_i, h_i+)/tau ]
///
/// where s is cosine similarity. Without hard negatives this is plain
/// in-batch InfoNCE; with `shared_hard_negatives` off only h_i- joins row i.
inline ad::Var contrastive_loss(const ad::Var& anchors, const ad::Var& positives,
                                const std::optional<ad::Var>& hard_negatives,
                                const LossOptions& opt = {}) {
  if (!(opt.temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (anchors->value.rank() != 2 || anchors->shape() != positives->shape()) {
    throw DimensionError("contrastive_loss: anchors " + shape_str(anchors->shape()) +
                         " vs positives " + shape_str(positives->shape()));
  }
  if (anchors->value.rows() < 1) throw ContractError("contrastive_loss needs N >= 1");
  const double inv_tau = 1.0 / opt.temperature;

  ad::Var pos_logits = ad::scale(ad::cosine_matrix(anchors, positives), inv_tau);
  ad::Var logits = pos_logits;
  if (hard_negatives) {
    const ad::Var& neg = *hard_negatives;
    if (neg->shape() != anchors->shape()) {
      throw DimensionError("contrastive_loss: hard negatives " + shape_str(neg->shape()) +
                           " vs anchors " + shape_str(anchors->shape()));
    }
    ad::Var neg_logits = ad::scale(ad::cosine_matrix(anchors, neg), inv_tau);
    if (!opt.shared_hard_negatives) {
      const std::size_t n = anchors->value.rows();
      neg_logits = ad::reshape(ad::diagonal(neg_logits), Shape{n, 1});
    }
    logits = ad::concat_cols(pos_logits, neg_logits);
  }
  std::vector<std::size_t> targets(anchors->value.rows());
  std::iota(targets.begin(), targets.end(), std::size_t{0});
  return ad::mean_all(ad::softmax_xent_rows(logits, std::move(targets)));
}

}  // namespace msim
