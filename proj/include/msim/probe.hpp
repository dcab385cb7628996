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
#include <map>
#include <vector>

#include "msim/errors.hpp"
#include "msim/retrieval.hpp"

namespace msim {

struct ProbeOptions {
  std::size_t epochs = 500;
  double learning_rate = 0.1;
};

struct ProbeResult {
  double accuracy = 0.0;
  std::size_t classes = 0;
  double final_train_loss = 0.0;
};

/// Linear language-identity probe: multinomial logistic regression trained
/// by full-batch gradient descent from zero weights on frozen embeddings.
/// Zero init keeps the probe exactly equivariant under rotations of the
/// embedding space.
inline ProbeResult language_probe(const EmbeddingSet& train_set, const EmbeddingSet& test_set,
                                  const ProbeOptions& opt = {}) {
  std::map<Language, std::size_t> classes;
  for (const auto& m : train_set.meta()) classes.emplace(m.lang, 0);
  if (classes.size() < 2) {
    throw ContractError("language probe needs at least two languages in its training data");
  }
  if (test_set.size() == 0) throw ContractError("language probe has an empty test set");
  std::size_t next = 0;
  for (auto& [lang, idx] : classes) idx = next++;
  const std::size_t C = classes.size(), d = train_set.dim(), n = train_set.size();

  Tensor w(Shape{d, C});
  std::vector<double> b(C, 0.0);
  std::vector<double> logits(C), prob(C);
  Tensor gw(Shape{d, C});
  std::vector<double> gb(C);
  ProbeResult result;
  result.classes = C;

  auto forward = [&](std::span<const double> x) {
    for (std::size_t c = 0; c < C; ++c) {
      double z = b[c];
      for (std::size_t j = 0; j < d; ++j) z += x[j] * w(j, c);
      logits[c] = z;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (std::size_t c = 0; c < C; ++c) s += (prob[c] = std::exp(logits[c] - mx));
    for (double& p : prob) p /= s;
  };

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::fill(gw.data().begin(), gw.data().end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto x = train_set.row(i);
      forward(x);
      const std::size_t y = classes.at(train_set.meta()[i].lang);
      loss -= std::log(std::max(prob[y], 1e-300));
      for (std::size_t c = 0; c < C; ++c) {
        const double delta = prob[c] - (c == y ? 1.0 : 0.0);
        gb[c] += delta;
        for (std::size_t j = 0; j < d; ++j) gw(j, c) += delta * x[j];
      }
    }
    const double scale = opt.learning_rate / static_cast<double>(n);
    for (std::size_t k = 0; k < w.numel(); ++k) w[k] -= scale * gw[k];
    for (std::size_t c = 0; c < C; ++c) b[c] -= scale * gb[c];
    result.final_train_loss = loss / static_cast<double>(n);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    forward(test_set.row(i));
    const auto it = classes.find(test_set.meta()[i].lang);
    const std::size_t pred = static_cast<std::size_t>(
        std::max_element(prob.begin(), prob.end()) - prob.begin());
    correct += it != classes.end() && it->second == pred;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
  return result;
}

}  // namespace msim
