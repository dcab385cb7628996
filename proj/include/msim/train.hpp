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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msim/adam.hpp"
#include "msim/batch.hpp"
#include "msim/checkpoint.hpp"
#include "msim/encoder.hpp"
#include "msim/errors.hpp"
#include "msim/loss.hpp"

namespace msim {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0: no cap
  double learning_rate = 1e-3;
  double temperature = 0.05;
  bool shared_hard_negatives = true;
  bool drop_hard_negatives = false;
  bool train_embeddings = true;
  StrategyMix mix = StrategyMix::only(Strategy::kNli);
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2 for in-batch negatives");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    mix.validate();
  }
};

struct TrainResult {
  EncoderParams params;
  std::vector<double> step_losses;
  std::size_t epochs_completed = 0;
};

/// Observer hook, called after every step with (step, loss, plan).
using StepObserver = std::function<void(std::size_t, double, const EncodingPlan&)>;

inline std::string batch_fingerprint(const EncodingPlan& plan) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Sentence* s : plan.sentences) {
    for (TokenId t : s->tokens) {
      h ^= t;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Contrastive loss for one batch under the given encoder (training mode).
inline ad::Var batch_loss(const Encoder& encoder, const EncodingPlan& plan,
                          const LossOptions& opt) {
  ad::Var all = encoder.forward(plan.sentences, Mode::kTrain, plan.seeds);
  const std::size_t n = plan.rows_per_role;
  ad::Var anchors = ad::slice_rows(all, 0, n);
  ad::Var positives = ad::slice_rows(all, n, n);
  std::optional<ad::Var> negatives;
  if (plan.hard_negatives) negatives = ad::slice_rows(all, 2 * n, n);
  return contrastive_loss(anchors, positives, negatives, opt);
}

/// Runs contrastive training from `init`. Fully determined by
/// (config, corpora, init); with `checkpoint_path` set, the current
/// parameters are written at the end of every epoch.
inline TrainResult train(const TrainConfig& cfg, const TrainingCorpora& corpora,
                         const EncoderParams& init,
                         const std::optional<std::filesystem::path>& checkpoint_path = std::nullopt,
                         const StepObserver& observer = {}) {
  cfg.validate();
  Encoder encoder(init, cfg.train_embeddings);
  const auto leaves = encoder.trainable();
  std::vector<const Tensor*> values;
  std::vector<Tensor*> mutable_values;
  std::vector<const Tensor*> grads;
  for (const auto& v : leaves) {
    values.push_back(&v->value);
    mutable_values.push_back(&v->value);
    grads.push_back(&v->grad);
  }
  AdamState adam(values, cfg.learning_rate);
  PairStream stream(corpora, cfg.mix, cfg.drop_hard_negatives, derive_seed(cfg.seed, "stream"));
  const LossOptions opt{cfg.temperature, cfg.shared_hard_negatives};
  const std::uint64_t dropout_root = derive_seed(cfg.seed, "dropout");

  TrainResult result;
  std::size_t step = 0;
  bool capped = false;
  for (std::size_t epoch = 0; epoch < cfg.epochs && !capped; ++epoch) {
    stream.begin_epoch(epoch);
    while (auto batch = build_batch(stream, cfg.batch_size)) {
      const EncodingPlan plan = plan_encodings(*batch, derive_seed(dropout_root, step));
      ad::Var loss = batch_loss(encoder, plan, opt);
      const double value = loss->value.item();
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step + 1) +
                              " (batch " + batch_fingerprint(plan) + ")");
      }
      ad::backward(loss);
      try {
        adam_step(mutable_values, grads, adam);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (batch " + batch_fingerprint(plan) + ")");
      }
      encoder.zero_grad();
      result.step_losses.push_back(value);
      ++step;
      if (observer) observer(step, value, plan);
      if (cfg.max_steps && step >= cfg.max_steps) {
        capped = true;
        break;
      }
    }
    ++result.epochs_completed;
    if (checkpoint_path) save_checkpoint(encoder.params(), *checkpoint_path);
  }
  result.params = encoder.params();
  return result;
}

inline void write_loss_log(const std::vector<double>& losses, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write loss log " + path.string());
  out << "step,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, losses[i]);
    out << buf;
  }
}

}  // namespace msim
