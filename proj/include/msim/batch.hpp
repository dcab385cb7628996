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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msim/corpus.hpp"
#include "msim/errors.hpp"
#include "msim/rng.hpp"

namespace msim {

enum class Strategy : std::size_t { kUnsupervised = 0, kNli = 1, kXnli = 2, kParallel = 3 };

inline constexpr std::size_t kStrategyCount = 4;
inline constexpr std::array<std::string_view, kStrategyCount> kStrategyNames = {
    "unsupervised", "nli", "xnli", "parallel"};

inline std::string_view strategy_name(Strategy s) {
  return kStrategyNames[static_cast<std::size_t>(s)];
}

/// Strategies whose pairs carry a contradiction to use as hard negative.
inline bool strategy_has_negatives(Strategy s) {
  return s == Strategy::kNli || s == Strategy::kXnli;
}

struct TrainingPair {
  Sentence anchor;
  Sentence positive;
  std::optional<Sentence> hard_negative;
  Strategy strategy = Strategy::kUnsupervised;
};

/// Mixing weights indexed by Strategy.
struct StrategyMix {
  std::array<double, kStrategyCount> weights{};

  double& operator[](Strategy s) { return weights[static_cast<std::size_t>(s)]; }
  double operator[](Strategy s) const { return weights[static_cast<std::size_t>(s)]; }

  static StrategyMix only(Strategy s) {
    StrategyMix m;
    m[s] = 1.0;
    return m;
  }

  void validate() const {
    double total = 0.0;
    for (std::size_t i = 0; i < kStrategyCount; ++i) {
      if (!(weights[i] >= 0.0)) {
        throw ConfigError("mix weight for " + std::string(kStrategyNames[i]) +
                          " must be nonnegative");
      }
      total += weights[i];
    }
    if (!(total > 0.0)) throw ConfigError("strategy mix weights must sum to > 0");
  }
};

/// Whether batches drawn under `mix` keep hard negatives. Batches are
/// all-or-none: one active strategy without negatives (or the explicit drop
/// flag) strips them from every pair.
inline bool mix_keeps_negatives(const StrategyMix& mix, bool drop_hard_negatives) {
  if (drop_hard_negatives) return false;
  for (std::size_t i = 0; i < kStrategyCount; ++i) {
    if (mix.weights[i] > 0.0 && !strategy_has_negatives(static_cast<Strategy>(i))) {
      return false;
    }
  }
  return true;
}

struct TrainingCorpora {
  std::vector<Sentence> unsupervised;
  std::vector<PairRecord> nli;
  std::vector<PairRecord> xnli;
  std::vector<PairRecord> parallel;
};

inline std::vector<TrainingPair> make_pairs(const TrainingCorpora& c, Strategy s) {
  std::vector<TrainingPair> out;
  switch (s) {
    case Strategy::kUnsupervised:
      for (const auto& x : c.unsupervised) out.push_back({x, x, std::nullopt, s});
      break;
    case Strategy::kNli:
    case Strategy::kXnli:
      for (const auto& r : (s == Strategy::kNli ? c.nli : c.xnli)) {
        if (!r.neg) throw DataError("NLI record without contradiction sentence");
        out.push_back({r.a, r.b, r.neg, s});
      }
      break;
    case Strategy::kParallel:
      for (const auto& r : c.parallel) out.push_back({r.a, r.b, std::nullopt, s});
      break;
  }
  return out;
}

struct Batch {
  std::vector<const TrainingPair*> pairs;
  bool hard_negatives = false;

  std::size_t size() const noexcept { return pairs.size(); }
};

/// Draws batches from per-strategy pair pools. Each slot's strategy is sampled
/// from the mix weights. An epoch is one pass over the "driving" pool (the
/// active strategy with the most pairs); smaller pools are reshuffled and
/// reused as often as needed within the epoch.
class PairStream {
 public:
  PairStream(const TrainingCorpora& corpora, const StrategyMix& mix,
             bool drop_hard_negatives, std::uint64_t seed)
      : mix_(mix), seed_(seed) {
    mix.validate();
    keep_negatives_ = mix_keeps_negatives(mix, drop_hard_negatives);
    std::size_t best = 0;
    for (std::size_t i = 0; i < kStrategyCount; ++i) {
      const auto s = static_cast<Strategy>(i);
      if (mix[s] > 0.0) {
        pools_[i].pairs = make_pairs(corpora, s);
        if (pools_[i].pairs.empty()) {
          throw ConfigError("strategy " + std::string(kStrategyNames[i]) +
                            " has positive mix weight but an empty corpus");
        }
        if (pools_[i].pairs.size() > best) {
          best = pools_[i].pairs.size();
          driving_ = s;
        }
      }
    }
    begin_epoch(0);
  }

  bool keeps_negatives() const noexcept { return keep_negatives_; }
  Strategy driving() const noexcept { return driving_; }
  std::size_t pool_size(Strategy s) const {
    return pools_[static_cast<std::size_t>(s)].pairs.size();
  }

  void begin_epoch(std::uint64_t epoch) {
    epoch_ = epoch;
    slot_rng_.emplace(derive_seed(derive_seed(seed_, "slots"), epoch));
    for (std::size_t i = 0; i < kStrategyCount; ++i) {
      pools_[i].passes = 0;
      reshuffle(i);
    }
  }

  /// Next batch of exactly `n` pairs, or nullopt at epoch end (the partial
  /// batch is discarded).
  std::optional<Batch> next_batch(std::size_t n) {
    Batch batch;
    batch.hard_negatives = keep_negatives_;
    batch.pairs.reserve(n);
    while (batch.pairs.size() < n) {
      const std::size_t k = slot_rng_->categorical(
          std::vector<double>(mix_.weights.begin(), mix_.weights.end()));
      Pool& pool = pools_[k];
      if (pool.cursor == pool.order.size()) {
        if (static_cast<Strategy>(k) == driving_) return std::nullopt;
        ++pool.passes;
        reshuffle(k);
      }
      batch.pairs.push_back(&pool.pairs[pool.order[pool.cursor++]]);
    }
    return batch;
  }

 private:
  struct Pool {
    std::vector<TrainingPair> pairs;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::uint64_t passes = 0;
  };

  void reshuffle(std::size_t k) {
    Pool& pool = pools_[k];
    pool.order.resize(pool.pairs.size());
    for (std::size_t i = 0; i < pool.order.size(); ++i) pool.order[i] = i;
    Rng rng(derive_seed(derive_seed(derive_seed(seed_, k), epoch_), pool.passes));
    rng.shuffle(pool.order);
    pool.cursor = 0;
  }

  StrategyMix mix_;
  std::uint64_t seed_;
  bool keep_negatives_ = true;
  Strategy driving_ = Strategy::kUnsupervised;
  std::array<Pool, kStrategyCount> pools_;
  std::uint64_t epoch_ = 0;
  std::optional<Rng> slot_rng_;
};

inline std::optional<Batch> build_batch(PairStream& stream, std::size_t n) {
  return stream.next_batch(n);
}

/// Sentences to encode for one batch and the dropout seed of each: anchors,
/// then positives, then hard negatives if kept. For unsupervised pairs the
/// anchor and positive are the same sentence under two different seeds.
struct EncodingPlan {
  std::vector<const Sentence*> sentences;
  std::vector<std::uint64_t> seeds;
  std::size_t rows_per_role = 0;
  bool hard_negatives = false;
};

inline EncodingPlan plan_encodings(const Batch& batch, std::uint64_t step_seed) {
  EncodingPlan plan;
  plan.rows_per_role = batch.size();
  plan.hard_negatives = batch.hard_negatives;
  for (const auto* p : batch.pairs) plan.sentences.push_back(&p->anchor);
  for (const auto* p : batch.pairs) plan.sentences.push_back(&p->positive);
  if (batch.hard_negatives) {
    for (const auto* p : batch.pairs) plan.sentences.push_back(&*p->hard_negative);
  }
  for (std::size_t i = 0; i < plan.sentences.size(); ++i) {
    plan.seeds.push_back(derive_seed(step_seed, static_cast<std::uint64_t>(i)));
  }
  return plan;
}

}  // namespace msim
