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
#include <string>
#include <utility>
#include <vector>

#include "msim/autodiff.hpp"
#include "msim/corpus.hpp"
#include "msim/errors.hpp"
#include "msim/rng.hpp"
#include "msim/tensor.hpp"

namespace msim {

struct DenseLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Plain-value snapshot of the encoder: what checkpoints store.
struct EncoderParams {
  Tensor token_table;              // [(L*V) x d_in]
  std::vector<DenseLayer> hidden;  // tanh + dropout after each
  DenseLayer output;               // linear projection
  double dropout = 0.1;

  std::size_t input_dim() const { return token_table.cols(); }
  std::size_t output_dim() const { return output.weight.cols(); }

  /// Throws DimensionError unless layer shapes chain from d_in to d_out.
  void validate() const {
    if (token_table.rank() != 2) throw DimensionError("token table must be a matrix");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
    }
    std::size_t width = token_table.cols();
    auto check = [&width](const DenseLayer& l, const std::string& name) {
      if (l.weight.rank() != 2 || l.weight.rows() != width || l.bias.rank() != 1 ||
          l.bias.numel() != l.weight.cols()) {
        throw DimensionError(name + " has weight " + shape_str(l.weight.shape()) +
                             " / bias " + shape_str(l.bias.shape()) +
                             " but input width is " + std::to_string(width));
      }
      width = l.weight.cols();
    };
    for (std::size_t i = 0; i < hidden.size(); ++i) check(hidden[i], "hidden." + std::to_string(i));
    check(output, "output");
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct EncoderConfig {
  std::size_t hidden_layers = 2;
  std::size_t hidden_dim = 32;
  std::size_t output_dim = 32;
  double dropout = 0.1;
  /// Square weights start at identity_gain * I plus gaussian noise of
  /// std init_std / sqrt(fan_in); rectangular weights get the noise only.
  double identity_gain = 1.0;
  double init_std = 0.5;
  std::uint64_t seed = 0;
};

inline DenseLayer init_dense(std::size_t in, std::size_t out, const EncoderConfig& cfg,
                             Rng& rng) {
  DenseLayer layer{Tensor(Shape{in, out}), Tensor(Shape{out})};
  const double s = cfg.init_std / std::sqrt(static_cast<double>(in));
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      layer.weight(i, j) = rng.normal() * s + (i == j && in == out ? cfg.identity_gain : 0.0);
    }
  }
  return layer;
}

inline EncoderParams make_encoder_params(Tensor token_table, const EncoderConfig& cfg) {
  EncoderParams p;
  p.dropout = cfg.dropout;
  Rng rng(derive_seed(cfg.seed, "encoder-init"));
  std::size_t width = token_table.cols();
  p.token_table = std::move(token_table);
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) {
    p.hidden.push_back(init_dense(width, cfg.hidden_dim, cfg, rng));
    width = cfg.hidden_dim;
  }
  p.output = init_dense(width, cfg.output_dim, cfg, rng);
  p.validate();
  return p;
}

enum class Mode { kTrain, kEval };

/// Per-layer dropout seed derived from a per-encoding seed.
inline std::uint64_t layer_dropout_seed(std::uint64_t encode_seed, std::size_t layer) {
  return derive_seed(encode_seed, static_cast<std::uint64_t>(layer));
}

/// Differentiable encoder: lookup -> mean pool -> (affine, tanh, dropout)*
/// -> affine. Holds its parameters as graph leaves.
class Encoder {
 public:
  explicit Encoder(const EncoderParams& p, bool train_embeddings = true)
      : dropout_(p.dropout) {
    p.validate();
    table_ = ad::leaf(p.token_table, train_embeddings);
    for (const auto& l : p.hidden) {
      hidden_.emplace_back(ad::leaf(l.weight), ad::leaf(l.bias));
    }
    out_w_ = ad::leaf(p.output.weight);
    out_b_ = ad::leaf(p.output.bias);
  }

  double dropout() const noexcept { return dropout_; }
  std::size_t vocab_rows() const { return table_->value.rows(); }
  std::size_t output_dim() const { return out_w_->value.cols(); }

  /// Leaves that receive gradients, in checkpoint order.
  std::vector<ad::Var> trainable() const {
    std::vector<ad::Var> out;
    if (table_->requires_grad) out.push_back(table_);
    for (const auto& [w, b] : hidden_) {
      out.push_back(w);
      out.push_back(b);
    }
    out.push_back(out_w_);
    out.push_back(out_b_);
    return out;
  }

  void zero_grad() {
    for (auto& v : trainable()) v->zero_grad();
  }

  EncoderParams params() const {
    EncoderParams p;
    p.token_table = table_->value;
    for (const auto& [w, b] : hidden_) p.hidden.push_back({w->value, b->value});
    p.output = {out_w_->value, out_b_->value};
    p.dropout = dropout_;
    return p;
  }

  /// Batched forward. In training mode `seeds[i]` drives row i's dropout
  /// masks; row i then equals encoding sentence i alone with that seed.
  ad::Var forward(const std::vector<const Sentence*>& batch, Mode mode,
                  const std::vector<std::uint64_t>& seeds = {}) const {
    if (mode == Mode::kTrain && seeds.size() != batch.size()) {
      throw ContractError("training-mode forward needs one dropout seed per sentence");
    }
    std::vector<std::vector<std::size_t>> seqs;
    seqs.reserve(batch.size());
    for (const Sentence* s : batch) seqs.push_back(s->tokens);
    ad::Var x = ad::embedding_mean(table_, std::move(seqs));
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
      x = ad::tanh(ad::add_bias(ad::matmul(x, hidden_[l].first), hidden_[l].second));
      if (mode == Mode::kTrain) {
        std::vector<std::uint64_t> layer_seeds(seeds.size());
        for (std::size_t i = 0; i < seeds.size(); ++i) {
          layer_seeds[i] = layer_dropout_seed(seeds[i], l);
        }
        x = ad::dropout_rows(x, dropout_, layer_seeds);
      }
    }
    return ad::add_bias(ad::matmul(x, out_w_), out_b_);
  }

  /// Single-sentence encoding.
  Tensor encode(const Sentence& s, Mode mode, std::uint64_t dropout_seed = 0) const {
    ad::Var out = forward({&s}, mode, {dropout_seed});
    return out->value.reshaped(Shape{out->value.cols()});
  }

  /// Evaluation-mode embeddings for many sentences, [n x d_out].
  Tensor embed(const std::vector<Sentence>& sentences) const {
    std::vector<const Sentence*> ptrs;
    ptrs.reserve(sentences.size());
    for (const auto& s : sentences) ptrs.push_back(&s);
    if (ptrs.empty()) return Tensor(Shape{0, output_dim()});
    return forward(ptrs, Mode::kEval)->value;
  }

 private:
  ad::Var table_;
  std::vector<std::pair<ad::Var, ad::Var>> hidden_;
  ad::Var out_w_;
  ad::Var out_b_;
  double dropout_;
};

/// Convenience form: encode one sentence straight from a parameter snapshot.
inline Tensor encode(const EncoderParams& params, const Sentence& s,
                     std::uint64_t dropout_seed, Mode mode = Mode::kTrain) {
  return Encoder(params, false).encode(s, mode, dropout_seed);
}

}  // namespace msim
