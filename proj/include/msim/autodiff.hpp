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
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "msim/errors.hpp"
#include "msim/rng.hpp"
#include "msim/tensor.hpp"

namespace msim::ad {

struct Node;
using Var = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph. `backward_rule` reads this node's
/// grad and accumulates into the parents' grads.
struct Node {
  Tensor value;
  Tensor grad;
  std::string op;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_rule;
  bool requires_grad = false;

  Node(Tensor v, std::string op_name, bool needs_grad)
      : value(std::move(v)),
        grad(value.shape()),
        op(std::move(op_name)),
        requires_grad(needs_grad) {}

  const Shape& shape() const { return value.shape(); }
  void zero_grad() { std::fill(grad.data().begin(), grad.data().end(), 0.0); }
};

/// Trainable (or otherwise differentiable) leaf.
inline Var leaf(Tensor value, bool requires_grad = true) {
  return std::make_shared<Node>(std::move(value), "leaf", requires_grad);
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }

namespace detail {

inline Var make_op(Tensor value, std::string op, std::vector<Var> parents,
                   std::function<void(Node&)> rule) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  auto node = std::make_shared<Node>(std::move(value), std::move(op), needs);
  node->parents = std::move(parents);
  if (needs) node->backward_rule = std::move(rule);
  return node;
}

inline void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a->value.rank() != rank) {
    throw DimensionError(std::string(op) + " expects rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_str(a->shape()));
  }
}

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->shape() != b->shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " +
                         shape_str(a->shape()) + " vs " + shape_str(b->shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(const Var& a, const Var& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 ||
      a->value.cols() != b->value.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a->shape()) +
                         " x " + shape_str(b->shape()));
  }
  Tensor out = matmul_plain(a->value, b->value);
  return detail::make_op(
      std::move(out), "matmul", {a, b}, [](Node& self) {
        const Tensor& g = self.grad;
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t m = pa.value.rows(), k = pa.value.cols(),
                          n = pb.value.cols();
        if (pa.requires_grad) {
          // dA = dC * B^T
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += g(i, j) * pb.value(p, j);
              pa.grad(i, p) += s;
            }
          }
        }
        if (pb.requires_grad) {
          // dB = A^T * dC
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double aip = pa.value(i, p);
              if (aip == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) pb.grad(p, j) += aip * g(i, j);
            }
          }
        }
      });
}

inline Var transpose(const Var& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t r = a->value.rows(), c = a->value.cols();
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = a->value(i, j);
  return detail::make_op(std::move(out), "transpose", {a}, [](Node& self) {
    Node& p = *self.parents[0];
    const std::size_t r = p.value.rows(), c = p.value.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad(i, j) += self.grad(j, i);
  });
}

inline Var reshape(const Var& a, Shape shape) {
  if (shape_numel(shape) != a->value.numel()) {
    throw DimensionError("reshape " + shape_str(a->shape()) + " -> " +
                         shape_str(shape));
  }
  Tensor out = a->value.reshaped(std::move(shape));
  return detail::make_op(std::move(out), "reshape", {a}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += self.grad[i];
  });
}

/// Rows [begin, begin + count) of a matrix.
inline Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  detail::require_rank(a, 2, "slice_rows");
  if (begin + count > a->value.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + shape_str(a->shape()));
  }
  const std::size_t d = a->value.cols();
  auto src = a->value.data().subspan(begin * d, count * d);
  Tensor out(Shape{count, d}, std::vector<double>(src.begin(), src.end()));
  return detail::make_op(std::move(out), "slice_rows", {a}, [begin](Node& self) {
    Node& p = *self.parents[0];
    const std::size_t off = begin * p.value.cols();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad[off + i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  return detail::make_op(std::move(out), "add", {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *self.parents[k];
      if (!p.requires_grad) continue;
      for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += self.grad[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  return detail::make_op(std::move(out), "sub", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i] -= self.grad[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  return detail::make_op(std::move(out), "mul", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

inline Var scale(const Var& a, double factor) {
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * factor;
  return detail::make_op(std::move(out), "scale", {a}, [factor](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < p.grad.numel(); ++i)
      p.grad[i] += self.grad[i] * factor;
  });
}

inline Var tanh(const Var& a) {
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
  return detail::make_op(std::move(out), "tanh", {a}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < p.grad.numel(); ++i) {
      const double y = self.value[i];
      p.grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

/// x[n x d] + bias[d], bias repeated over rows.
inline Var add_bias(const Var& x, const Var& bias) {
  detail::require_rank(x, 2, "add_bias");
  detail::require_rank(bias, 1, "add_bias");
  if (bias->value.numel() != x->value.cols()) {
    throw DimensionError("add_bias shape mismatch: " + shape_str(x->shape()) +
                         " + " + shape_str(bias->shape()));
  }
  Tensor out = x->value;
  const std::size_t n = out.rows(), d = out.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) += bias->value[j];
  return detail::make_op(std::move(out), "add_bias", {x, bias}, [](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = self.value.rows(), d = self.value.cols();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double g = self.grad(i, j);
        if (px.requires_grad) px.grad(i, j) += g;
        if (pb.requires_grad) pb.grad[j] += g;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Pooling and lookup

/// Arithmetic mean over the rows of a [t x d] matrix.
inline Var mean_pool(const Var& rows) {
  detail::require_rank(rows, 2, "mean_pool");
  const std::size_t t = rows->value.rows(), d = rows->value.cols();
  if (t == 0) throw EmptySentenceError("mean_pool over zero rows");
  Tensor out(Shape{d});
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) s += rows->value(i, j);
    out[j] = s / static_cast<double>(t);
  }
  return detail::make_op(std::move(out), "mean_pool", {rows}, [](Node& self) {
    Node& p = *self.parents[0];
    const std::size_t t = p.value.rows(), d = p.value.cols();
    const double inv = 1.0 / static_cast<double>(t);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t j = 0; j < d; ++j) p.grad(i, j) += self.grad[j] * inv;
  });
}

inline void check_ids(const Tensor& table, const std::vector<std::size_t>& ids) {
  for (std::size_t id : ids) {
    if (id >= table.rows()) {
      throw VocabularyError("token id " + std::to_string(id) +
                            " outside embedding table of " +
                            std::to_string(table.rows()) + " rows");
    }
  }
}

/// Rows of `table` selected by `ids`, as a [t x d] matrix.
inline Var gather_rows(const Var& table, std::vector<std::size_t> ids) {
  detail::require_rank(table, 2, "gather_rows");
  check_ids(table->value, ids);
  const std::size_t d = table->value.cols();
  Tensor out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = table->value.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return detail::make_op(
      std::move(out), "gather_rows", {table},
      [ids = std::move(ids)](Node& self) {
        Node& p = *self.parents[0];
        const std::size_t d = p.value.cols();
        for (std::size_t i = 0; i < ids.size(); ++i)
          for (std::size_t j = 0; j < d; ++j) p.grad(ids[i], j) += self.grad(i, j);
      });
}

/// Fused lookup + mean pool for a batch of token sequences: row i of the
/// result equals mean_pool(gather_rows(table, sequences[i])) exactly.
inline Var embedding_mean(const Var& table,
                          std::vector<std::vector<std::size_t>> sequences) {
  detail::require_rank(table, 2, "embedding_mean");
  const std::size_t d = table->value.cols();
  Tensor out(Shape{sequences.size(), d});
  for (std::size_t r = 0; r < sequences.size(); ++r) {
    const auto& ids = sequences[r];
    if (ids.empty()) {
      throw EmptySentenceError("empty sentence at batch row " + std::to_string(r));
    }
    check_ids(table->value, ids);
    const double t = static_cast<double>(ids.size());
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t id : ids) s += table->value(id, j);
      out(r, j) = s / t;
    }
  }
  return detail::make_op(
      std::move(out), "embedding_mean", {table},
      [seqs = std::move(sequences)](Node& self) {
        Node& p = *self.parents[0];
        const std::size_t d = p.value.cols();
        for (std::size_t r = 0; r < seqs.size(); ++r) {
          const double inv = 1.0 / static_cast<double>(seqs[r].size());
          for (std::size_t id : seqs[r])
            for (std::size_t j = 0; j < d; ++j) p.grad(id, j) += self.grad(r, j) * inv;
        }
      });
}

// ---------------------------------------------------------------------------
// Normalization and similarity

inline constexpr double kDefaultNormEps = 1e-12;

inline Var l2_normalize(const Var& v, double eps = kDefaultNormEps) {
  detail::require_rank(v, 1, "l2_normalize");
  const double n = norm2(v->value.data());
  if (!(n > eps)) {
    throw DegenerateVectorError("l2_normalize: norm " + std::to_string(n) +
                                " <= eps");
  }
  Tensor out(v->shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = v->value[i] / n;
  return detail::make_op(std::move(out), "l2_normalize", {v}, [n](Node& self) {
    Node& p = *self.parents[0];
    const double yg = dot(self.value.data(), self.grad.data());
    for (std::size_t i = 0; i < p.grad.numel(); ++i)
      p.grad[i] += (self.grad[i] - self.value[i] * yg) / n;
  });
}

/// Row-wise L2 normalization of an [n x d] matrix.
inline Var normalize_rows(const Var& a, double eps = kDefaultNormEps) {
  detail::require_rank(a, 2, "normalize_rows");
  const std::size_t n = a->value.rows(), d = a->value.cols();
  std::vector<double> norms(n);
  Tensor out(a->shape());
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = norm2(a->value.row(i));
    if (!(norms[i] > eps)) {
      throw DegenerateVectorError("zero-norm row " + std::to_string(i) +
                                  " (norm " + std::to_string(norms[i]) + ")");
    }
    for (std::size_t j = 0; j < d; ++j) out(i, j) = a->value(i, j) / norms[i];
  }
  return detail::make_op(
      std::move(out), "normalize_rows", {a},
      [norms = std::move(norms)](Node& self) {
        Node& p = *self.parents[0];
        const std::size_t n = self.value.rows(), d = self.value.cols();
        for (std::size_t i = 0; i < n; ++i) {
          const double yg = dot(self.value.row(i), self.grad.row(i));
          for (std::size_t j = 0; j < d; ++j)
            p.grad(i, j) += (self.grad(i, j) - self.value(i, j) * yg) / norms[i];
        }
      });
}

/// Entry (i, j) = cos(A_i, B_j).
inline Var cosine_matrix(const Var& a, const Var& b, double eps = kDefaultNormEps) {
  detail::require_rank(a, 2, "cosine_matrix");
  detail::require_rank(b, 2, "cosine_matrix");
  if (a->value.cols() != b->value.cols()) {
    throw DimensionError("cosine_matrix width mismatch: " +
                         shape_str(a->shape()) + " vs " + shape_str(b->shape()));
  }
  return matmul(normalize_rows(a, eps), transpose(normalize_rows(b, eps)));
}

// ---------------------------------------------------------------------------
// Dropout

/// Keep-mask (entries 0 or 1) for inverted dropout; a pure function of seed.
inline Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " +
                      std::to_string(rate));
  }
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  Rng rng(seed);
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : 1.0;
  }
  return mask;
}

namespace detail {

inline Var apply_mask(const Var& a, Tensor mask, double rate) {
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor out(a->shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = rate == 0.0 ? a->value[i] : a->value[i] * mask[i] * keep_scale;
  return make_op(std::move(out), "dropout", {a},
                 [mask = std::move(mask), keep_scale, rate](Node& self) {
                   Node& p = *self.parents[0];
                   for (std::size_t i = 0; i < p.grad.numel(); ++i) {
                     p.grad[i] += rate == 0.0
                                      ? self.grad[i]
                                      : self.grad[i] * mask[i] * keep_scale;
                   }
                 });
}

}  // namespace detail

struct DropoutResult {
  Var output;
  Tensor mask;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate).
inline DropoutResult dropout_forward(const Var& a, double rate,
                                     std::uint64_t mask_seed) {
  Tensor mask = dropout_mask(a->shape(), rate, mask_seed);
  Var out = detail::apply_mask(a, mask, rate);
  return {std::move(out), std::move(mask)};
}

/// Dropout on an [n x d] matrix with an independent seed per row; row i is
/// identical to dropout_forward(row_i, rate, seeds[i]).
inline Var dropout_rows(const Var& a, double rate,
                        const std::vector<std::uint64_t>& seeds) {
  detail::require_rank(a, 2, "dropout_rows");
  const std::size_t n = a->value.rows(), d = a->value.cols();
  if (seeds.size() != n) {
    throw ContractError("dropout_rows needs one seed per row");
  }
  Tensor mask(a->shape(), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor row_mask = dropout_mask(Shape{d}, rate, seeds[i]);
    std::copy(row_mask.data().begin(), row_mask.data().end(), mask.row(i).begin());
  }
  return detail::apply_mask(a, std::move(mask), rate);
}

// ---------------------------------------------------------------------------
// Reductions

/// Per-row log-sum-exp of an [n x m] matrix, max-shifted.
inline Var logsumexp_rows(const Var& s) {
  detail::require_rank(s, 2, "logsumexp_rows");
  const std::size_t n = s->value.rows(), m = s->value.cols();
  if (m == 0) throw ContractError("logsumexp over an empty row");
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    auto row = s->value.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (double x : row) acc += std::exp(x - mx);
    out[i] = mx + std::log(acc);
  }
  return detail::make_op(std::move(out), "logsumexp_rows", {s}, [](Node& self) {
    Node& p = *self.parents[0];
    const std::size_t n = p.value.rows(), m = p.value.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        p.grad(i, j) += self.grad[i] * std::exp(p.value(i, j) - self.value[i]);
  });
}

/// Per-row softmax cross-entropy -log softmax(s_i)[target_i], as
/// (m - s_t) + log1p(sum over non-max j of exp(s_j - m)). The log1p keeps
/// full relative precision when the target dominates the row.
inline Var softmax_xent_rows(const Var& s, std::vector<std::size_t> targets) {
  detail::require_rank(s, 2, "softmax_xent_rows");
  const std::size_t n = s->value.rows(), m = s->value.cols();
  if (m == 0) throw ContractError("softmax cross-entropy over an empty row");
  if (targets.size() != n) {
    throw DimensionError("softmax_xent_rows: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  Tensor out(Shape{n});
  Tensor lse(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= m) throw ContractError("softmax_xent_rows: target column out of range");
    auto row = s->value.row(i);
    const auto top = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const double mx = row[top];
    double rest = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != top) rest += std::exp(row[j] - mx);
    }
    const double tail = std::log1p(rest);
    out[i] = (mx - row[targets[i]]) + tail;
    lse[i] = mx + tail;
  }
  return detail::make_op(std::move(out), "softmax_xent_rows", {s},
                         [targets = std::move(targets), lse = std::move(lse)](Node& self) {
                           Node& p = *self.parents[0];
                           const std::size_t n = p.value.rows(), m = p.value.cols();
                           for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = 0; j < m; ++j) {
                               const double prob = std::exp(p.value(i, j) - lse[i]);
                               p.grad(i, j) += self.grad[i] * (prob - (j == targets[i] ? 1.0 : 0.0));
                             }
                           }
                         });
}

/// Main diagonal of a square matrix.
inline Var diagonal(const Var& s) {
  detail::require_rank(s, 2, "diagonal");
  if (s->value.rows() != s->value.cols()) {
    throw DimensionError("diagonal of non-square " + shape_str(s->shape()));
  }
  const std::size_t n = s->value.rows();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < n; ++i) out[i] = s->value(i, i);
  return detail::make_op(std::move(out), "diagonal", {s}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad(i, i) += self.grad[i];
  });
}

/// [n x m1] | [n x m2] -> [n x (m1 + m2)].
inline Var concat_cols(const Var& a, const Var& b) {
  detail::require_rank(a, 2, "concat_cols");
  detail::require_rank(b, 2, "concat_cols");
  if (a->value.rows() != b->value.rows()) {
    throw DimensionError("concat_cols row mismatch: " + shape_str(a->shape()) +
                         " | " + shape_str(b->shape()));
  }
  const std::size_t n = a->value.rows(), m1 = a->value.cols(), m2 = b->value.cols();
  Tensor out(Shape{n, m1 + m2});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m1; ++j) out(i, j) = a->value(i, j);
    for (std::size_t j = 0; j < m2; ++j) out(i, m1 + j) = b->value(i, j);
  }
  return detail::make_op(std::move(out), "concat_cols", {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const std::size_t n = pa.value.rows(), m1 = pa.value.cols(), m2 = pb.value.cols();
    for (std::size_t i = 0; i < n; ++i) {
      if (pa.requires_grad)
        for (std::size_t j = 0; j < m1; ++j) pa.grad(i, j) += self.grad(i, j);
      if (pb.requires_grad)
        for (std::size_t j = 0; j < m2; ++j) pb.grad(i, j) += self.grad(i, m1 + j);
    }
  });
}

inline Var sum_all(const Var& a) {
  double s = 0.0;
  for (double x : a->value.data()) s += x;
  return detail::make_op(Tensor::scalar(s), "sum_all", {a}, [](Node& self) {
    Node& p = *self.parents[0];
    const double g = self.grad[0];
    for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  });
}

inline Var mean_all(const Var& a) {
  const double n = static_cast<double>(a->value.numel());
  if (n == 0) throw ContractError("mean over empty tensor");
  return scale(sum_all(a), 1.0 / n);
}

// ---------------------------------------------------------------------------
// Backward pass

/// Nodes reachable from root in topological order (parents first).
inline std::vector<Node*> topological_order(const Var& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

/// Seeds d(root)/d(root) = 1, then applies every backward rule once in
/// reverse topological order. Leaf gradients accumulate across calls.
inline void backward(const Var& root) {
  if (root->value.numel() != 1) {
    throw ContractError("backward() needs a scalar root, got shape " +
                        shape_str(root->shape()));
  }
  root->grad[0] += 1.0;
  const auto order = topological_order(root);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_rule) node->backward_rule(*node);
  }
}

}  // namespace msim::ad
