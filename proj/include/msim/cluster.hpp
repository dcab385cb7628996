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
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "msim/errors.hpp"
#include "msim/rng.hpp"
#include "msim/tensor.hpp"

namespace msim {

struct KMeansOptions {
  std::size_t k = 15;
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-9;
};

struct KMeansRun {
  std::vector<std::size_t> assignment;
  Tensor centroids;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after every assignment step
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline Tensor kmeanspp_init(const Tensor& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows(), d = x.cols();
  Tensor c(Shape{k, d});
  std::size_t first = rng.below(n);
  std::copy(x.row(first).begin(), x.row(first).end(), c.row(0).begin());
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t m = 1; m < k; ++m) {
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], sq_dist(x.row(i), c.row(m - 1)));
    double total = 0.0;
    for (double b : best) total += b;
    std::size_t pick = 0;
    if (total > 0.0) {
      pick = rng.categorical(best);
    } else {
      pick = rng.below(n);
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(m).begin());
  }
  return c;
}

/// Assigns every point to its nearest centroid (lowest index on ties) and
/// returns the inertia.
inline double assign(const Tensor& x, const Tensor& c, std::vector<std::size_t>& a,
                     std::vector<double>& dist) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t arg = 0;
    double bd = sq_dist(x.row(i), c.row(0));
    for (std::size_t m = 1; m < c.rows(); ++m) {
      const double dd = sq_dist(x.row(i), c.row(m));
      if (dd < bd) {
        bd = dd;
        arg = m;
      }
    }
    a[i] = arg;
    dist[i] = bd;
    inertia += bd;
  }
  return inertia;
}

}  // namespace detail

/// One k-means++ / Lloyd run. An empty cluster is reseeded at the point
/// farthest from its current centroid.
inline KMeansRun kmeans_once(const Tensor& x, const KMeansOptions& opt, Rng& rng) {
  const std::size_t n = x.rows(), d = x.cols(), k = opt.k;
  KMeansRun run;
  run.centroids = detail::kmeanspp_init(x, k, rng);
  run.assignment.assign(n, 0);
  std::vector<double> dist(n);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    run.inertia = detail::assign(x, run.centroids, run.assignment, dist);
    run.inertia_trace.push_back(run.inertia);
    ++run.iterations;

    Tensor next(Shape{k, d});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[run.assignment[i]];
      auto dst = next.row(run.assignment[i]);
      auto src = x.row(i);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t m = 0; m < k; ++m) {
      if (counts[m] == 0) {
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!taken[i] && dist[i] > fd) {
            fd = dist[i];
            far = i;
          }
        }
        taken[far] = true;
        std::copy(x.row(far).begin(), x.row(far).end(), next.row(m).begin());
        ++run.reseeds;
      } else {
        for (double& v : next.row(m)) v /= static_cast<double>(counts[m]);
      }
    }
    double shift = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
      shift = std::max(shift, std::sqrt(detail::sq_dist(next.row(m), run.centroids.row(m))));
    }
    run.centroids = std::move(next);
    if (shift < opt.tolerance) {
      run.inertia = detail::assign(x, run.centroids, run.assignment, dist);
      run.inertia_trace.push_back(run.inertia);
      break;
    }
  }
  return run;
}

/// Best of `restarts` runs by inertia; labels play no part.
inline KMeansRun kmeans(const Tensor& x, const KMeansOptions& opt) {
  if (opt.k < 1 || opt.k > x.rows()) {
    throw ContractError("k-means needs 1 <= k <= n (k=" + std::to_string(opt.k) +
                        ", n=" + std::to_string(x.rows()) + ")");
  }
  KMeansRun best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, opt.restarts); ++r) {
    Rng rng(derive_seed(opt.seed, r));
    KMeansRun run = kmeans_once(x, opt, rng);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

struct PurityResult {
  double purity = 0.0;
  double macro_purity = 0.0;
};

/// purity = (1/n) sum_c max_label |c ∩ label|; macro_purity averages the
/// per-cluster majority fraction over non-empty clusters.
inline PurityResult purity(const std::vector<std::size_t>& assignment,
                           const std::vector<int>& labels) {
  if (assignment.size() != labels.size() || assignment.empty()) {
    throw ContractError("purity needs one label per assigned point");
  }
  std::map<std::size_t, std::map<int, std::size_t>> table;
  for (std::size_t i = 0; i < assignment.size(); ++i) ++table[assignment[i]][labels[i]];
  PurityResult r;
  std::size_t majority_total = 0;
  for (const auto& [cluster, counts] : table) {
    std::size_t size = 0, top = 0;
    for (const auto& [label, c] : counts) {
      size += c;
      top = std::max(top, c);
    }
    majority_total += top;
    r.macro_purity += static_cast<double>(top) / static_cast<double>(size);
  }
  r.purity = static_cast<double>(majority_total) / static_cast<double>(assignment.size());
  r.macro_purity /= static_cast<double>(table.size());
  return r;
}

struct ClusteringResult {
  PurityResult purity;
  double inertia = 0.0;
  std::vector<std::size_t> assignment;
};

inline ClusteringResult kmeans_purity(const Tensor& x, const std::vector<int>& labels,
                                      const KMeansOptions& opt) {
  if (labels.size() != x.rows()) throw ContractError("label count differs from point count");
  KMeansRun run = kmeans(x, opt);
  return {purity(run.assignment, labels), run.inertia, std::move(run.assignment)};
}

}  // namespace msim
