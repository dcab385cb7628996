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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "msim/errors.hpp"
#include "msim/tensor.hpp"

namespace msim {

struct Projection {
  Tensor coords;                        // [n x out_dim]
  Tensor components;                    // [out_dim x d], unit rows
  std::vector<double> explained_ratio;  // per output component
};

/// PCA via eigendecomposition of the sample covariance. Each component's
/// sign is fixed so that its largest-magnitude loading is positive.
inline Projection pca_project(const Tensor& x, std::size_t out_dim = 2) {
  if (x.rank() != 2) throw DimensionError("pca_project expects a matrix");
  const std::size_t n = x.rows(), d = x.cols();
  if (n < out_dim || out_dim == 0) {
    throw ContractError("pca_project needs n >= out_dim >= 1 (n=" + std::to_string(n) + ")");
  }
  Eigen::MatrixXd m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = x(i, j);
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  const Eigen::MatrixXd cov = (m.transpose() * m) / static_cast<double>(std::max<std::size_t>(n - 1, 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd values = eig.eigenvalues();  // ascending
  const Eigen::MatrixXd vectors = eig.eigenvectors();
  double total = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) total += std::max(values(i), 0.0);

  Projection p;
  p.coords = Tensor(Shape{n, out_dim});
  p.components = Tensor(Shape{out_dim, d});
  for (std::size_t c = 0; c < out_dim; ++c) {
    const Eigen::Index src = static_cast<Eigen::Index>(d) - 1 - static_cast<Eigen::Index>(c);
    if (src < 0) {
      p.explained_ratio.push_back(0.0);
      continue;
    }
    Eigen::VectorXd v = vectors.col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const double var = std::max(values(src), 0.0);
    p.explained_ratio.push_back(total > 0.0 ? var / total : 0.0);
    for (std::size_t j = 0; j < d; ++j) p.components(c, j) = v(static_cast<Eigen::Index>(j));
    const Eigen::VectorXd proj = m * v;
    for (std::size_t i = 0; i < n; ++i) p.coords(i, c) = proj(static_cast<Eigen::Index>(i));
  }
  return p;
}

}  // namespace msim
