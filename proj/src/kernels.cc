/* Copyright 2026 The osgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "osgate/kernels.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "osgate/density.hpp"
#include "osgate/error.hpp"

namespace osgate::kernels {

namespace {

double log_det_half(const Eigen::MatrixXd& chol) {
  return chol.diagonal().array().log().sum();
}

void check_shapes(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                  std::span<const GaussianComponent> components) {
  for (const auto& c : components) {
    if (c.mean.size() != samples.cols() || c.chol.rows() != samples.cols() ||
        c.chol.cols() != samples.cols()) {
      throw ArgumentError("component dimension does not match samples");
    }
  }
}

// Fills out(block rows, k) with log N for one row block and every component.
void block_logpdf(const Eigen::Ref<const Eigen::MatrixXd>& samples, Eigen::Index begin,
                  Eigen::Index rows, std::span<const GaussianComponent> components,
                  std::span<const double> offsets, Eigen::MatrixXd& out) {
  const Eigen::Index dim = samples.cols();
  Eigen::MatrixXd centered(dim, rows);
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    centered = samples.middleRows(begin, rows).transpose();
    centered.colwise() -= c.mean;
    c.chol.triangularView<Eigen::Lower>().solveInPlace(centered);
    const Eigen::RowVectorXd quad = centered.colwise().squaredNorm();
    for (Eigen::Index r = 0; r < rows; ++r) {
      out(begin + r, static_cast<Eigen::Index>(k)) = offsets[k] - 0.5 * quad(r);
    }
  }
}

}  // namespace

Eigen::MatrixXd weighted_component_logpdf(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                          std::span<const GaussianComponent> components,
                                          ExecPolicy policy) {
  check_shapes(samples, components);
  const Eigen::Index n = samples.rows();
  const auto n_comp = static_cast<Eigen::Index>(components.size());
  Eigen::MatrixXd out(n, n_comp);
  if (n == 0 || n_comp == 0) return out;

  if (policy == ExecPolicy::kSerial) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd x = samples.row(i).transpose();
      for (Eigen::Index k = 0; k < n_comp; ++k) {
        const auto& c = components[static_cast<std::size_t>(k)];
        out(i, k) = std::log(c.weight) + log_gaussian_pdf(x, c.mean, c.chol);
      }
    }
    return out;
  }

  const double dim = static_cast<double>(samples.cols());
  std::vector<double> offsets(components.size());
  for (std::size_t k = 0; k < components.size(); ++k) {
    offsets[k] = std::log(components[k].weight) -
                 0.5 * dim * std::log(2.0 * std::numbers::pi) - log_det_half(components[k].chol);
  }

  const Eigen::Index n_blocks = (n + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static) num_threads(thread_cap())
  for (Eigen::Index b = 0; b < n_blocks; ++b) {
    const Eigen::Index begin = b * kRowBlock;
    const Eigen::Index rows = std::min(kRowBlock, n - begin);
    block_logpdf(samples, begin, rows, components, offsets, out);
  }
  return out;
}

Eigen::VectorXd component_logpdf(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                 const GaussianComponent& component, ExecPolicy policy) {
  GaussianComponent unit = component;
  unit.weight = 1.0;
  return weighted_component_logpdf(samples, std::span<const GaussianComponent>(&unit, 1), policy)
      .col(0);
}

Eigen::VectorXd rowwise_log_sum_exp(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = log_sum_exp(m.row(i).transpose());
  return out;
}

}  // namespace osgate::kernels
