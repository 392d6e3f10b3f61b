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

#pragma once

// Batch density kernels. Each has a serial reference (one triangular solve per
// sample) and a parallel version that solves fixed-size row blocks as
// multi-right-hand-side triangular systems under OpenMP. Block boundaries do
// not depend on the thread count, so parallel results are bitwise reproducible
// across thread counts.

#include <span>

#include <Eigen/Core>

#include "osgate/parallel.hpp"
#include "osgate/types.hpp"

namespace osgate::kernels {

inline constexpr Eigen::Index kRowBlock = 256;

// log N(x_i; mean, L L^T) for every row x_i of samples (no weight term).
Eigen::VectorXd component_logpdf(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                 const GaussianComponent& component, ExecPolicy policy);

// n x K matrix: log w_k + log N(x_i; mu_k, Sigma_k).
Eigen::MatrixXd weighted_component_logpdf(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                          std::span<const GaussianComponent> components,
                                          ExecPolicy policy);

// Row-wise log-sum-exp of a matrix.
Eigen::VectorXd rowwise_log_sum_exp(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace osgate::kernels
