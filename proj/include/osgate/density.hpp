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

// Per-class Gaussian and Gaussian-mixture density models over detection
// embeddings. Covariances are held as lower Cholesky factors throughout; no
// explicit inverse is ever formed.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "osgate/parallel.hpp"
#include "osgate/types.hpp"

namespace osgate {

struct FitConfig {
  int k = 1;                 // components per class, 1..4
  double jitter = 1e-6;      // relative to trace(cov) / dim
  int em_max_iters = 200;
  double em_tol = 1e-6;      // relative change of the EM objective
  std::uint64_t seed = 0;
};

void validate_fit_config(const FitConfig& config);

// log N(x; mean, L L^T) via a triangular solve. Throws ArgumentError on
// dimension mismatch.
double log_gaussian_pdf(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& mean,
                        const Eigen::Ref<const Eigen::MatrixXd>& chol);

// Closed-form K=1 fit. samples is n x dim (one row per embedding).
// Covariance is the unbiased sample covariance plus jitter * (trace/dim) * I;
// class prior is n / total_count. Throws FitError when n < 2.
ClassDensityModel fit_single_gaussian(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                      std::size_t total_count, double jitter, int class_id = 0);

// Per-iteration EM objective (mean negative log-likelihood plus the covariance
// regulariser), split into segments at each re-seed / restart. Within a segment
// the values are non-increasing.
struct EmTrace {
  std::vector<std::vector<double>> segments;
  // Plain mean NLL (no regulariser) for the same iterations.
  std::vector<std::vector<double>> nll_segments;
};

// K-component mixture fitted with EM from a seeded k-means++ start. K=1 falls
// back to fit_single_gaussian. A collapsed component (weight < 1e-8, covariance
// condition > 1e12, or a duplicate of another component) is re-seeded once from
// the worst-explained sample; a second collapse drops K by one and refits.
ClassDensityModel fit_gmm_em(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                             const FitConfig& config, std::size_t total_count,
                             int class_id = 0, EmTrace* trace = nullptr);

// log sum_k w_k N(e; mu_k, Sigma_k) for one class.
double class_loglik(const Eigen::Ref<const Eigen::VectorXd>& e, const ClassDensityModel& model);

// Entry c is the class-c mixture log density.
Eigen::VectorXd per_class_loglik(const Eigen::Ref<const Eigen::VectorXd>& e,
                                 std::span<const ClassDensityModel> models);

Eigen::VectorXd class_log_priors(std::span<const ClassDensityModel> models);

// softmax((loglik + log prior) / t_gmm) over classes. Priors are skipped when
// use_priors is false.
Eigen::VectorXd gmm_posterior(const Eigen::Ref<const Eigen::VectorXd>& e,
                              std::span<const ClassDensityModel> models, double t_gmm,
                              bool use_priors = true);

// Same, starting from a precomputed log-likelihood vector.
Eigen::VectorXd gmm_posterior_from_loglik(const Eigen::Ref<const Eigen::VectorXd>& loglik,
                                          const Eigen::Ref<const Eigen::VectorXd>& log_priors,
                                          double t_gmm);

// log sum_c pi_c exp(loglik_c): the prior-weighted marginal density.
double gmm_marginal_density(const Eigen::Ref<const Eigen::VectorXd>& loglik,
                            const Eigen::Ref<const Eigen::VectorXd>& log_priors);

// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

// Batch form: row i holds per_class_loglik of samples.row(i).
Eigen::MatrixXd per_class_loglik_batch(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                       std::span<const ClassDensityModel> models,
                                       ExecPolicy policy = ExecPolicy::kParallel);

// Stacks float embeddings into an n x dim double matrix.
Eigen::MatrixXd to_matrix(std::span<const std::vector<float>> rows, int dim);

}  // namespace osgate
