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

#include "osgate/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "osgate/error.hpp"
#include "osgate/kernels.hpp"

namespace osgate {

namespace {

constexpr double kMinComponentWeight = 1e-8;
constexpr double kMaxCondition = 1e12;

std::string class_tag(int class_id) { return "class " + std::to_string(class_id) + ": "; }

// Mean diagonal of a covariance, falling back to 1 when the data has no spread
// so the jitter term never vanishes.
double jitter_scale(const Eigen::MatrixXd& cov) {
  const double s = cov.trace() / static_cast<double>(cov.rows());
  return (s > 0.0 && std::isfinite(s)) ? s : 1.0;
}

Eigen::MatrixXd unbiased_covariance(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                    const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
}

std::optional<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::MatrixXd l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return std::nullopt;
  }
  return l;
}

// Cheap lower bound on the condition number from the factor's diagonal.
double condition_estimate(const Eigen::MatrixXd& chol) {
  const double hi = chol.diagonal().maxCoeff();
  const double lo = chol.diagonal().minCoeff();
  return (hi / lo) * (hi / lo);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// k-means++ seeding. When every remaining sample coincides with a chosen center
// the next unused index is taken; the resulting duplicate components are
// handled by the collapse logic.
std::vector<Eigen::Index> kmeanspp(const Eigen::Ref<const Eigen::MatrixXd>& x, int k,
                                   std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> centers;
  centers.push_back(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
  Eigen::VectorXd d2 = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2(i) > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = 0;
      while (pick < n - 1 &&
             std::find(centers.begin(), centers.end(), pick) != centers.end()) {
        ++pick;
      }
    }
    centers.push_back(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }
  return centers;
}

// 0.5 * gamma * sum_k tr(Sigma_k^-1), the negative log of the covariance prior
// whose MAP update is Sigma_k = S_k + (gamma / N_k) I.
double covariance_penalty(std::span<const GaussianComponent> comps, double gamma) {
  double total = 0.0;
  for (const auto& c : comps) {
    Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(c.chol.rows(), c.chol.cols());
    c.chol.triangularView<Eigen::Lower>().solveInPlace(inv);
    total += inv.squaredNorm();
  }
  return 0.5 * gamma * total;
}

bool duplicate_of(const GaussianComponent& a, const GaussianComponent& b) {
  const double tol = 1e-9;
  return (a.mean - b.mean).norm() <= tol * (1.0 + a.mean.norm()) &&
         (a.chol - b.chol).norm() <= tol * (1.0 + a.chol.norm()) &&
         std::abs(a.weight - b.weight) <= tol;
}

struct EmOutcome {
  std::vector<GaussianComponent> components;
  int iterations = 0;
  bool converged = false;
};

class EmRunner {
 public:
  EmRunner(const Eigen::Ref<const Eigen::MatrixXd>& x, const FitConfig& config, double lambda,
           const Eigen::MatrixXd& base_chol, std::mt19937_64& rng, EmTrace* trace,
           std::vector<std::string>& events)
      : x_(x), config_(config), lambda_(lambda), base_chol_(base_chol), rng_(rng),
        trace_(trace), events_(events) {}

  // Returns nullopt when some component collapses a second time.
  std::optional<EmOutcome> run(int k) {
    const Eigen::Index n = x_.rows();
    const double gamma = lambda_ * static_cast<double>(n) / k;

    std::vector<GaussianComponent> comps;
    for (Eigen::Index idx : kmeanspp(x_, k, rng_)) {
      comps.push_back({1.0 / k, x_.row(idx).transpose(), base_chol_});
    }
    std::vector<char> reseeded(static_cast<std::size_t>(k), 0);
    open_segment();

    EmOutcome outcome;
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config_.em_max_iters; ++iter) {
      // E-step: objective of the current parameters plus responsibilities.
      const Eigen::MatrixXd logp =
          kernels::weighted_component_logpdf(x_, comps, ExecPolicy::kParallel);
      const Eigen::VectorXd row_lse = kernels::rowwise_log_sum_exp(logp);
      const double nll = -row_lse.sum() / static_cast<double>(n);
      const double objective = nll + covariance_penalty(comps, gamma) / static_cast<double>(n);
      record(objective, nll);
      if (std::isfinite(prev) &&
          std::abs(prev - objective) <= config_.em_tol * std::max(std::abs(objective), 1e-300)) {
        outcome.converged = true;
        break;
      }
      prev = objective;
      const Eigen::MatrixXd resp = (logp.colwise() - row_lse).array().exp().matrix();

      // M-step.
      std::vector<char> collapsed(static_cast<std::size_t>(k), 0);
      for (int c = 0; c < k; ++c) {
        const Eigen::VectorXd r = resp.col(c);
        const double nk = r.sum();
        auto& comp = comps[static_cast<std::size_t>(c)];
        if (!(nk / static_cast<double>(n) >= kMinComponentWeight)) {
          collapsed[static_cast<std::size_t>(c)] = 1;
          continue;
        }
        comp.weight = nk / static_cast<double>(n);
        comp.mean = (x_.transpose() * r) / nk;
        const Eigen::MatrixXd centered = x_.rowwise() - comp.mean.transpose();
        Eigen::MatrixXd cov =
            (centered.array().colwise() * r.array()).matrix().transpose() * centered / nk;
        cov.diagonal().array() += gamma / nk;
        auto chol = cholesky(cov);
        if (!chol || condition_estimate(*chol) > kMaxCondition) {
          collapsed[static_cast<std::size_t>(c)] = 1;
          continue;
        }
        comp.chol = std::move(*chol);
      }
      normalize_weights(comps);
      for (int c = 1; c < k; ++c) {
        for (int j = 0; j < c; ++j) {
          if (!collapsed[static_cast<std::size_t>(j)] &&
              duplicate_of(comps[static_cast<std::size_t>(c)], comps[static_cast<std::size_t>(j)])) {
            collapsed[static_cast<std::size_t>(c)] = 1;
          }
        }
      }
      ++outcome.iterations;

      bool restarted = false;
      for (int c = 0; c < k; ++c) {
        if (!collapsed[static_cast<std::size_t>(c)]) continue;
        if (reseeded[static_cast<std::size_t>(c)]) {
          events_.push_back("component " + std::to_string(c) + " collapsed again at iteration " +
                            std::to_string(iter + 1));
          iterations_ += outcome.iterations;
          return std::nullopt;
        }
        reseeded[static_cast<std::size_t>(c)] = 1;
        Eigen::Index worst = 0;
        row_lse.minCoeff(&worst);
        auto& comp = comps[static_cast<std::size_t>(c)];
        comp.mean = x_.row(worst).transpose();
        comp.chol = base_chol_;
        reweight_reseeded(comps, c);
        events_.push_back("component " + std::to_string(c) + " collapsed at iteration " +
                          std::to_string(iter + 1) + "; re-seeded from sample " +
                          std::to_string(worst));
        restarted = true;
      }
      if (restarted) {
        open_segment();
        prev = std::numeric_limits<double>::infinity();
      }
    }
    iterations_ += outcome.iterations;
    outcome.components = std::move(comps);
    return outcome;
  }

  int total_iterations() const { return iterations_; }

 private:
  static void normalize_weights(std::vector<GaussianComponent>& comps) {
    double sum = 0.0;
    for (const auto& c : comps) sum += c.weight;
    for (auto& c : comps) c.weight /= sum;
  }

  static void reweight_reseeded(std::vector<GaussianComponent>& comps, int reseeded) {
    const double k = static_cast<double>(comps.size());
    double others = 0.0;
    for (std::size_t j = 0; j < comps.size(); ++j) {
      if (static_cast<int>(j) != reseeded) others += comps[j].weight;
    }
    for (std::size_t j = 0; j < comps.size(); ++j) {
      if (static_cast<int>(j) == reseeded) {
        comps[j].weight = 1.0 / k;
      } else {
        comps[j].weight = others > 0.0 ? comps[j].weight * (1.0 - 1.0 / k) / others : 1.0 / k;
      }
    }
    normalize_weights(comps);
  }

  void open_segment() {
    if (!trace_) return;
    trace_->segments.emplace_back();
    trace_->nll_segments.emplace_back();
  }

  void record(double objective, double nll) {
    if (!trace_) return;
    trace_->segments.back().push_back(objective);
    trace_->nll_segments.back().push_back(nll);
  }

  const Eigen::Ref<const Eigen::MatrixXd>& x_;
  const FitConfig& config_;
  double lambda_;
  const Eigen::MatrixXd& base_chol_;
  std::mt19937_64& rng_;
  EmTrace* trace_;
  std::vector<std::string>& events_;
  int iterations_ = 0;
};

}  // namespace

void validate_fit_config(const FitConfig& config) {
  if (config.k < 1 || config.k > 4) throw ArgumentError("K must be in {1,2,3,4}");
  if (!(config.jitter > 0.0) || !std::isfinite(config.jitter)) {
    throw ArgumentError("jitter must be positive");
  }
  if (config.em_max_iters < 1) throw ArgumentError("em_max_iters must be >= 1");
  if (!(config.em_tol > 0.0)) throw ArgumentError("em_tol must be positive");
}

double log_gaussian_pdf(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& mean,
                        const Eigen::Ref<const Eigen::MatrixXd>& chol) {
  const Eigen::Index d = x.size();
  if (mean.size() != d || chol.rows() != d || chol.cols() != d) {
    throw ArgumentError("log_gaussian_pdf: dimension mismatch");
  }
  const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(x - mean);
  return -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + z.squaredNorm()) -
         chol.diagonal().array().log().sum();
}

ClassDensityModel fit_single_gaussian(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                      std::size_t total_count, double jitter, int class_id) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 2) {
    throw FitError(class_tag(class_id) + "need at least 2 samples, got " + std::to_string(n));
  }
  if (total_count < static_cast<std::size_t>(n)) {
    throw ArgumentError(class_tag(class_id) + "total_count smaller than class sample count");
  }
  if (!(jitter > 0.0)) throw ArgumentError("jitter must be positive");

  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  Eigen::MatrixXd cov = unbiased_covariance(samples, mean);
  cov.diagonal().array() += jitter * jitter_scale(cov);
  auto chol = cholesky(cov);
  if (!chol) throw FitError(class_tag(class_id) + "covariance is not positive definite");

  ClassDensityModel model;
  model.class_id = class_id;
  model.class_prior = static_cast<double>(n) / static_cast<double>(total_count);
  model.components.push_back({1.0, mean, std::move(*chol)});
  model.info.requested_k = 1;
  model.info.em_iterations = 0;
  model.info.converged = true;
  model.info.sample_count = static_cast<std::size_t>(n);
  model.info.degenerate = n <= d;
  if (model.info.degenerate) {
    model.info.events.push_back("degenerate: " + std::to_string(n) + " samples for dim " +
                                std::to_string(d) + "; covariance is positive definite only via jitter");
  }
  return model;
}

ClassDensityModel fit_gmm_em(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                             const FitConfig& config, std::size_t total_count, int class_id,
                             EmTrace* trace) {
  validate_fit_config(config);
  if (config.k == 1) {
    auto model = fit_single_gaussian(samples, total_count, config.jitter, class_id);
    model.info.em_iterations = 1;
    return model;
  }
  const Eigen::Index n = samples.rows();
  if (n < 2) {
    throw FitError(class_tag(class_id) + "need at least 2 samples, got " + std::to_string(n));
  }

  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  Eigen::MatrixXd base_cov = unbiased_covariance(samples, mean);
  const double lambda = config.jitter * jitter_scale(base_cov);
  base_cov.diagonal().array() += lambda;
  const auto base_chol = cholesky(base_cov);
  if (!base_chol) throw FitError(class_tag(class_id) + "covariance is not positive definite");

  std::mt19937_64 rng(config.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(class_id + 1)));
  std::vector<std::string> events;
  EmRunner runner(samples, config, lambda, *base_chol, rng, trace, events);

  for (int k = config.k; k >= 2; --k) {
    auto outcome = runner.run(k);
    if (!outcome) {
      events.push_back("K reduced from " + std::to_string(k) + " to " + std::to_string(k - 1));
      continue;
    }
    ClassDensityModel model;
    model.class_id = class_id;
    model.class_prior = static_cast<double>(n) / static_cast<double>(total_count);
    model.components = std::move(outcome->components);
    model.info.requested_k = config.k;
    model.info.em_iterations = runner.total_iterations();
    model.info.converged = outcome->converged;
    model.info.sample_count = static_cast<std::size_t>(n);
    model.info.degenerate = n <= samples.cols();
    model.info.events = std::move(events);
    return model;
  }

  auto model = fit_single_gaussian(samples, total_count, config.jitter, class_id);
  model.info.requested_k = config.k;
  model.info.em_iterations = runner.total_iterations() + 1;
  events.insert(events.end(), model.info.events.begin(), model.info.events.end());
  model.info.events = std::move(events);
  return model;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double class_loglik(const Eigen::Ref<const Eigen::VectorXd>& e, const ClassDensityModel& model) {
  Eigen::VectorXd terms(model.k());
  for (int k = 0; k < model.k(); ++k) {
    const auto& c = model.components[static_cast<std::size_t>(k)];
    terms(k) = std::log(c.weight) + log_gaussian_pdf(e, c.mean, c.chol);
  }
  return log_sum_exp(terms);
}

Eigen::VectorXd per_class_loglik(const Eigen::Ref<const Eigen::VectorXd>& e,
                                 std::span<const ClassDensityModel> models) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(models.size()));
  for (std::size_t c = 0; c < models.size(); ++c) {
    out(static_cast<Eigen::Index>(c)) = class_loglik(e, models[c]);
  }
  return out;
}

Eigen::VectorXd class_log_priors(std::span<const ClassDensityModel> models) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(models.size()));
  for (std::size_t c = 0; c < models.size(); ++c) {
    out(static_cast<Eigen::Index>(c)) = std::log(models[c].class_prior);
  }
  return out;
}

Eigen::VectorXd gmm_posterior_from_loglik(const Eigen::Ref<const Eigen::VectorXd>& loglik,
                                          const Eigen::Ref<const Eigen::VectorXd>& log_priors,
                                          double t_gmm) {
  if (!(t_gmm > 0.0)) throw ArgumentError("T_gmm must be positive");
  const Eigen::VectorXd a = (loglik + log_priors) / t_gmm;
  const double lse = log_sum_exp(a);
  return (a.array() - lse).unaryExpr([](double x) { return std::exp(x); }).matrix();
}

Eigen::VectorXd gmm_posterior(const Eigen::Ref<const Eigen::VectorXd>& e,
                              std::span<const ClassDensityModel> models, double t_gmm,
                              bool use_priors) {
  const Eigen::VectorXd ll = per_class_loglik(e, models);
  const Eigen::VectorXd pri =
      use_priors ? class_log_priors(models) : Eigen::VectorXd::Zero(ll.size()).eval();
  return gmm_posterior_from_loglik(ll, pri, t_gmm);
}

double gmm_marginal_density(const Eigen::Ref<const Eigen::VectorXd>& loglik,
                            const Eigen::Ref<const Eigen::VectorXd>& log_priors) {
  return log_sum_exp(loglik + log_priors);
}

Eigen::MatrixXd per_class_loglik_batch(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                                       std::span<const ClassDensityModel> models,
                                       ExecPolicy policy) {
  std::vector<GaussianComponent> all;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  for (const auto& m : models) {
    ranges.emplace_back(static_cast<Eigen::Index>(all.size()), m.k());
    all.insert(all.end(), m.components.begin(), m.components.end());
  }
  const Eigen::MatrixXd logp = kernels::weighted_component_logpdf(samples, all, policy);
  Eigen::MatrixXd out(samples.rows(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t c = 0; c < models.size(); ++c) {
    const auto [begin, count] = ranges[c];
    out.col(static_cast<Eigen::Index>(c)) =
        kernels::rowwise_log_sum_exp(logp.middleCols(begin, count));
  }
  return out;
}

Eigen::MatrixXd to_matrix(std::span<const std::vector<float>> rows, int dim) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != dim) {
      throw ArgumentError("row " + std::to_string(i) + " has wrong dimension");
    }
    for (int j = 0; j < dim; ++j) {
      out(static_cast<Eigen::Index>(i), j) = static_cast<double>(rows[i][static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

}  // namespace osgate
