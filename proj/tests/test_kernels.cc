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

#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "osgate/density.hpp"
#include "osgate/kernels.hpp"
#include "osgate/parallel.hpp"
#include "osgate/scoring.hpp"

namespace osgate {
namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                              double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return normal(rng); });
}

std::vector<ClassDensityModel> fitted_models(int classes, int dim, int k, std::uint64_t seed) {
  std::vector<ClassDensityModel> out;
  for (int c = 0; c < classes; ++c) {
    Eigen::MatrixXd x = random_matrix(300, dim, seed + c);
    x.col(c % dim).array() += 4.0 * c;
    FitConfig cfg;
    cfg.k = k;
    cfg.seed = seed;
    auto m = fit_gmm_em(x, cfg, 300 * classes, c);
    m.class_prior = 1.0 / classes;
    out.push_back(std::move(m));
  }
  return out;
}

class ThreadCapGuard {
 public:
  ~ThreadCapGuard() { set_thread_cap(0); }
};

TEST(Kernels, ParallelMatchesSerialReference) {
  const auto models = fitted_models(3, 12, 3, 1);
  // 700 rows spans several row blocks plus a ragged tail.
  const Eigen::MatrixXd x = random_matrix(700, 12, 99, 2.0);
  const auto& comps = models[1].components;
  const auto serial = kernels::weighted_component_logpdf(x, comps, ExecPolicy::kSerial);
  const auto parallel = kernels::weighted_component_logpdf(x, comps, ExecPolicy::kParallel);
  ASSERT_EQ(serial.rows(), 700);
  EXPECT_LT((serial - parallel).cwiseAbs().maxCoeff(), 1e-9);

  const auto ls = per_class_loglik_batch(x, models, ExecPolicy::kSerial);
  const auto lp = per_class_loglik_batch(x, models, ExecPolicy::kParallel);
  EXPECT_LT((ls - lp).cwiseAbs().maxCoeff(), 1e-9);
  for (Eigen::Index i = 0; i < 700; i += 97) {
    const auto direct = per_class_loglik(x.row(i).transpose(), models);
    EXPECT_LT((direct.transpose() - ls.row(i)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Kernels, ComponentLogpdfMatchesScalarPath) {
  const auto models = fitted_models(1, 5, 1, 3);
  const Eigen::MatrixXd x = random_matrix(300, 5, 4);
  const auto& c = models[0].components[0];
  const auto v = kernels::component_logpdf(x, c, ExecPolicy::kParallel);
  for (Eigen::Index i = 0; i < x.rows(); i += 13) {
    EXPECT_NEAR(v(i), log_gaussian_pdf(x.row(i).transpose(), c.mean, c.chol), 1e-9);
  }
}

TEST(Kernels, RowwiseLogSumExpIsStable) {
  Eigen::MatrixXd m(2, 3);
  m << 1000, 1000, 1000, -1000, -1000, -1000;
  const auto v = kernels::rowwise_log_sum_exp(m);
  EXPECT_NEAR(v(0), 1000 + std::log(3.0), 1e-12);
  EXPECT_NEAR(v(1), -1000 + std::log(3.0), 1e-12);
}

TEST(Kernels, ResultsIndependentOfThreadCount) {
  ThreadCapGuard guard;
  const auto models = fitted_models(3, 16, 2, 7);
  const Eigen::MatrixXd x = random_matrix(1100, 16, 8, 2.0);
  set_thread_cap(1);
  const auto one = per_class_loglik_batch(x, models, ExecPolicy::kParallel);
  for (int threads : {2, 3, 8}) {
    set_thread_cap(threads);
    const auto many = per_class_loglik_batch(x, models, ExecPolicy::kParallel);
    EXPECT_TRUE(one == many) << threads << " threads";
  }
}

TEST(Kernels, ScoreBatchSerialAndParallelAgree) {
  const auto single = fitted_models(3, 8, 1, 11);
  const auto multi = fitted_models(3, 8, 2, 11);
  const Eigen::MatrixXd emb = random_matrix(600, 8, 12, 3.0);
  const Eigen::MatrixXd logits = random_matrix(600, 3, 13, 2.0);
  const ScoringContext ctx{single, multi, 1.3, 2.0, true};
  const auto a = score_batch(logits, emb, ctx, ExecPolicy::kSerial);
  const auto b = score_batch(logits, emb, ctx, ExecPolicy::kParallel);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].softmax_conf, b[i].softmax_conf);
    EXPECT_NEAR(a[i].gmm_density, b[i].gmm_density, 1e-9);
    EXPECT_NEAR(a[i].gmm_posterior_entropy, b[i].gmm_posterior_entropy, 1e-9);
    EXPECT_NEAR(a[i].gmm_per_class_max, b[i].gmm_per_class_max, 1e-9);
    EXPECT_NEAR(a[i].multi_gmm_density, b[i].multi_gmm_density, 1e-9);
  }
}

TEST(Kernels, EmptyInput) {
  const auto models = fitted_models(1, 4, 1, 1);
  const Eigen::MatrixXd x(0, 4);
  EXPECT_EQ(kernels::weighted_component_logpdf(x, models[0].components, ExecPolicy::kParallel)
                .rows(),
            0);
}

}  // namespace
}  // namespace osgate
