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

// Serial reference kernels against their OpenMP counterparts.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "osgate/calibration.hpp"
#include "osgate/density.hpp"
#include "osgate/kernels.hpp"
#include "osgate/metrics.hpp"
#include "osgate/parallel.hpp"
#include "osgate/scoring.hpp"

namespace osgate {
namespace {

constexpr int kDim = 256;
constexpr int kClasses = 3;

ClassDensityModel random_model(std::mt19937_64& rng, int class_id, int k) {
  std::normal_distribution<double> normal;
  ClassDensityModel m;
  m.class_id = class_id;
  m.class_prior = 1.0 / kClasses;
  for (int c = 0; c < k; ++c) {
    GaussianComponent comp;
    comp.weight = 1.0 / k;
    comp.mean = Eigen::VectorXd::NullaryExpr(kDim, [&] { return normal(rng); });
    comp.chol = Eigen::MatrixXd::Zero(kDim, kDim);
    for (int i = 0; i < kDim; ++i) {
      comp.chol(i, i) = 1.0 + 0.1 * std::abs(normal(rng));
      for (int j = 0; j < i; ++j) comp.chol(i, j) = 0.02 * normal(rng);
    }
    m.components.push_back(std::move(comp));
  }
  return m;
}

struct Workload {
  std::vector<ClassDensityModel> single;
  std::vector<ClassDensityModel> multi;
  Eigen::MatrixXd logits;
  Eigen::MatrixXd embeddings;
  std::vector<int> labels;

  explicit Workload(Eigen::Index rows) {
    std::mt19937_64 rng(1);
    for (int c = 0; c < kClasses; ++c) {
      single.push_back(random_model(rng, c, 1));
      multi.push_back(random_model(rng, c, 3));
    }
    std::normal_distribution<double> normal;
    logits = Eigen::MatrixXd::NullaryExpr(rows, kClasses, [&] { return 2.0 * normal(rng); });
    embeddings = Eigen::MatrixXd::NullaryExpr(rows, kDim, [&] { return normal(rng); });
    std::uniform_int_distribution<int> cls(0, kClasses - 1);
    for (Eigen::Index i = 0; i < rows; ++i) labels.push_back(cls(rng));
  }
};

const Workload& workload() {
  static const Workload w(10000);
  return w;
}

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::kSerial : ExecPolicy::kParallel;
}

void BM_ScoreBatch(benchmark::State& state) {
  const auto& w = workload();
  const ScoringContext context{w.single, w.multi, 1.2, 1.5, true};
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_batch(w.logits, w.embeddings, context, policy_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * w.logits.rows());
}
BENCHMARK(BM_ScoreBatch)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_ComponentLogpdf(benchmark::State& state) {
  const auto& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::weighted_component_logpdf(w.embeddings, w.multi[0].components, policy_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * w.embeddings.rows());
}
BENCHMARK(BM_ComponentLogpdf)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_PerClassLoglik(benchmark::State& state) {
  const auto& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(per_class_loglik_batch(w.embeddings, w.single, policy_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * w.embeddings.rows());
}
BENCHMARK(BM_PerClassLoglik)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_LearnTemperature(benchmark::State& state) {
  const auto& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(learn_temperature(w.logits, w.labels, {}, policy_of(state)));
  }
}
BENCHMARK(BM_LearnTemperature)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

void BM_Auroc(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> id(100000), ood(100000);
  for (auto& v : id) v = normal(rng) + 1.0;
  for (auto& v : ood) v = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(auroc(id, ood));
}
BENCHMARK(BM_Auroc)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace osgate

BENCHMARK_MAIN();
