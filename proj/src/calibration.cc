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

#include "osgate/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osgate/assignment.hpp"
#include "osgate/density.hpp"
#include "osgate/error.hpp"

namespace osgate {

std::vector<std::size_t> prune(std::span<const double> raw_softmax_conf, double threshold) {
  std::vector<std::size_t> kept;
  kept.reserve(raw_softmax_conf.size());
  for (std::size_t i = 0; i < raw_softmax_conf.size(); ++i) {
    if (raw_softmax_conf[i] >= threshold) kept.push_back(i);
  }
  return kept;
}

std::vector<double> temperature_grid(const TemperatureSearch& search) {
  if (!(search.t_min > 0.0) || !(search.t_max > search.t_min) || search.grid_points < 2) {
    throw ArgumentError("invalid temperature search range");
  }
  std::vector<double> grid(static_cast<std::size_t>(search.grid_points));
  const double lo = std::log(search.t_min);
  const double hi = std::log(search.t_max);
  const double step = (hi - lo) / (search.grid_points - 1);
  for (int i = 0; i < search.grid_points; ++i) grid[static_cast<std::size_t>(i)] = std::exp(lo + step * i);
  grid.front() = search.t_min;
  grid.back() = search.t_max;
  return grid;
}

double temperature_nll(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                       std::span<const int> labels, double temperature) {
  const Eigen::Index n = vectors.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd a = vectors.row(i).transpose() / temperature;
    total += log_sum_exp(a) - a(labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(n);
}

TemperatureFit learn_temperature(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                                 std::span<const int> labels, const TemperatureSearch& search,
                                 ExecPolicy policy) {
  if (vectors.rows() == 0) throw ConfigError("temperature learning needs at least one sample");
  if (static_cast<std::size_t>(vectors.rows()) != labels.size()) {
    throw ArgumentError("vector and label counts differ");
  }
  for (int y : labels) {
    if (y < 0 || y >= vectors.cols()) throw ArgumentError("label out of range");
  }
  if (!vectors.allFinite()) throw ArgumentError("non-finite calibration vector");

  const auto grid = temperature_grid(search);
  std::vector<double> nll(grid.size());
  const auto g = static_cast<std::ptrdiff_t>(grid.size());
  if (policy == ExecPolicy::kParallel) {
#pragma omp parallel for schedule(static) num_threads(thread_cap())
    for (std::ptrdiff_t i = 0; i < g; ++i) {
      nll[static_cast<std::size_t>(i)] = temperature_nll(vectors, labels, grid[static_cast<std::size_t>(i)]);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < g; ++i) {
      nll[static_cast<std::size_t>(i)] = temperature_nll(vectors, labels, grid[static_cast<std::size_t>(i)]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(nll.begin(), nll.end()) - nll.begin());

  // Golden-section search inside the neighbouring grid cells.
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = temperature_nll(vectors, labels, c);
  double fd = temperature_nll(vectors, labels, d);
  while (b - a > search.tolerance) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = temperature_nll(vectors, labels, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = temperature_nll(vectors, labels, d);
    }
  }
  const double refined = 0.5 * (a + b);
  const double refined_nll = temperature_nll(vectors, labels, refined);

  TemperatureFit fit;
  if (refined_nll < nll[best]) {
    fit.temperature = refined;
    fit.nll = refined_nll;
  } else {
    fit.temperature = grid[best];
    fit.nll = nll[best];
  }
  fit.nll_at_one = temperature_nll(vectors, labels, 1.0);
  return fit;
}

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty sample");
  if (!(q > 0.0 && q < 1.0)) throw ArgumentError("quantile level must be in (0, 1)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Guard against q * n landing a hair above an integer through rounding.
  auto rank = static_cast<std::size_t>(std::ceil(q * n * (1.0 - 1e-12)));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

JointThresholds select_joint_thresholds(std::span<const double> softmax_conf,
                                        std::span<const double> posterior_entropy,
                                        const ThresholdPolicy& policy) {
  if (softmax_conf.empty() || posterior_entropy.empty()) {
    throw ArgumentError("threshold selection needs validation detections");
  }
  JointThresholds t;
  t.policy = policy;
  t.tau_soft = empirical_quantile(softmax_conf, policy.soft_quantile);
  t.tau_gmm = empirical_quantile(posterior_entropy, policy.gmm_quantile);
  return t;
}

const ModeConfig& ModeMatrix::at(Mode mode) const {
  for (const auto& m : modes) {
    if (m.mode == mode) return m;
  }
  throw ArgumentError("mode not in matrix");
}

ModeMatrix build_mode_matrix(double t_model, double t_gmm, double prune_threshold) {
  if (!(t_model > 0.0) || !(t_gmm > 0.0) || !std::isfinite(t_model) || !std::isfinite(t_gmm)) {
    throw ArgumentError("temperatures must be positive and finite");
  }
  ModeMatrix m;
  m.modes[0] = {Mode::kRaw, false, prune_threshold, 1.0, 1.0};
  m.modes[1] = {Mode::kPruned, true, prune_threshold, 1.0, 1.0};
  m.modes[2] = {Mode::kTemp, false, prune_threshold, t_model, t_gmm};
  m.modes[3] = {Mode::kPrunedTemp, true, prune_threshold, t_model, t_gmm};
  return m;
}

const ModeCalibration& CalibrationArtifacts::at(Mode mode) const {
  for (const auto& m : modes) {
    if (m.mode == mode) return m;
  }
  throw ConfigError("mode " + std::string(to_string(mode)) + " was not calibrated");
}

CalibrationArtifacts calibrate(const Dataset& validation, const ModelSet& models,
                               const CalibrationOptions& options) {
  validate_model_set(models);
  if (validation.manifest.num_classes != models.num_classes ||
      validation.manifest.embedding_dim != models.embedding_dim) {
    throw ValidationError("validation dataset does not match the model dimensions");
  }

  std::vector<std::size_t> det_index;
  std::vector<int> labels;
  for (const auto& m : match_dataset(validation, options.match_floor)) {
    const auto& gt = validation.ground_truth[m.ground_truth];
    if (gt.is_ood()) continue;
    det_index.push_back(m.detection);
    labels.push_back(gt.class_id);
  }
  if (det_index.empty()) throw ConfigError("no validation detection matches an ID object");

  const auto n = static_cast<Eigen::Index>(det_index.size());
  Eigen::MatrixXd logits(n, models.num_classes);
  Eigen::MatrixXd embeddings(n, models.embedding_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = validation.detections[det_index[static_cast<std::size_t>(i)]];
    for (int c = 0; c < models.num_classes; ++c) logits(i, c) = d.logits[static_cast<std::size_t>(c)];
    for (int j = 0; j < models.embedding_dim; ++j) {
      embeddings(i, j) = d.embedding[static_cast<std::size_t>(j)];
    }
  }

  const auto model_fit = learn_temperature(logits, labels, options.search);
  Eigen::MatrixXd gmm_vectors = per_class_loglik_batch(embeddings, models.single);
  if (options.use_class_priors) {
    gmm_vectors.rowwise() += class_log_priors(models.single).transpose();
  }
  const auto gmm_fit = learn_temperature(gmm_vectors, labels, options.search);

  CalibrationArtifacts out;
  out.profile.t_model = model_fit.temperature;
  out.profile.t_gmm = gmm_fit.temperature;
  out.profile.prune_threshold = options.prune_threshold;
  out.profile.mode = Mode::kPrunedTemp;
  out.profile.use_class_priors = options.use_class_priors;
  out.nll_model_before = model_fit.nll_at_one;
  out.nll_model_after = model_fit.nll;
  out.nll_gmm_before = gmm_fit.nll_at_one;
  out.nll_gmm_after = gmm_fit.nll;
  out.validation_matches = det_index.size();
  out.match_floor = options.match_floor;

  std::vector<double> raw_conf(det_index.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    raw_conf[static_cast<std::size_t>(i)] = score_softmax_family(logits.row(i).transpose(), 1.0).conf;
  }

  const auto matrix = out.mode_matrix();
  for (const auto& mode : matrix.modes) {
    ScoringContext ctx{models.single, models.multi, mode.t_model, mode.t_gmm,
                       options.use_class_priors};
    const auto bundles = score_batch(logits, embeddings, ctx);
    std::vector<std::size_t> kept;
    if (mode.prune) {
      kept = prune(raw_conf, mode.prune_threshold);
    } else {
      kept.resize(bundles.size());
      for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
    }
    if (kept.empty()) {
      throw ConfigError("every validation detection is pruned in mode " +
                        std::string(to_string(mode.mode)));
    }
    std::vector<double> soft, ent;
    soft.reserve(kept.size());
    ent.reserve(kept.size());
    for (auto i : kept) {
      soft.push_back(bundles[i].softmax_conf);
      ent.push_back(bundles[i].gmm_posterior_entropy);
    }
    out.modes.push_back({mode.mode, select_joint_thresholds(soft, ent, options.policy),
                         ValidationReference(soft, ent)});
  }
  return out;
}

}  // namespace osgate
