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

// Post-hoc calibration: temperature learning by validation NLL, softmax-score
// pruning, joint-threshold selection from in-distribution validation
// quantiles, and the four evaluation modes.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "osgate/parallel.hpp"
#include "osgate/scoring.hpp"
#include "osgate/types.hpp"

namespace osgate {

// Indices of detections whose untempered max softmax is >= threshold, in
// input order. Detections strictly below the threshold are dropped.
std::vector<std::size_t> prune(std::span<const double> raw_softmax_conf, double threshold = 0.2);

struct TemperatureSearch {
  double t_min = 1e-2;
  double t_max = 1e2;
  int grid_points = 200;  // log-spaced, endpoints included
  double tolerance = 1e-4;  // golden-section bracket width
};

std::vector<double> temperature_grid(const TemperatureSearch& search);

// Mean over rows of -log softmax(v_i / T)[label_i].
double temperature_nll(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                       std::span<const int> labels, double temperature);

struct TemperatureFit {
  double temperature = 1.0;
  double nll = 0.0;         // at the learned temperature
  double nll_at_one = 0.0;  // at T = 1, for before/after reporting
};

// Grid search over the log-spaced grid followed by golden-section refinement
// inside the bracket around the best grid point. The result never has higher
// NLL than any grid point. Throws ConfigError on empty input and
// ArgumentError on out-of-range labels.
TemperatureFit learn_temperature(const Eigen::Ref<const Eigen::MatrixXd>& vectors,
                                 std::span<const int> labels, const TemperatureSearch& search = {},
                                 ExecPolicy policy = ExecPolicy::kParallel);

// Inverted-ECDF quantile: the smallest sample v with F(v) >= q. For 100 values
// 0.01..1.00 and q = 0.05 this is 0.05.
double empirical_quantile(std::span<const double> values, double q);

// tau_soft = quantile(softmax_conf, soft_quantile),
// tau_gmm = quantile(H_gmm, gmm_quantile). Uses in-distribution validation
// detections only. Throws ArgumentError on empty input or quantiles outside (0,1).
JointThresholds select_joint_thresholds(std::span<const double> softmax_conf,
                                        std::span<const double> posterior_entropy,
                                        const ThresholdPolicy& policy = {});

struct ModeConfig {
  Mode mode = Mode::kRaw;
  bool prune = false;
  double prune_threshold = 0.2;
  double t_model = 1.0;
  double t_gmm = 1.0;
};

struct ModeMatrix {
  std::array<ModeConfig, 4> modes;
  const ModeConfig& at(Mode mode) const;
};

// Raw:(off,1,1) Pruned:(on,1,1) Temp:(off,T_model,T_gmm) PrunedTemp:(on,T_model,T_gmm).
ModeMatrix build_mode_matrix(double t_model = 1.0, double t_gmm = 1.0,
                             double prune_threshold = 0.2);

// Thresholds and fused-score reference for one mode.
struct ModeCalibration {
  Mode mode = Mode::kRaw;
  JointThresholds thresholds;
  ValidationReference reference;
};

struct CalibrationArtifacts {
  CalibrationProfile profile;
  double nll_model_before = 0.0;
  double nll_model_after = 0.0;
  double nll_gmm_before = 0.0;
  double nll_gmm_after = 0.0;
  std::size_t validation_matches = 0;
  double match_floor = 0.5;
  std::vector<ModeCalibration> modes;

  // Throws ConfigError if the mode was not calibrated.
  const ModeCalibration& at(Mode mode) const;
  ModeMatrix mode_matrix() const {
    return build_mode_matrix(profile.t_model, profile.t_gmm, profile.prune_threshold);
  }
};

struct CalibrationOptions {
  double prune_threshold = 0.2;
  ThresholdPolicy policy;
  double match_floor = 0.5;
  bool use_class_priors = true;
  TemperatureSearch search;
};

// Matches validation detections to ground truth, learns T_model on logits and
// T_gmm on prior-weighted GMM log-likelihoods against the matched labels, then
// selects joint thresholds and the fused-score reference for every mode.
// Throws ConfigError when no validation detection matches an ID object.
CalibrationArtifacts calibrate(const Dataset& validation, const ModelSet& models,
                               const CalibrationOptions& options = {});

}  // namespace osgate
