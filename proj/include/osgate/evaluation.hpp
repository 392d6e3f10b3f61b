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

// Per-mode evaluation: applies a mode's pruning and temperatures, ranks
// detections by each requested score, and assembles AUROC (both protocols),
// TPR at fixed OSR levels and closed/open-set mAP into self-describing rows.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osgate/calibration.hpp"
#include "osgate/metrics.hpp"
#include "osgate/scoring.hpp"
#include "osgate/types.hpp"

namespace osgate {

// Which confidence ranks detections for mAP.
enum class ConfidenceSource { kSoftmax, kDetector };

std::string_view to_string(ConfidenceSource source);
ConfidenceSource parse_confidence_source(std::string_view name);

struct EvaluationOptions {
  std::vector<Mode> modes{kAllModes.begin(), kAllModes.end()};
  std::vector<ScoreKind> scores{std::begin(kDefaultScoreKinds), std::end(kDefaultScoreKinds)};
  double match_floor = 0.5;
  std::vector<double> osr_levels{std::begin(kDefaultOsrLevels), std::end(kDefaultOsrLevels)};
  ConfidenceSource confidence = ConfidenceSource::kSoftmax;
  // ROC points kept per row in the JSON report; 0 keeps all.
  std::size_t roc_points = 201;
};

struct DetectionCounts {
  std::size_t total = 0;
  std::size_t kept = 0;  // after pruning
  std::size_t id = 0;    // kept and matched to ID ground truth
  std::size_t ood = 0;   // kept and matched to sentinel ground truth
  std::size_t background = 0;
};

// Fraction of kept detections the joint rule accepts as ID, per label.
struct JointRuleRates {
  std::optional<double> id_accept;
  std::optional<double> ood_accept;
  std::optional<double> background_accept;
};

struct EvaluationReport {
  Mode mode = Mode::kRaw;
  ScoreKind score = ScoreKind::kSoftmaxConf;

  std::optional<double> auroc;
  std::optional<double> auroc_bd;
  std::string auroc_reason;
  std::string auroc_bd_reason;
  std::vector<OsrPoint> tpr_at_osr;  // empty when undefined
  std::string tpr_reason;
  std::optional<double> cs_map;
  std::optional<double> os_map;
  std::string cs_map_reason;
  std::string os_map_reason;
  std::vector<int> cs_map_absent_classes;
  std::vector<int> os_map_absent_classes;
  std::optional<JointRuleRates> joint_rule;  // joint score only
  RocCurve roc;                               // ID-matched vs OOD-matched

  DetectionCounts open_counts;
  DetectionCounts closed_counts;

  // Configuration echo.
  ModeConfig mode_config;
  JointThresholds thresholds;
  double match_floor = 0.5;
  bool use_class_priors = true;
  ConfidenceSource confidence = ConfidenceSource::kSoftmax;
};

// One report per requested score for a single mode. Throws ValidationError if
// either dataset disagrees with the model dimensions and ConfigError if the
// mode was not calibrated.
std::vector<EvaluationReport> evaluate_mode(const Dataset& closed_test, const Dataset& open_test,
                                            const ModelSet& models,
                                            const CalibrationArtifacts& calibration, Mode mode,
                                            const EvaluationOptions& options = {});

// Rows ordered by mode, then by score, as requested.
std::vector<EvaluationReport> evaluate(const Dataset& closed_test, const Dataset& open_test,
                                       const ModelSet& models,
                                       const CalibrationArtifacts& calibration,
                                       const EvaluationOptions& options = {});

// CSV header: fixed columns, with one tpr_at_<level> column per OSR level.
std::vector<std::string> report_csv_columns(std::span<const double> osr_levels);

// Absent values are empty CSV cells and JSON nulls with a "<metric>_reason".
std::string reports_to_json(std::span<const EvaluationReport> reports,
                            const EvaluationOptions& options,
                            const CalibrationArtifacts& calibration);
std::string reports_to_csv(std::span<const EvaluationReport> reports,
                           std::span<const double> osr_levels);

// Writes report.json and report.csv into dir.
void write_reports(std::span<const EvaluationReport> reports, const EvaluationOptions& options,
                   const CalibrationArtifacts& calibration, const std::filesystem::path& dir);

}  // namespace osgate
