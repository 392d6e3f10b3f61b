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

// Open-set detection metrics: AUROC (rank statistic and ROC curve), TPR at
// fixed open-set rejection levels, detection labeling for the two AUROC
// protocols, and COCO-style mAP over IoU 0.50:0.95.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osgate/types.hpp"

namespace osgate {

// P(id > ood) + 0.5 P(id == ood), computed from rank sums over tie groups.
// Exact under ties. Throws UndefinedMetricError when either set is empty.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

// 2U / (2 n m): converts the doubled Mann-Whitney count to a rate. Shared by
// every AUROC computation so equal counts give bitwise-equal results.
double auroc_from_counts(std::uint64_t twice_u, std::size_t n_id, std::size_t n_ood);

struct RocCurve {
  std::vector<double> thresholds;  // descending, unique; accept when score >= t
  std::vector<double> tpr;         // starts at 0 and ends at 1
  std::vector<double> fpr;         // starts at 0 and ends at 1
  double auroc = 0.0;
};

// Points sit before the first threshold (0, 0) and after each threshold. The
// trapezoidal area under the points equals auroc().
RocCurve roc_curve(std::span<const double> id_scores, std::span<const double> ood_scores);

inline constexpr double kDefaultOsrLevels[] = {0.05, 0.10, 0.20};

struct OsrPoint {
  double level = 0.0;
  double threshold = 0.0;  // accept scores >= threshold
  double tpr = 0.0;
};

// For each level a, the smallest OOD score t with #{ood >= t} <= a * m; the
// result is #{id >= t} / n. If no OOD score qualifies, only ID scores above
// every OOD score are accepted. Non-decreasing in a.
std::vector<OsrPoint> tpr_at_osr(std::span<const double> id_scores,
                                 std::span<const double> ood_scores,
                                 std::span<const double> levels = kDefaultOsrLevels);

enum class OodLabel { kIdMatched, kOodMatched, kBackground };

std::string_view to_string(OodLabel label);

// Joint assignment of each image's detections against all of its ground truth
// (ID and sentinel). One label per detection, in dataset order.
std::vector<OodLabel> label_detections(const Dataset& dataset, double match_floor = 0.5);

struct ProtocolAuroc {
  std::optional<double> auroc;     // ID-matched vs OOD-matched
  std::optional<double> auroc_bd;  // ID-matched vs OOD-matched plus background
  std::string auroc_reason;        // set when auroc is absent
  std::string auroc_bd_reason;
};

// Both AUROC protocols for one score vector aligned with labels. An undefined
// statistic is reported as absent with a reason instead of throwing.
ProtocolAuroc auroc_protocols(std::span<const OodLabel> labels, std::span<const double> scores);

struct MapDetection {
  std::size_t image = 0;
  BoundingBox box;
  int class_id = 0;
  double confidence = 0.0;
  std::size_t record = 0;  // breaks confidence ties, lower first
};

struct MapGroundTruth {
  std::size_t image = 0;
  BoundingBox box;
  int class_id = 0;
};

// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_iou_thresholds();

struct MapResult {
  std::optional<double> map;  // absent when no class has ground truth
  // Per class: mean AP over the IoU thresholds, absent for classes without GT.
  std::vector<std::optional<double>> per_class;
  std::vector<int> absent_classes;
};

// Mean over classes with ground truth and over IoU thresholds of 101-point
// interpolated AP. Detections are matched greedily in descending confidence
// order to the unmatched ground truth of the same image and class with the
// highest IoU (>= threshold). Classes outside [0, num_classes) are ignored.
MapResult map_50_95(std::span<const MapDetection> detections,
                    std::span<const MapGroundTruth> ground_truth, int num_classes);

// AP for one class at one IoU threshold; exposed for testing.
double average_precision(std::span<const MapDetection> detections,
                         std::span<const MapGroundTruth> ground_truth, int class_id,
                         double iou_threshold);

}  // namespace osgate
