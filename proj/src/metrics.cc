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

#include "osgate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <utility>

#include "osgate/assignment.hpp"
#include "osgate/error.hpp"
#include "osgate/parallel.hpp"

namespace osgate {

namespace {

void check_scores(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty()) throw UndefinedMetricError("no in-distribution scores");
  if (ood_scores.empty()) throw UndefinedMetricError("no out-of-distribution scores");
  for (auto s : {id_scores, ood_scores}) {
    for (double v : s) {
      if (std::isnan(v)) throw ArgumentError("NaN score");
    }
  }
}

// (score, is_id) sorted ascending by score.
std::vector<std::pair<double, bool>> pooled(std::span<const double> id_scores,
                                            std::span<const double> ood_scores) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(id_scores.size() + ood_scores.size());
  for (double v : id_scores) all.emplace_back(v, true);
  for (double v : ood_scores) all.emplace_back(v, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return all;
}

}  // namespace

double auroc_from_counts(std::uint64_t twice_u, std::size_t n_id, std::size_t n_ood) {
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(n_id) * static_cast<double>(n_ood));
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  check_scores(id_scores, ood_scores);
  const auto all = pooled(id_scores, ood_scores);
  std::uint64_t twice_u = 0;
  std::uint64_t ood_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t ids = 0;
    std::uint64_t oods = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? ids : oods) += 1;
      ++j;
    }
    twice_u += ids * (2 * ood_below + oods);
    ood_below += oods;
    i = j;
  }
  return auroc_from_counts(twice_u, id_scores.size(), ood_scores.size());
}

RocCurve roc_curve(std::span<const double> id_scores, std::span<const double> ood_scores) {
  check_scores(id_scores, ood_scores);
  auto all = pooled(id_scores, ood_scores);
  std::reverse(all.begin(), all.end());
  const double n = static_cast<double>(id_scores.size());
  const double m = static_cast<double>(ood_scores.size());

  RocCurve curve;
  curve.tpr.push_back(0.0);
  curve.fpr.push_back(0.0);
  std::uint64_t ids = 0;
  std::uint64_t oods = 0;
  std::uint64_t twice_area = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? a : b) += 1;
      ++j;
    }
    twice_area += b * (2 * ids + a);
    ids += a;
    oods += b;
    curve.thresholds.push_back(all[i].first);
    curve.tpr.push_back(static_cast<double>(ids) / n);
    curve.fpr.push_back(static_cast<double>(oods) / m);
    i = j;
  }
  curve.auroc = auroc_from_counts(twice_area, id_scores.size(), ood_scores.size());
  return curve;
}

std::vector<OsrPoint> tpr_at_osr(std::span<const double> id_scores,
                                 std::span<const double> ood_scores,
                                 std::span<const double> levels) {
  check_scores(id_scores, ood_scores);
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(ood.begin(), ood.end(), std::greater<>());
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::sort(id.begin(), id.end());
  const auto m = static_cast<double>(ood.size());

  std::vector<OsrPoint> out;
  for (double level : levels) {
    if (!(level >= 0.0 && level <= 1.0)) throw ArgumentError("OSR level must be in [0, 1]");
    // The epsilon absorbs products such as 0.1 * 30 = 3.0000000000000004.
    const auto allowed = static_cast<std::size_t>(std::floor(level * m + 1e-9));
    double threshold = std::nextafter(ood.front(), std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < ood.size();) {
      std::size_t j = i;
      while (j < ood.size() && ood[j] == ood[i]) ++j;
      if (j > allowed) break;  // j = #{ood >= ood[i]}
      threshold = ood[i];
      i = j;
    }
    const auto below = std::lower_bound(id.begin(), id.end(), threshold) - id.begin();
    const double accepted = static_cast<double>(id.size()) - static_cast<double>(below);
    out.push_back({level, threshold, accepted / static_cast<double>(id.size())});
  }
  return out;
}

std::string_view to_string(OodLabel label) {
  switch (label) {
    case OodLabel::kIdMatched: return "id";
    case OodLabel::kOodMatched: return "ood";
    case OodLabel::kBackground: return "background";
  }
  return "background";
}

std::vector<OodLabel> label_detections(const Dataset& dataset, double match_floor) {
  std::vector<OodLabel> labels(dataset.detections.size(), OodLabel::kBackground);
  for (const auto& m : match_dataset(dataset, match_floor)) {
    labels[m.detection] = dataset.ground_truth[m.ground_truth].is_ood() ? OodLabel::kOodMatched
                                                                        : OodLabel::kIdMatched;
  }
  return labels;
}

ProtocolAuroc auroc_protocols(std::span<const OodLabel> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw ArgumentError("labels and scores differ in length");
  std::vector<double> id, ood, background;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    switch (labels[i]) {
      case OodLabel::kIdMatched: id.push_back(scores[i]); break;
      case OodLabel::kOodMatched: ood.push_back(scores[i]); break;
      case OodLabel::kBackground: background.push_back(scores[i]); break;
    }
  }
  ProtocolAuroc out;
  if (id.empty()) {
    out.auroc_reason = "no detection matched an in-distribution object";
    out.auroc_bd_reason = out.auroc_reason;
    return out;
  }
  if (ood.empty()) {
    out.auroc_reason = "no detection matched an out-of-distribution object";
  } else {
    out.auroc = auroc(id, ood);
  }
  std::vector<double> negatives = ood;
  negatives.insert(negatives.end(), background.begin(), background.end());
  if (negatives.empty()) {
    out.auroc_bd_reason = "no out-of-distribution or background detections";
  } else {
    out.auroc_bd = auroc(id, negatives);
  }
  return out;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

namespace {

struct ClassIndex {
  std::vector<const MapDetection*> detections;  // sorted by confidence, then record
  std::unordered_map<std::size_t, std::vector<const MapGroundTruth*>> gt_by_image;
  std::size_t gt_count = 0;
};

ClassIndex index_class(std::span<const MapDetection> detections,
                       std::span<const MapGroundTruth> ground_truth, int class_id) {
  ClassIndex idx;
  for (const auto& d : detections) {
    if (std::isnan(d.confidence)) throw ArgumentError("NaN detection confidence");
    if (d.class_id == class_id) idx.detections.push_back(&d);
  }
  std::sort(idx.detections.begin(), idx.detections.end(), [](const auto* a, const auto* b) {
    if (a->confidence != b->confidence) return a->confidence > b->confidence;
    return a->record < b->record;
  });
  for (const auto& g : ground_truth) {
    if (g.class_id != class_id) continue;
    idx.gt_by_image[g.image].push_back(&g);
    ++idx.gt_count;
  }
  return idx;
}

double class_ap(const ClassIndex& idx, double iou_threshold) {
  std::unordered_map<const MapGroundTruth*, bool> taken;
  const auto npos = static_cast<double>(idx.gt_count);
  std::vector<double> precision, recall;
  precision.reserve(idx.detections.size());
  recall.reserve(idx.detections.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < idx.detections.size(); ++i) {
    const auto* d = idx.detections[i];
    const MapGroundTruth* best = nullptr;
    double best_iou = -1.0;
    if (auto it = idx.gt_by_image.find(d->image); it != idx.gt_by_image.end()) {
      for (const auto* g : it->second) {
        if (taken[g]) continue;
        const double v = iou(d->box, g->box);
        if (v >= iou_threshold && v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
    }
    if (best != nullptr) {
      taken[best] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / npos);
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), level);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

}  // namespace

double average_precision(std::span<const MapDetection> detections,
                         std::span<const MapGroundTruth> ground_truth, int class_id,
                         double iou_threshold) {
  const auto idx = index_class(detections, ground_truth, class_id);
  if (idx.gt_count == 0) {
    throw UndefinedMetricError("class " + std::to_string(class_id) + " has no ground truth");
  }
  return class_ap(idx, iou_threshold);
}

MapResult map_50_95(std::span<const MapDetection> detections,
                    std::span<const MapGroundTruth> ground_truth, int num_classes) {
  if (num_classes < 1) throw ArgumentError("num_classes must be positive");
  const auto thresholds = coco_iou_thresholds();
  const auto t_count = static_cast<int>(thresholds.size());

  std::vector<ClassIndex> classes;
  classes.reserve(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) classes.push_back(index_class(detections, ground_truth, c));

  std::vector<double> ap(static_cast<std::size_t>(num_classes * t_count), 0.0);
  const int tasks = num_classes * t_count;
#pragma omp parallel for schedule(dynamic) num_threads(thread_cap())
  for (int task = 0; task < tasks; ++task) {
    const auto& idx = classes[static_cast<std::size_t>(task / t_count)];
    if (idx.gt_count == 0) continue;
    ap[static_cast<std::size_t>(task)] = class_ap(idx, thresholds[static_cast<std::size_t>(task % t_count)]);
  }

  MapResult result;
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (classes[static_cast<std::size_t>(c)].gt_count == 0) {
      result.per_class.emplace_back();
      result.absent_classes.push_back(c);
      continue;
    }
    double sum = 0.0;
    for (int t = 0; t < t_count; ++t) sum += ap[static_cast<std::size_t>(c * t_count + t)];
    const double class_mean = sum / t_count;
    result.per_class.emplace_back(class_mean);
    total += class_mean;
    ++present;
  }
  if (present > 0) result.map = total / present;
  return result;
}

}  // namespace osgate
