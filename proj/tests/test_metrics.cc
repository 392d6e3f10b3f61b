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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "osgate/assignment.hpp"
#include "osgate/error.hpp"
#include "osgate/metrics.hpp"
#include "osgate/synthgen.hpp"
#include "test_support.hpp"

namespace osgate {
namespace {

using testing::box;
using testing::detection;
using testing::manifest;
using testing::random_scores;

// Fraction of ID scores at or above the smallest threshold t drawn from the
// pooled scores (plus +inf) with #(ood >= t) <= floor(alpha * m).
double brute_tpr(const std::vector<double>& id, const std::vector<double>& ood, double alpha) {
  // Thresholds are drawn from the OOD scores, plus the next double above all of them.
  std::vector<double> candidates = ood;
  candidates.push_back(std::nextafter(*std::max_element(ood.begin(), ood.end()),
                                      std::numeric_limits<double>::infinity()));
  const auto allowed = static_cast<std::size_t>(std::floor(alpha * ood.size() + 1e-9));
  double best = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    const auto above = std::count_if(ood.begin(), ood.end(), [&](double v) { return v >= t; });
    if (static_cast<std::size_t>(above) <= allowed) best = std::min(best, t);
  }
  const auto hits = std::count_if(id.begin(), id.end(), [&](double v) { return v >= best; });
  return static_cast<double>(hits) / static_cast<double>(id.size());
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.2, 0.1}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.8}, std::vector<double>{0.8}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.6, 0.1}), 0.75);
  EXPECT_THROW(auroc(std::vector<double>{}, std::vector<double>{1.0}), UndefinedMetricError);
  EXPECT_THROW(auroc(std::vector<double>{1.0}, std::vector<double>{}), UndefinedMetricError);
  EXPECT_THROW(auroc(std::vector<double>{NAN}, std::vector<double>{1.0}), ArgumentError);
}

TEST(Auroc, OracleExamples) {
  EXPECT_EQ(oracle_auroc(std::vector<double>{1}, std::vector<double>{0}), 1.0);
  EXPECT_EQ(oracle_auroc(std::vector<double>{0}, std::vector<double>{1}), 0.0);
  EXPECT_THROW(oracle_auroc(std::vector<double>(1001), std::vector<double>(1000)), ArgumentError);
}

TEST(Auroc, EqualsPairCountingExactly) {
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<std::size_t> size(1, 300);
  for (int rep = 0; rep < 300; ++rep) {
    const int levels = rep % 3 == 0 ? 0 : 3 + rep % 5;
    const auto id = random_scores(rng, size(rng), levels);
    const auto ood = random_scores(rng, size(rng), levels);
    ASSERT_EQ(auroc(id, ood), oracle_auroc(id, ood)) << "rep " << rep;
  }
}

TEST(Auroc, RankSymmetryAndMonotoneInvariance) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const auto id = random_scores(rng, 50 + rep, rep % 2 ? 6 : 0);
    const auto ood = random_scores(rng, 80, rep % 2 ? 6 : 0);
    EXPECT_EQ(auroc(id, ood) + auroc(ood, id), 1.0);
    std::vector<double> tid, tood;
    for (double v : id) tid.push_back(std::exp(3.0 * v) - 7.0);
    for (double v : ood) tood.push_back(std::exp(3.0 * v) - 7.0);
    EXPECT_EQ(auroc(tid, tood), auroc(id, ood));
  }
}

TEST(RocCurve, EndpointsMonotoneAndArea) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    const auto id = random_scores(rng, 40 + rep, rep % 2 ? 5 : 0);
    const auto ood = random_scores(rng, 60, rep % 2 ? 5 : 0);
    const auto c = roc_curve(id, ood);
    ASSERT_EQ(c.tpr.front(), 0.0);
    ASSERT_EQ(c.fpr.front(), 0.0);
    ASSERT_EQ(c.tpr.back(), 1.0);
    ASSERT_EQ(c.fpr.back(), 1.0);
    double area = 0.0;
    for (std::size_t i = 1; i < c.tpr.size(); ++i) {
      EXPECT_GE(c.tpr[i], c.tpr[i - 1]);
      EXPECT_GE(c.fpr[i], c.fpr[i - 1]);
      area += (c.fpr[i] - c.fpr[i - 1]) * (c.tpr[i] + c.tpr[i - 1]) / 2.0;
    }
    EXPECT_NEAR(area, c.auroc, 1e-12);
    EXPECT_EQ(c.auroc, auroc(id, ood));
    EXPECT_TRUE(std::is_sorted(c.thresholds.rbegin(), c.thresholds.rend()));
  }
}

TEST(TprAtOsr, Examples) {
  const std::vector<double> id = {0.9, 0.8, 0.7, 0.6};
  std::vector<double> ood = {0.65};
  for (int i = 0; i < 19; ++i) ood.push_back(0.5 - 0.02 * i);
  const auto pts = tpr_at_osr(id, ood, std::vector<double>{0.05});
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_DOUBLE_EQ(pts[0].tpr, 0.75);

  const auto sep = tpr_at_osr(std::vector<double>{5, 6, 7}, std::vector<double>{1, 2, 3},
                              kDefaultOsrLevels);
  for (const auto& p : sep) EXPECT_EQ(p.tpr, 1.0);
}

TEST(TprAtOsr, IdenticalDistributionsGiveLevel) {
  std::mt19937_64 rng(10);
  const auto id = random_scores(rng, 10000, 0);
  const auto ood = random_scores(rng, 10000, 0);
  for (const auto& p : tpr_at_osr(id, ood, kDefaultOsrLevels)) {
    EXPECT_NEAR(p.tpr, p.level, 0.02);
  }
}

TEST(TprAtOsr, MatchesBruteForceAndIsMonotone) {
  std::mt19937_64 rng(11);
  const std::vector<double> levels = {0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
  for (int rep = 0; rep < 200; ++rep) {
    const auto id = random_scores(rng, 10 + rep, rep % 2 ? 7 : 0);
    const auto ood = random_scores(rng, 7 + 3 * rep, rep % 2 ? 7 : 0);
    const auto pts = tpr_at_osr(id, ood, levels);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      EXPECT_EQ(pts[i].tpr, brute_tpr(id, ood, levels[i])) << "rep " << rep << " level " << levels[i];
      const auto above = std::count_if(ood.begin(), ood.end(),
                                       [&](double v) { return v >= pts[i].threshold; });
      EXPECT_LE(static_cast<double>(above), levels[i] * ood.size() + 1e-9);
      if (i > 0) EXPECT_GE(pts[i].tpr, pts[i - 1].tpr);
    }
  }
}

TEST(LabelDetections, Examples) {
  Dataset ds;
  ds.manifest = manifest(2, 1, Split::kOpenTest);
  ds.ground_truth.push_back({"a", box(0, 0, 10, 10), 1});
  ds.ground_truth.push_back({"a", box(50, 50, 60, 60), kOodClassId});
  ds.detections.push_back(detection("a", box(0, 0, 10, 10), {0, 0}, {0}));
  ds.detections.push_back(detection("a", box(50, 50, 60, 60), {0, 0}, {0}));
  ds.detections.push_back(detection("a", box(200, 0, 210, 10), {0, 0}, {0}));
  ds.detections.push_back(detection("b", box(0, 0, 10, 10), {0, 0}, {0}));
  const auto labels = label_detections(ds, 0.5);
  EXPECT_EQ(labels, (std::vector<OodLabel>{OodLabel::kIdMatched, OodLabel::kOodMatched,
                                           OodLabel::kBackground, OodLabel::kBackground}));
}

TEST(AurocProtocols, Examples) {
  using L = OodLabel;
  const std::vector<L> no_bg = {L::kIdMatched, L::kIdMatched, L::kOodMatched, L::kOodMatched};
  const std::vector<double> s1 = {0.9, 0.4, 0.6, 0.1};
  auto p = auroc_protocols(no_bg, s1);
  EXPECT_EQ(*p.auroc, 0.75);
  EXPECT_EQ(*p.auroc_bd, *p.auroc);

  const std::vector<L> with_bg = {L::kIdMatched, L::kOodMatched, L::kBackground, L::kBackground};
  const std::vector<double> s2 = {0.9, 0.5, 0.1, 0.2};
  p = auroc_protocols(with_bg, s2);
  EXPECT_EQ(*p.auroc, 1.0);
  EXPECT_EQ(*p.auroc_bd, 1.0);

  const std::vector<L> id_only = {L::kIdMatched, L::kBackground};
  p = auroc_protocols(id_only, std::vector<double>{1.0, 0.0});
  EXPECT_FALSE(p.auroc.has_value());
  EXPECT_FALSE(p.auroc_reason.empty());
  EXPECT_EQ(*p.auroc_bd, 1.0);
}

TEST(AurocProtocols, LowBackgroundNeverLowersBdAuroc) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<OodLabel> labels;
    std::vector<double> scores;
    const auto id = random_scores(rng, 30, rep % 2 ? 5 : 0);
    const auto ood = random_scores(rng, 20, rep % 2 ? 5 : 0);
    for (double v : id) labels.push_back(OodLabel::kIdMatched), scores.push_back(v);
    for (double v : ood) labels.push_back(OodLabel::kOodMatched), scores.push_back(v);
    const double lowest = *std::min_element(scores.begin(), scores.end());
    for (int i = 0; i < 15; ++i) {
      labels.push_back(OodLabel::kBackground);
      scores.push_back(lowest - 1.0 - i);
    }
    const auto p = auroc_protocols(labels, scores);
    EXPECT_GE(*p.auroc_bd, *p.auroc);
  }
}

// Direct COCO-style AP for one class and threshold, written independently.
double oracle_ap(const std::vector<MapDetection>& dets, const std::vector<MapGroundTruth>& gts,
                 int cls, double t) {
  std::vector<MapDetection> d;
  for (const auto& x : dets) {
    if (x.class_id == cls) d.push_back(x);
  }
  std::stable_sort(d.begin(), d.end(), [](const auto& a, const auto& b) {
    return a.confidence > b.confidence || (a.confidence == b.confidence && a.record < b.record);
  });
  std::vector<MapGroundTruth> g;
  for (const auto& x : gts) {
    if (x.class_id == cls) g.push_back(x);
  }
  std::vector<bool> used(g.size());
  std::vector<int> tp;
  for (const auto& x : d) {
    int best = -1;
    double best_iou = t;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[j] || g[j].image != x.image) continue;
      const double v = iou(x.box, g[j].box);
      if (v >= best_iou && (best < 0 || v > best_iou)) {
        best = static_cast<int>(j);
        best_iou = v;
      }
    }
    tp.push_back(best >= 0);
    if (best >= 0) used[static_cast<std::size_t>(best)] = true;
  }
  std::vector<double> prec, rec;
  int cum = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    cum += tp[i];
    prec.push_back(cum / static_cast<double>(i + 1));
    rec.push_back(cum / static_cast<double>(g.size()));
  }
  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    double best = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (rec[i] >= r / 100.0) best = std::max(best, prec[i]);
    }
    sum += best;
  }
  return sum / 101.0;
}

double oracle_map(const std::vector<MapDetection>& dets, const std::vector<MapGroundTruth>& gts,
                  int classes) {
  double total = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    if (std::none_of(gts.begin(), gts.end(), [&](const auto& g) { return g.class_id == c; })) {
      continue;
    }
    double s = 0.0;
    for (double t : coco_iou_thresholds()) s += oracle_ap(dets, gts, c, t);
    total += s / 10.0;
    ++present;
  }
  return total / present;
}

TEST(Map, Examples) {
  const std::vector<MapGroundTruth> gt = {{0, box(0, 0, 10, 10), 0}};
  std::vector<MapDetection> dets = {{0, box(0, 0, 10, 10), 0, 0.9, 0}};
  EXPECT_DOUBLE_EQ(*map_50_95(dets, gt, 1).map, 1.0);

  dets = {{0, box(0, 0, 10, 6), 0, 0.9, 0}};  // IoU 0.6
  EXPECT_NEAR(*map_50_95(dets, gt, 1).map, 0.3, 1e-12);

  EXPECT_EQ(*map_50_95({}, gt, 1).map, 0.0);
  const auto thresholds = coco_iou_thresholds();
  ASSERT_EQ(thresholds.size(), 10u);
  EXPECT_EQ(thresholds.front(), 0.5);
  EXPECT_EQ(thresholds.back(), 0.95);
}

TEST(Map, AbsentClassesExcluded) {
  const std::vector<MapGroundTruth> gt = {{0, box(0, 0, 10, 10), 1}};
  const std::vector<MapDetection> dets = {{0, box(0, 0, 10, 10), 1, 0.9, 0},
                                          {0, box(0, 0, 10, 10), 0, 0.8, 1}};
  const auto r = map_50_95(dets, gt, 3);
  EXPECT_DOUBLE_EQ(*r.map, 1.0);
  EXPECT_EQ(r.absent_classes, (std::vector<int>{0, 2}));
  EXPECT_FALSE(r.per_class[0].has_value());
  EXPECT_FALSE(map_50_95(dets, {}, 3).map.has_value());
  EXPECT_THROW(average_precision(dets, gt, 0, 0.5), UndefinedMetricError);
}

std::pair<std::vector<MapDetection>, std::vector<MapGroundTruth>> random_scene(
    std::mt19937_64& rng, int classes) {
  std::uniform_real_distribution<float> pos(0.0f, 200.0f);
  std::uniform_real_distribution<float> jitter(-4.0f, 4.0f);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::uniform_int_distribution<int> conf(0, 9);
  std::vector<MapDetection> dets;
  std::vector<MapGroundTruth> gts;
  for (std::size_t img = 0; img < 6; ++img) {
    for (int j = 0; j < 5; ++j) {
      const float x = pos(rng), y = pos(rng);
      const BoundingBox b = box(x, y, x + 20, y + 20);
      const int c = cls(rng);
      gts.push_back({img, b, c});
      for (int k = 0; k < 2; ++k) {
        const BoundingBox d = box(x + jitter(rng), y + jitter(rng), x + 20 + jitter(rng),
                                  y + 20 + jitter(rng));
        // Confidences on a coarse grid so ties exercise the record tie-break.
        dets.push_back({img, d, k == 0 ? c : cls(rng), conf(rng) / 10.0, dets.size()});
      }
    }
    const float x = pos(rng), y = pos(rng);
    dets.push_back({img, box(x, y, x + 15, y + 15), cls(rng), conf(rng) / 10.0, dets.size()});
  }
  return {dets, gts};
}

TEST(Map, MatchesOracleOnRandomScenes) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const int classes = 1 + rep % 3;
    auto [dets, gts] = random_scene(rng, classes);
    const auto r = map_50_95(dets, gts, classes);
    ASSERT_TRUE(r.map.has_value());
    EXPECT_NEAR(*r.map, oracle_map(dets, gts, classes), 1e-12) << "rep " << rep;
  }
}

TEST(Map, InvariantToInputOrder) {
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 10; ++rep) {
    auto [dets, gts] = random_scene(rng, 2);
    const auto base = map_50_95(dets, gts, 2);
    std::shuffle(dets.begin(), dets.end(), rng);
    std::shuffle(gts.begin(), gts.end(), rng);
    const auto shuffled = map_50_95(dets, gts, 2);
    EXPECT_EQ(*base.map, *shuffled.map);
  }
}

TEST(Map, DroppingUnmatchedDetectionsLeavesMapUnchanged) {
  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 10; ++rep) {
    auto [dets, gts] = random_scene(rng, 2);
    // Low-confidence detections far from every object, ranked below all others.
    std::vector<MapDetection> with_noise = dets;
    for (std::size_t img = 0; img < 6; ++img) {
      for (int k = 0; k < 4; ++k) {
        with_noise.push_back({img, box(1000.0f + 30 * k, 1000, 1020.0f + 30 * k, 1020),
                              k % 2, 0.01 * k - 1.0, with_noise.size()});
      }
    }
    EXPECT_EQ(*map_50_95(with_noise, gts, 2).map, *map_50_95(dets, gts, 2).map);
  }
}

}  // namespace
}  // namespace osgate
