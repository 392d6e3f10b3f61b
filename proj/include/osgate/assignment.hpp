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

// Prediction-to-ground-truth matching: IoU, an exact Hungarian solver and the
// per-image matcher used to label embeddings and detections.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osgate/types.hpp"

namespace osgate {

// Intersection over union; 0 when the union is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

// Row-major cost matrix view.
struct CostMatrix {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Minimum-cost bipartite matching of size min(rows, cols). Rectangular inputs
// are padded internally with zero-cost dummy entries. Among equal-cost optimal
// assignments the lexicographically smallest row-major pairing is returned.
// Pairs are sorted by row. Throws ArgumentError on non-finite costs.
std::vector<std::pair<std::size_t, std::size_t>> hungarian_assign(const CostMatrix& cost);
std::vector<std::pair<std::size_t, std::size_t>> hungarian_assign(std::span<const double> cost,
                                                                  std::size_t rows,
                                                                  std::size_t cols);

struct MatchPair {
  std::size_t detection = 0;
  std::size_t ground_truth = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // sorted by detection index
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_ground_truth;
};

inline constexpr double kDefaultMatchFloor = 0.5;

// Hungarian assignment on cost 1 - IoU; pairs with IoU below match_floor are
// demoted to unmatched. Indices are positions within the given spans.
MatchResult match_image(std::span<const BoundingBox> detections,
                        std::span<const BoundingBox> ground_truth,
                        double match_floor = kDefaultMatchFloor);

// Detections and ground truth of one image, as indices into a Dataset.
struct ImageGroup {
  std::string image_id;
  std::vector<std::size_t> detections;
  std::vector<std::size_t> ground_truth;
};

// Groups records by image id in first-appearance order (detections, then
// ground truth).
std::vector<ImageGroup> group_by_image(const Dataset& dataset);

// One matched (detection, ground truth) pair in dataset coordinates.
struct DatasetMatch {
  std::size_t detection = 0;
  std::size_t ground_truth = 0;
  double iou = 0.0;
};

// Runs match_image for every image (in parallel) and returns all pairs in
// image order. Optionally reports which detections stayed unmatched.
std::vector<DatasetMatch> match_dataset(const Dataset& dataset, double match_floor,
                                        std::vector<std::size_t>* unmatched_detections = nullptr);

struct LabeledEmbedding {
  std::vector<float> embedding;
  int class_id = 0;
  std::string source_image;
  std::size_t detection_index = 0;
};

struct CollectionSummary {
  std::vector<std::size_t> per_class_counts;
  std::size_t matched_pairs = 0;      // including pairs on OOD ground truth
  std::size_t unmatched_detections = 0;
  std::vector<int> classes_without_matches;
};

// One labeled embedding per detection matched to an in-distribution ground
// truth box. Detections matched to OOD (sentinel) boxes and unmatched
// detections are dropped.
std::vector<LabeledEmbedding> collect_labeled_embeddings(const Dataset& dataset,
                                                         double match_floor = kDefaultMatchFloor,
                                                         CollectionSummary* summary = nullptr);

}  // namespace osgate
