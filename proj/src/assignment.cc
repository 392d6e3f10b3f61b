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

#include "osgate/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "osgate/error.hpp"
#include "osgate/parallel.hpp"

namespace osgate {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min<double>(a.x_max, b.x_max) - std::max<double>(a.x_min, b.x_min);
  const double iy = std::min<double>(a.y_max, b.y_max) - std::max<double>(a.y_min, b.y_min);
  const double inter = (ix > 0.0 && iy > 0.0) ? ix * iy : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

// Square solver. Potentials follow the classic shortest-augmenting-path
// formulation: reduced cost a(i,j) - u(i) - v(j) >= 0, zero on matched edges.
class SquareHungarian {
 public:
  SquareHungarian(std::vector<double> costs, std::size_t n) : a_(std::move(costs)), n_(n) {
    double scale = 1.0;
    for (double c : a_) scale = std::max(scale, std::abs(c));
    eps_ = 1e-9 * scale;
  }

  std::vector<std::size_t> solve() {
    augment_all();
    refine_lexicographic();
    return col_of_row_;
  }

 private:
  double cost(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
  bool tight(std::size_t i, std::size_t j) const {
    return cost(i, j) - u_[i + 1] - v_[j + 1] <= eps_;
  }

  void augment_all() {
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = n_;
    u_.assign(n + 1, 0.0);
    v_.assign(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
      p[0] = i;
      std::size_t j0 = 0;
      std::fill(minv.begin(), minv.end(), inf);
      std::fill(used.begin(), used.end(), 0);
      do {
        used[j0] = 1;
        const std::size_t i0 = p[j0];
        double delta = inf;
        std::size_t j1 = 0;
        for (std::size_t j = 1; j <= n; ++j) {
          if (used[j]) continue;
          const double cur = cost(i0 - 1, j - 1) - u_[i0] - v_[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
        for (std::size_t j = 0; j <= n; ++j) {
          if (used[j]) {
            u_[p[j]] += delta;
            v_[j] -= delta;
          } else {
            minv[j] -= delta;
          }
        }
        j0 = j1;
      } while (p[j0] != 0);
      do {
        const std::size_t j1 = way[j0];
        p[j0] = p[j1];
        j0 = j1;
      } while (j0 != 0);
    }
    col_of_row_.assign(n, 0);
    row_of_col_.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) {
      col_of_row_[p[j] - 1] = j - 1;
      row_of_col_[j - 1] = p[j] - 1;
    }
  }

  // Every optimal assignment is a perfect matching on tight edges, so the
  // lexicographically smallest optimum is found greedily: fix rows in order,
  // moving each to the smallest tight column that still admits a perfect
  // matching of the remaining rows (an alternating cycle through that column).
  void refine_lexicographic() {
    locked_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t current = col_of_row_[i];
      visited_.assign(n_, 0);
      for (std::size_t c = 0; c < current; ++c) {
        if (locked_[c] || visited_[c] || !tight(i, c)) continue;
        visited_[c] = 1;
        if (reroute(row_of_col_[c], current)) {
          col_of_row_[i] = c;
          row_of_col_[c] = i;
          break;
        }
      }
      locked_[col_of_row_[i]] = 1;
    }
  }

  // Finds a tight alternating path from row r ending at column target.
  bool reroute(std::size_t r, std::size_t target) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (locked_[j] || visited_[j] || j == col_of_row_[r] || !tight(r, j)) continue;
      visited_[j] = 1;
      if (j == target || reroute(row_of_col_[j], target)) {
        col_of_row_[r] = j;
        row_of_col_[j] = r;
        return true;
      }
    }
    return false;
  }

  std::vector<double> a_;
  std::size_t n_;
  double eps_ = 0.0;
  std::vector<double> u_, v_;
  std::vector<std::size_t> col_of_row_, row_of_col_;
  std::vector<char> locked_, visited_;
};

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> hungarian_assign(const CostMatrix& cost) {
  if (cost.values.size() != cost.rows * cost.cols) {
    throw ArgumentError("cost matrix size does not match rows * cols");
  }
  for (double c : cost.values) {
    if (!std::isfinite(c)) throw ArgumentError("non-finite entry in cost matrix");
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (cost.rows == 0 || cost.cols == 0) return pairs;

  const std::size_t n = std::max(cost.rows, cost.cols);
  std::vector<double> square(n * n, 0.0);
  for (std::size_t r = 0; r < cost.rows; ++r) {
    for (std::size_t c = 0; c < cost.cols; ++c) square[r * n + c] = cost.at(r, c);
  }
  const auto col_of_row = SquareHungarian(std::move(square), n).solve();
  for (std::size_t r = 0; r < cost.rows; ++r) {
    if (col_of_row[r] < cost.cols) pairs.emplace_back(r, col_of_row[r]);
  }
  return pairs;
}

std::vector<std::pair<std::size_t, std::size_t>> hungarian_assign(std::span<const double> cost,
                                                                  std::size_t rows,
                                                                  std::size_t cols) {
  return hungarian_assign(CostMatrix{cost, rows, cols});
}

MatchResult match_image(std::span<const BoundingBox> detections,
                        std::span<const BoundingBox> ground_truth, double match_floor) {
  const std::size_t nd = detections.size();
  const std::size_t ng = ground_truth.size();
  std::vector<double> overlap(nd * ng);
  std::vector<double> cost(nd * ng);
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t g = 0; g < ng; ++g) {
      overlap[d * ng + g] = iou(detections[d], ground_truth[g]);
      cost[d * ng + g] = 1.0 - overlap[d * ng + g];
    }
  }

  MatchResult result;
  std::vector<char> det_used(nd, 0), gt_used(ng, 0);
  for (const auto& [d, g] : hungarian_assign(cost, nd, ng)) {
    const double v = overlap[d * ng + g];
    if (v < match_floor) continue;
    result.pairs.push_back({d, g, v});
    det_used[d] = 1;
    gt_used[g] = 1;
  }
  for (std::size_t d = 0; d < nd; ++d) {
    if (!det_used[d]) result.unmatched_detections.push_back(d);
  }
  for (std::size_t g = 0; g < ng; ++g) {
    if (!gt_used[g]) result.unmatched_ground_truth.push_back(g);
  }
  return result;
}

std::vector<ImageGroup> group_by_image(const Dataset& dataset) {
  std::vector<ImageGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  auto group_for = [&](const std::string& id) -> ImageGroup& {
    auto [it, inserted] = index.try_emplace(id, groups.size());
    if (inserted) groups.push_back(ImageGroup{id, {}, {}});
    return groups[it->second];
  };
  for (std::size_t i = 0; i < dataset.detections.size(); ++i) {
    group_for(dataset.detections[i].image_id).detections.push_back(i);
  }
  for (std::size_t i = 0; i < dataset.ground_truth.size(); ++i) {
    group_for(dataset.ground_truth[i].image_id).ground_truth.push_back(i);
  }
  return groups;
}

std::vector<DatasetMatch> match_dataset(const Dataset& dataset, double match_floor,
                                        std::vector<std::size_t>* unmatched_detections) {
  const auto groups = group_by_image(dataset);
  std::vector<MatchResult> per_image(groups.size());

  const auto n_groups = static_cast<std::ptrdiff_t>(groups.size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_cap())
  for (std::ptrdiff_t gi = 0; gi < n_groups; ++gi) {
    const auto& group = groups[static_cast<std::size_t>(gi)];
    std::vector<BoundingBox> det_boxes, gt_boxes;
    det_boxes.reserve(group.detections.size());
    gt_boxes.reserve(group.ground_truth.size());
    for (auto d : group.detections) det_boxes.push_back(dataset.detections[d].box);
    for (auto g : group.ground_truth) gt_boxes.push_back(dataset.ground_truth[g].box);
    per_image[static_cast<std::size_t>(gi)] = match_image(det_boxes, gt_boxes, match_floor);
  }

  std::vector<DatasetMatch> matches;
  if (unmatched_detections) unmatched_detections->clear();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    for (const auto& p : per_image[gi].pairs) {
      matches.push_back({group.detections[p.detection], group.ground_truth[p.ground_truth], p.iou});
    }
    if (unmatched_detections) {
      for (auto d : per_image[gi].unmatched_detections) {
        unmatched_detections->push_back(group.detections[d]);
      }
    }
  }
  return matches;
}

std::vector<LabeledEmbedding> collect_labeled_embeddings(const Dataset& dataset,
                                                         double match_floor,
                                                         CollectionSummary* summary) {
  std::vector<std::size_t> unmatched;
  const auto matches = match_dataset(dataset, match_floor, &unmatched);

  std::vector<LabeledEmbedding> out;
  std::vector<std::size_t> counts(static_cast<std::size_t>(dataset.manifest.num_classes), 0);
  for (const auto& m : matches) {
    const auto& gt = dataset.ground_truth[m.ground_truth];
    if (gt.is_ood()) continue;
    const auto& det = dataset.detections[m.detection];
    out.push_back({det.embedding, gt.class_id, det.image_id, m.detection});
    ++counts[static_cast<std::size_t>(gt.class_id)];
  }

  if (summary) {
    summary->per_class_counts = counts;
    summary->matched_pairs = matches.size();
    summary->unmatched_detections = unmatched.size();
    summary->classes_without_matches.clear();
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] == 0) summary->classes_without_matches.push_back(static_cast<int>(c));
    }
  }
  return out;
}

}  // namespace osgate
