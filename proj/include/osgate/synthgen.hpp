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

// Seeded synthetic open-set detection data: Gaussian embedding clusters per
// in-distribution class, an unknown-class cluster, broad background clutter,
// and logits of the form scale * (alpha * onehot + noise).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "osgate/types.hpp"

namespace osgate {

struct SynthSpec {
  int num_id_classes = 2;
  std::size_t train_per_class = 2000;
  std::size_t eval_per_class = 500;  // val, closed_test and open_test each
  int embedding_dim = 64;
  // Distance between class means, in cluster standard deviations.
  double separation = 4.0;
  // Offset of the unknown cluster from the class centroid, along an axis no
  // class mean uses, in units of separation.
  double ood_offset = 1.0;
  std::size_t ood_count = 500;
  std::size_t background_count = 375;
  double background_spread = 3.0;
  // Logit model. With noise^2 == alpha the logits are calibrated at T = 1.
  double logit_alpha = 4.0;
  double logit_noise = 2.0;
  // Unknown objects get ambiguous logits: weak one-hot evidence for a random
  // class and their own noise scale.
  double ood_logit_alpha = 0.0;
  double ood_logit_noise = 1.0;
  double background_logit_noise = 1.0;
  // Multiplies every logit; the calibrated temperature becomes this factor.
  double logit_scale = 1.0;
  // Image geometry: a grid of cells, at most one object per cell.
  int image_width = 1280;
  int image_height = 720;
  int grid_cols = 4;
  int grid_rows = 3;
  double box_min = 0.4;  // box side as a fraction of the cell side
  double box_max = 0.9;
  double box_jitter = 0.05;  // per-coordinate shift, fraction of box side
  std::uint64_t seed = 0;
};

// Throws ArgumentError naming the first offending field.
void validate_synth_spec(const SynthSpec& spec);

struct SynthDatasets {
  Dataset train;
  Dataset val;
  Dataset closed_test;
  Dataset open_test;
};

// Output depends only on the SynthSpec. Train and val hold in-distribution objects only;
// closed_test likewise; open_test adds unknown-class objects (sentinel ground
// truth) and background detections with no ground truth.
SynthDatasets generate(const SynthSpec& spec);

// Class means used by generate(), one row per class, then the unknown-class
// centre as the last row.
Eigen::MatrixXd synth_cluster_centers(const SynthSpec& spec);

// Writes train/, val/, closed_test/ and open_test/ under dir plus spec.json.
// The SynthSpec is validated before anything touches the filesystem.
void write_synth(const SynthSpec& spec, const std::filesystem::path& dir);

// JSON round trip. Unknown keys are rejected so that typos surface.
std::string synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const std::string& text);
SynthSpec load_synth_spec(const std::filesystem::path& path);

// Exact pair counting with half credit for ties. Refuses (ArgumentError) when
// n * m exceeds one million and UndefinedMetricError on empty input.
double oracle_auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

}  // namespace osgate
