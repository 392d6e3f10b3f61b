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

// Core value types shared by every module. Detection-side records are stored
// in float32 (matching the on-disk container); model parameters are double.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace osgate {

// Ground-truth class id for objects of unknown (out-of-distribution) classes.
inline constexpr int kOodClassId = -1;

// Axis-aligned box in corner format, pixel units.
struct BoundingBox {
  float x_min = 0.0f;
  float y_min = 0.0f;
  float x_max = 0.0f;
  float y_max = 0.0f;

  double width() const { return static_cast<double>(x_max) - x_min; }
  double height() const { return static_cast<double>(y_max) - y_min; }
  double area() const { return width() * height(); }

  // Finite coordinates with x_max >= x_min and y_max >= y_min.
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct DetectionRecord {
  std::string image_id;
  BoundingBox box;
  std::vector<float> logits;     // length num_classes
  std::vector<float> embedding;  // length embedding_dim
  std::optional<float> detector_score;

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

struct GroundTruthRecord {
  std::string image_id;
  BoundingBox box;
  int class_id = 0;  // [0, num_classes) or kOodClassId

  bool is_ood() const { return class_id == kOodClassId; }

  friend bool operator==(const GroundTruthRecord&, const GroundTruthRecord&) = default;
};

enum class Split { kTrain, kVal, kClosedTest, kOpenTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct DatasetManifest {
  int num_classes = 1;
  std::vector<std::string> class_names;
  int embedding_dim = 1;
  Split split = Split::kTrain;
  bool spectral_normalized = false;
  std::string detector_name;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<DetectionRecord> detections;
  std::vector<GroundTruthRecord> ground_truth;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws SchemaError / ValidationError naming the first offending record.
void validate_manifest(const DatasetManifest& manifest);
void validate_detection(const DetectionRecord& record, const DatasetManifest& manifest,
                        std::size_t index);
void validate_ground_truth(const GroundTruthRecord& record, const DatasetManifest& manifest,
                           std::size_t index);
void validate_dataset(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Density models

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol;  // lower-triangular Cholesky factor of the covariance

  Eigen::MatrixXd covariance() const { return chol * chol.transpose(); }
};

// Bookkeeping recorded by the fitters and persisted alongside the model.
struct FitInfo {
  int requested_k = 1;
  int em_iterations = 0;
  bool converged = true;
  // Fewer samples than dim + 1: the covariance is only positive definite
  // because of the jitter term.
  bool degenerate = false;
  std::size_t sample_count = 0;
  std::vector<std::string> events;  // collapse / re-seed / K reduction log
};

struct ClassDensityModel {
  int class_id = 0;
  double class_prior = 1.0;
  std::vector<GaussianComponent> components;
  FitInfo info;

  int k() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : static_cast<int>(components[0].mean.size()); }
};

// Throws ValidationError if weights do not sum to 1, a Cholesky diagonal is not
// strictly positive, or shapes disagree.
void validate_density_model(const ClassDensityModel& model);

// Single-Gaussian and K-component mixture per class, indexed by class id.
struct ModelSet {
  int num_classes = 0;
  int embedding_dim = 0;
  std::vector<ClassDensityModel> single;
  std::vector<ClassDensityModel> multi;
  // Content hash of the training containers, used to warn about train/val leakage.
  std::uint64_t train_fingerprint = 0;
};

// Throws CompletenessError if a class is missing and ValidationError on
// invariant violations (including priors not summing to 1).
void validate_model_set(const ModelSet& models);

// ---------------------------------------------------------------------------
// Calibration

enum class Mode { kRaw, kPruned, kTemp, kPrunedTemp };

inline constexpr std::array<Mode, 4> kAllModes = {Mode::kRaw, Mode::kPruned, Mode::kTemp,
                                                  Mode::kPrunedTemp};

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct CalibrationProfile {
  double t_model = 1.0;
  double t_gmm = 1.0;
  double prune_threshold = 0.2;
  Mode mode = Mode::kRaw;
  // Add log class priors to the per-class log-likelihoods before the GMM
  // posterior softmax.
  bool use_class_priors = true;
};

struct ThresholdPolicy {
  double soft_quantile = 0.05;
  double gmm_quantile = 0.95;
};

struct JointThresholds {
  double tau_soft = 0.0;
  double tau_gmm = 0.0;  // nats
  ThresholdPolicy policy;
};

}  // namespace osgate
