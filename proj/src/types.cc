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

#include "osgate/types.hpp"

#include <cmath>

#include "osgate/error.hpp"

namespace osgate {

bool BoundingBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_max >= x_min && y_max >= y_min;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kClosedTest: return "closed_test";
    case Split::kOpenTest: return "open_test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "closed_test") return Split::kClosedTest;
  if (name == "open_test") return Split::kOpenTest;
  throw ArgumentError("unknown split '" + std::string(name) + "'");
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kRaw: return "Raw";
    case Mode::kPruned: return "Pruned";
    case Mode::kTemp: return "Temp";
    case Mode::kPrunedTemp: return "PrunedTemp";
  }
  return "Raw";
}

Mode parse_mode(std::string_view name) {
  if (name == "Raw" || name == "raw") return Mode::kRaw;
  if (name == "Pruned" || name == "pruned") return Mode::kPruned;
  if (name == "Temp" || name == "temp") return Mode::kTemp;
  if (name == "PrunedTemp" || name == "pruned_temp" || name == "prunedtemp") {
    return Mode::kPrunedTemp;
  }
  throw ArgumentError("unknown mode '" + std::string(name) + "'");
}

namespace {

bool all_finite(const std::vector<float>& values) {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.num_classes < 1) throw SchemaError("manifest num_classes must be >= 1");
  if (manifest.embedding_dim < 1) throw SchemaError("manifest embedding_dim must be >= 1");
  if (static_cast<int>(manifest.class_names.size()) != manifest.num_classes) {
    throw SchemaError("manifest class_names length " +
                      std::to_string(manifest.class_names.size()) + " != num_classes " +
                      std::to_string(manifest.num_classes));
  }
}

void validate_detection(const DetectionRecord& record, const DatasetManifest& manifest,
                        std::size_t index) {
  if (static_cast<int>(record.logits.size()) != manifest.num_classes) {
    throw SchemaError("detection logits length " + std::to_string(record.logits.size()) +
                          " != num_classes " + std::to_string(manifest.num_classes),
                      index);
  }
  if (static_cast<int>(record.embedding.size()) != manifest.embedding_dim) {
    throw SchemaError("detection embedding length " + std::to_string(record.embedding.size()) +
                          " != embedding_dim " + std::to_string(manifest.embedding_dim),
                      index);
  }
  if (!record.box.valid()) throw ValidationError("detection box invalid", index);
  if (!all_finite(record.logits)) throw ValidationError("non-finite detection logit", index);
  if (!all_finite(record.embedding)) {
    throw ValidationError("non-finite detection embedding value", index);
  }
  if (record.detector_score) {
    const float s = *record.detector_score;
    if (!std::isfinite(s) || s < 0.0f || s > 1.0f) {
      throw ValidationError("detector_score outside [0, 1]", index);
    }
  }
}

void validate_ground_truth(const GroundTruthRecord& record, const DatasetManifest& manifest,
                           std::size_t index) {
  if (!record.box.valid()) throw ValidationError("ground-truth box invalid", index);
  if (record.class_id != kOodClassId &&
      (record.class_id < 0 || record.class_id >= manifest.num_classes)) {
    throw ValidationError("ground-truth class_id " + std::to_string(record.class_id) +
                              " out of range",
                          index);
  }
}

void validate_dataset(const Dataset& dataset) {
  validate_manifest(dataset.manifest);
  for (std::size_t i = 0; i < dataset.detections.size(); ++i) {
    validate_detection(dataset.detections[i], dataset.manifest, i);
  }
  for (std::size_t i = 0; i < dataset.ground_truth.size(); ++i) {
    validate_ground_truth(dataset.ground_truth[i], dataset.manifest, i);
  }
}

void validate_density_model(const ClassDensityModel& model) {
  const std::string tag = "class " + std::to_string(model.class_id) + ": ";
  if (model.components.empty()) throw ValidationError(tag + "model has no components");
  if (model.k() > 4) throw ValidationError(tag + "K must be in {1,2,3,4}");
  if (!(model.class_prior > 0.0) || !std::isfinite(model.class_prior)) {
    throw ValidationError(tag + "class prior must be positive");
  }
  const auto dim = model.components[0].mean.size();
  double weight_sum = 0.0;
  for (const auto& c : model.components) {
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw ValidationError(tag + "component weight must be positive");
    }
    weight_sum += c.weight;
    if (c.mean.size() != dim || c.chol.rows() != static_cast<Eigen::Index>(dim) ||
        c.chol.cols() != static_cast<Eigen::Index>(dim)) {
      throw ValidationError(tag + "component shape mismatch");
    }
    if (!c.mean.allFinite() || !c.chol.allFinite()) {
      throw ValidationError(tag + "non-finite model parameter");
    }
    for (Eigen::Index i = 0; i < c.chol.rows(); ++i) {
      if (!(c.chol(i, i) > 0.0)) {
        throw ValidationError(tag + "Cholesky factor diagonal must be strictly positive");
      }
    }
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    throw ValidationError(tag + "component weights do not sum to 1");
  }
}

namespace {

void validate_model_list(const std::vector<ClassDensityModel>& list, const ModelSet& set,
                         const char* which) {
  if (static_cast<int>(list.size()) != set.num_classes) {
    throw CompletenessError(std::string(which) + " model set covers " +
                            std::to_string(list.size()) + " of " +
                            std::to_string(set.num_classes) + " classes");
  }
  double prior_sum = 0.0;
  for (int c = 0; c < set.num_classes; ++c) {
    const auto& model = list[static_cast<std::size_t>(c)];
    if (model.class_id != c) {
      throw CompletenessError(std::string(which) + " model set missing class " +
                              std::to_string(c));
    }
    validate_density_model(model);
    if (model.dim() != set.embedding_dim) {
      throw ValidationError(std::string(which) + " model for class " + std::to_string(c) +
                            " has dim " + std::to_string(model.dim()));
    }
    prior_sum += model.class_prior;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) {
    throw ValidationError(std::string(which) + " class priors do not sum to 1");
  }
}

}  // namespace

void validate_model_set(const ModelSet& models) {
  if (models.num_classes < 1 || models.embedding_dim < 1) {
    throw ValidationError("model set has invalid num_classes / embedding_dim");
  }
  validate_model_list(models.single, models, "single");
  validate_model_list(models.multi, models, "multi");
}

}  // namespace osgate
