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

// The four pipeline stages behind the command-line tool. Each stage reads its
// inputs from disk, writes its outputs into an output directory and keeps no
// other state, so any stage can be re-run on its own.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "osgate/calibration.hpp"
#include "osgate/density.hpp"
#include "osgate/evaluation.hpp"
#include "osgate/synthgen.hpp"
#include "osgate/types.hpp"

namespace osgate {

struct RunConfig {
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path closed_test;
  std::filesystem::path open_test;
  std::filesystem::path models;       // defaults to <out>/models.json
  std::filesystem::path calibration;  // defaults to <out>/calibration.json
  std::filesystem::path out = ".";

  FitConfig fit{.k = 3};
  double match_floor = 0.5;
  double prune_threshold = 0.2;
  ThresholdPolicy policy;
  bool use_class_priors = true;
  EvaluationOptions evaluation;

  std::filesystem::path models_path() const {
    return models.empty() ? out / "models.json" : models;
  }
  std::filesystem::path calibration_path() const {
    return calibration.empty() ? out / "calibration.json" : calibration;
  }
};

struct ClassFitSummary {
  int class_id = 0;
  std::size_t samples = 0;
  double prior = 0.0;
  FitInfo single;
  FitInfo multi;
  int multi_k = 0;
};

struct FitSummary {
  std::size_t matched_pairs = 0;
  std::size_t unmatched_detections = 0;
  std::vector<ClassFitSummary> classes;
};

// Matching, embedding collection and the per-class single-Gaussian and
// K-component fits. Throws CompletenessError naming any class with fewer than
// two matched embeddings.
ModelSet fit_models(const Dataset& train, const FitConfig& config, double match_floor = 0.5,
                    FitSummary* summary = nullptr);

// Writes models.json and fit_summary.json.
void cmd_fit(const RunConfig& config, std::ostream& log);

// Writes calibration.json and prints NLL before and after both temperatures.
// Warns when the validation containers are identical to the training ones.
void cmd_calibrate(const RunConfig& config, std::ostream& log);

// Writes report.json and report.csv.
void cmd_evaluate(const RunConfig& config, std::ostream& log);

// Writes the four split directories and spec.json.
void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out, std::ostream& log);

}  // namespace osgate
