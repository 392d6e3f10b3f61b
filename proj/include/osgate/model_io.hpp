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

// JSON persistence for fitted density models and calibration artifacts.
// Both files carry "format_version": "1.<minor>"; readers accept any 1.x and
// ignore fields they do not know. Doubles round-trip exactly.

#include <filesystem>

#include "osgate/calibration.hpp"
#include "osgate/types.hpp"

namespace osgate {

// Throws CompletenessError if any class in [0, num_classes) lacks a model.
void save_models(const ModelSet& models, const std::filesystem::path& path);
ModelSet load_models(const std::filesystem::path& path);

void save_calibration(const CalibrationArtifacts& calibration, const std::filesystem::path& path);
CalibrationArtifacts load_calibration(const std::filesystem::path& path);

}  // namespace osgate
