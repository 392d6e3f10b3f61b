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

// Directory container for detection datasets:
//
//   manifest.json     UTF-8 JSON, keys in sorted order
//   detections.bin    16-byte header + fixed-width little-endian rows
//   groundtruth.bin   16-byte header + fixed-width little-endian rows
//
// Header: magic "OSGT" (4F 53 47 54), u32 format version (1), u64 record count.
//
// detections.bin row, 4-byte words:
//   u32 image_index, u32 flags (bit 0: detector_score present),
//   f32 x_min, y_min, x_max, y_max, f32 detector_score (0 when absent),
//   f32 logits[num_classes], f32 embedding[embedding_dim]
// groundtruth.bin row:
//   u32 image_index, i32 class_id, f32 x_min, y_min, x_max, y_max
//
// image_index refers to the manifest "images" array, which lists image ids in
// first-appearance order (detections first, then ground truth).

#include <cstdint>
#include <filesystem>
#include <span>

#include "osgate/types.hpp"

namespace osgate {

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr char kContainerMagic[4] = {'O', 'S', 'G', 'T'};
inline constexpr std::size_t kContainerHeaderBytes = 16;

// Validates every record against the manifest before touching the filesystem.
// Output is byte-identical for identical input.
void write_dataset(const DatasetManifest& manifest, std::span<const DetectionRecord> detections,
                   std::span<const GroundTruthRecord> ground_truth,
                   const std::filesystem::path& dir);
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Throws FormatError on a corrupt or truncated container and ValidationError
// (with record index) on invariant violations. Never returns partial data.
Dataset read_dataset(const std::filesystem::path& dir);

// FNV-1a over the record files (the manifest is excluded so a relabelled split
// still matches). Used as a cheap identity check between runs.
std::uint64_t dataset_fingerprint(const std::filesystem::path& dir);

}  // namespace osgate
