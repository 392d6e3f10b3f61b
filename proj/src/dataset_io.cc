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

#include "osgate/dataset_io.hpp"

#include <fstream>
#include <iterator>
#include <unordered_map>

#include "byte_io.hpp"
#include "json_io.hpp"
#include "osgate/error.hpp"

namespace osgate {

namespace fs = std::filesystem;
using detail::json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kDetectionsFile = "detections.bin";
constexpr const char* kGroundTruthFile = "groundtruth.bin";
constexpr std::uint32_t kFlagHasScore = 1u;
constexpr std::size_t kGroundTruthRowBytes = 6 * 4;

std::size_t detection_row_bytes(const DatasetManifest& m) {
  return (7 + static_cast<std::size_t>(m.num_classes) + static_cast<std::size_t>(m.embedding_dim)) *
         4;
}

void put_header(std::vector<unsigned char>& out, std::uint64_t count) {
  out.insert(out.end(), std::begin(kContainerMagic), std::end(kContainerMagic));
  detail::put_u32(out, kContainerVersion);
  detail::put_u64(out, count);
}

void put_box(std::vector<unsigned char>& out, const BoundingBox& b) {
  detail::put_f32(out, b.x_min);
  detail::put_f32(out, b.y_min);
  detail::put_f32(out, b.x_max);
  detail::put_f32(out, b.y_max);
}

BoundingBox get_box(const unsigned char* p) {
  return {detail::get_f32(p), detail::get_f32(p + 4), detail::get_f32(p + 8),
          detail::get_f32(p + 12)};
}

void write_bytes(const std::vector<unsigned char>& bytes, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Checks magic/version and that the payload is exactly count * row_bytes.
std::uint64_t check_header(const std::vector<unsigned char>& bytes, std::size_t row_bytes,
                           const std::string& what) {
  if (bytes.size() < kContainerHeaderBytes) throw FormatError(what + ": truncated header");
  if (!std::equal(std::begin(kContainerMagic), std::end(kContainerMagic), bytes.begin())) {
    throw FormatError(what + ": bad magic");
  }
  const auto version = detail::get_u32(bytes.data() + 4);
  if (version != kContainerVersion) {
    throw FormatError(what + ": unsupported container version " + std::to_string(version));
  }
  const auto count = detail::get_u64(bytes.data() + 8);
  const auto payload = bytes.size() - kContainerHeaderBytes;
  if (row_bytes == 0 || payload % row_bytes != 0 || payload / row_bytes != count) {
    throw FormatError(what + ": payload size " + std::to_string(payload) +
                      " does not match record count " + std::to_string(count));
  }
  return count;
}

json manifest_to_json(const DatasetManifest& m, const std::vector<std::string>& images) {
  json doc;
  doc["format_version"] = "1.0";
  doc["num_classes"] = m.num_classes;
  doc["class_names"] = m.class_names;
  doc["embedding_dim"] = m.embedding_dim;
  doc["split"] = std::string(to_string(m.split));
  doc["spectral_normalized"] = m.spectral_normalized;
  doc["detector_name"] = m.detector_name;
  doc["images"] = images;
  return doc;
}

DatasetManifest manifest_from_json(const json& doc, std::vector<std::string>& images) {
  const std::string what = kManifestFile;
  detail::check_format_version(doc, what);
  DatasetManifest m;
  m.num_classes = detail::require<int>(doc, "num_classes", what);
  m.class_names = detail::require<std::vector<std::string>>(doc, "class_names", what);
  m.embedding_dim = detail::require<int>(doc, "embedding_dim", what);
  try {
    m.split = parse_split(detail::require<std::string>(doc, "split", what));
  } catch (const ArgumentError& e) {
    throw FormatError(what + ": " + e.what());
  }
  m.spectral_normalized = detail::require<bool>(doc, "spectral_normalized", what);
  m.detector_name = detail::require<std::string>(doc, "detector_name", what);
  images = detail::require<std::vector<std::string>>(doc, "images", what);
  return m;
}

}  // namespace

void write_dataset(const DatasetManifest& manifest, std::span<const DetectionRecord> detections,
                   std::span<const GroundTruthRecord> ground_truth, const fs::path& dir) {
  validate_manifest(manifest);
  for (std::size_t i = 0; i < detections.size(); ++i) validate_detection(detections[i], manifest, i);
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    validate_ground_truth(ground_truth[i], manifest, i);
  }

  std::vector<std::string> images;
  std::unordered_map<std::string, std::uint32_t> image_index;
  auto index_of = [&](const std::string& id) {
    auto [it, inserted] = image_index.try_emplace(id, static_cast<std::uint32_t>(images.size()));
    if (inserted) images.push_back(id);
    return it->second;
  };

  std::vector<unsigned char> det_bytes;
  det_bytes.reserve(kContainerHeaderBytes + detections.size() * detection_row_bytes(manifest));
  put_header(det_bytes, detections.size());
  for (const auto& d : detections) {
    detail::put_u32(det_bytes, index_of(d.image_id));
    detail::put_u32(det_bytes, d.detector_score ? kFlagHasScore : 0u);
    put_box(det_bytes, d.box);
    detail::put_f32(det_bytes, d.detector_score.value_or(0.0f));
    for (float v : d.logits) detail::put_f32(det_bytes, v);
    for (float v : d.embedding) detail::put_f32(det_bytes, v);
  }

  std::vector<unsigned char> gt_bytes;
  gt_bytes.reserve(kContainerHeaderBytes + ground_truth.size() * kGroundTruthRowBytes);
  put_header(gt_bytes, ground_truth.size());
  for (const auto& g : ground_truth) {
    detail::put_u32(gt_bytes, index_of(g.image_id));
    detail::put_i32(gt_bytes, g.class_id);
    put_box(gt_bytes, g.box);
  }

  fs::create_directories(dir);
  detail::write_json_file(manifest_to_json(manifest, images), dir / kManifestFile);
  write_bytes(det_bytes, dir / kDetectionsFile);
  write_bytes(gt_bytes, dir / kGroundTruthFile);
}

void write_dataset(const Dataset& dataset, const fs::path& dir) {
  write_dataset(dataset.manifest, dataset.detections, dataset.ground_truth, dir);
}

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("dataset directory '" + dir.string() + "' not found");

  Dataset out;
  std::vector<std::string> images;
  out.manifest = manifest_from_json(detail::read_json_file(dir / kManifestFile), images);
  validate_manifest(out.manifest);
  const auto& m = out.manifest;

  auto image_at = [&](std::uint32_t idx, std::size_t record, const char* what) -> const std::string& {
    if (idx >= images.size()) {
      throw ValidationError(std::string(what) + " image index out of range", record);
    }
    return images[idx];
  };

  // A container holding only its manifest is a valid empty dataset.
  if (fs::exists(dir / kDetectionsFile)) {
    const auto bytes = read_bytes(dir / kDetectionsFile);
    const std::size_t row = detection_row_bytes(m);
    const auto count = check_header(bytes, row, kDetectionsFile);
    out.detections.resize(count);
    const unsigned char* p = bytes.data() + kContainerHeaderBytes;
    for (std::size_t i = 0; i < count; ++i, p += row) {
      auto& d = out.detections[i];
      d.image_id = image_at(detail::get_u32(p), i, "detection");
      const auto flags = detail::get_u32(p + 4);
      if (flags & ~kFlagHasScore) throw ValidationError("unknown detection flags", i);
      d.box = get_box(p + 8);
      if (flags & kFlagHasScore) d.detector_score = detail::get_f32(p + 24);
      const unsigned char* q = p + 28;
      d.logits.resize(static_cast<std::size_t>(m.num_classes));
      for (auto& v : d.logits) { v = detail::get_f32(q); q += 4; }
      d.embedding.resize(static_cast<std::size_t>(m.embedding_dim));
      for (auto& v : d.embedding) { v = detail::get_f32(q); q += 4; }
      validate_detection(d, m, i);
    }
  }

  if (fs::exists(dir / kGroundTruthFile)) {
    const auto bytes = read_bytes(dir / kGroundTruthFile);
    const auto count = check_header(bytes, kGroundTruthRowBytes, kGroundTruthFile);
    out.ground_truth.resize(count);
    const unsigned char* p = bytes.data() + kContainerHeaderBytes;
    for (std::size_t i = 0; i < count; ++i, p += kGroundTruthRowBytes) {
      auto& g = out.ground_truth[i];
      g.image_id = image_at(detail::get_u32(p), i, "ground-truth");
      g.class_id = detail::get_i32(p + 4);
      g.box = get_box(p + 8);
      validate_ground_truth(g, m, i);
    }
  }
  return out;
}

std::uint64_t dataset_fingerprint(const fs::path& dir) {
  std::uint64_t hash = detail::kFnvOffset;
  for (const char* name : {kDetectionsFile, kGroundTruthFile}) {
    if (!fs::exists(dir / name)) continue;
    const auto bytes = read_bytes(dir / name);
    hash = detail::fnv1a(hash, bytes.data(), bytes.size());
  }
  return hash;
}

}  // namespace osgate
