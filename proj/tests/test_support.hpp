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

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "osgate/types.hpp"

namespace osgate::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("osgate_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline BoundingBox box(float x0, float y0, float x1, float y1) { return {x0, y0, x1, y1}; }

inline DatasetManifest manifest(int classes, int dim, Split split = Split::kTrain) {
  DatasetManifest m;
  m.num_classes = classes;
  m.embedding_dim = dim;
  m.split = split;
  for (int c = 0; c < classes; ++c) m.class_names.push_back("c" + std::to_string(c));
  m.detector_name = "test";
  return m;
}

inline DetectionRecord detection(const std::string& image, const BoundingBox& b,
                                 std::vector<float> logits, std::vector<float> embedding) {
  DetectionRecord d;
  d.image_id = image;
  d.box = b;
  d.logits = std::move(logits);
  d.embedding = std::move(embedding);
  return d;
}

inline std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, int levels) {
  // levels > 0 draws from a small integer grid so ties are common.
  std::vector<double> out(n);
  std::uniform_int_distribution<int> grid(0, levels > 0 ? levels - 1 : 0);
  std::normal_distribution<double> normal;
  for (auto& v : out) v = levels > 0 ? grid(rng) / 4.0 : normal(rng);
  return out;
}

}  // namespace osgate::testing
