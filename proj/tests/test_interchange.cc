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

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <gtest/gtest.h>

#include "json.hpp"
#include "osgate/dataset_io.hpp"
#include "osgate/error.hpp"
#include "osgate/model_io.hpp"
#include "test_support.hpp"

namespace osgate {
namespace {

using testing::TempDir;
using testing::box;
using testing::detection;
using testing::manifest;

std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset sample_dataset() {
  Dataset ds;
  ds.manifest = manifest(2, 3, Split::kOpenTest);
  ds.manifest.spectral_normalized = true;
  ds.detections.push_back(detection("img_a", box(0, 0, 10, 10), {1.5f, -2.25f}, {0.1f, 0.2f, 0.3f}));
  ds.detections.push_back(detection("img_b", box(5, 5, 6, 7), {0.0f, 3.0f},
                                    {-1e-30f, std::numeric_limits<float>::max(), 7.0f}));
  ds.detections[1].detector_score = 0.75f;
  ds.ground_truth.push_back({"img_a", box(0, 0, 10, 11), 1});
  ds.ground_truth.push_back({"img_c", box(1, 1, 2, 2), kOodClassId});
  return ds;
}

TEST(Interchange, EmptyDetectionListRoundTrips) {
  TempDir dir;
  Dataset ds;
  ds.manifest = manifest(1, 4);
  write_dataset(ds, dir.path());
  const auto back = read_dataset(dir.path());
  EXPECT_EQ(back, ds);
  EXPECT_TRUE(back.detections.empty());
}

TEST(Interchange, RoundTripIsExact) {
  TempDir dir;
  const auto ds = sample_dataset();
  write_dataset(ds, dir.path());
  const auto back = read_dataset(dir.path());
  EXPECT_EQ(back, ds);
  ASSERT_TRUE(back.detections[1].detector_score.has_value());
  EXPECT_FALSE(back.detections[0].detector_score.has_value());
  EXPECT_EQ(std::memcmp(&back.detections[1].embedding[0], &ds.detections[1].embedding[0], 4), 0);
}

TEST(Interchange, RewritesAreByteIdentical) {
  TempDir a, b;
  write_dataset(sample_dataset(), a.path());
  write_dataset(sample_dataset(), b.path());
  for (const char* f : {"manifest.json", "detections.bin", "groundtruth.bin"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(dataset_fingerprint(a.path()), dataset_fingerprint(b.path()));
}

TEST(Interchange, HeaderLayoutIsNormative) {
  TempDir dir;
  write_dataset(sample_dataset(), dir.path());
  const auto bytes = slurp(dir / "detections.bin");
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes[0], 0x4F);
  EXPECT_EQ(bytes[1], 0x53);
  EXPECT_EQ(bytes[2], 0x47);
  EXPECT_EQ(bytes[3], 0x54);
  EXPECT_EQ(bytes[4], 1);  // version, little endian
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  EXPECT_EQ(bytes[8], 2);  // record count
  // Row: 2 u32 + 4 box + score + 2 logits + 3 embedding = 12 words.
  EXPECT_EQ(bytes.size(), 16u + 2 * 12 * 4);
  const auto gt = slurp(dir / "groundtruth.bin");
  EXPECT_EQ(gt.size(), 16u + 2 * 6 * 4);
}

TEST(Interchange, EmbeddingLengthMismatchIsSchemaErrorAtIndex0) {
  TempDir dir;
  Dataset ds;
  ds.manifest = manifest(1, 256);
  ds.detections.push_back(detection("x", box(0, 0, 1, 1), {0.0f}, std::vector<float>(255, 0.0f)));
  try {
    write_dataset(ds, dir.path());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    ASSERT_TRUE(e.record_index().has_value());
    EXPECT_EQ(*e.record_index(), 0u);
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "detections.bin"));
}

TEST(Interchange, TruncatedFileIsFormatError) {
  TempDir dir;
  write_dataset(sample_dataset(), dir.path());
  auto bytes = slurp(dir / "detections.bin");
  bytes.resize(bytes.size() - 3);
  spit(dir / "detections.bin", bytes);
  EXPECT_THROW(read_dataset(dir.path()), FormatError);
}

TEST(Interchange, CorruptMagicIsFormatError) {
  TempDir dir;
  write_dataset(sample_dataset(), dir.path());
  auto bytes = slurp(dir / "groundtruth.bin");
  bytes[0] = 'X';
  spit(dir / "groundtruth.bin", bytes);
  EXPECT_THROW(read_dataset(dir.path()), FormatError);
}

TEST(Interchange, NonFiniteFloatIsValidationErrorWithIndex) {
  TempDir dir;
  write_dataset(sample_dataset(), dir.path());
  auto bytes = slurp(dir / "detections.bin");
  const float nan = std::numeric_limits<float>::quiet_NaN();
  // Record 1, first embedding value: header + row + 7 words + 2 logits.
  std::memcpy(bytes.data() + 16 + 48 + 4 * 9, &nan, 4);
  spit(dir / "detections.bin", bytes);
  try {
    read_dataset(dir.path());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    ASSERT_TRUE(e.record_index().has_value());
    EXPECT_EQ(*e.record_index(), 1u);
  }
}

TEST(Interchange, ManifestOnlyContainerIsEmpty) {
  TempDir dir;
  write_dataset(sample_dataset(), dir.path());
  std::filesystem::remove(dir / "detections.bin");
  std::filesystem::remove(dir / "groundtruth.bin");
  const auto back = read_dataset(dir.path());
  EXPECT_TRUE(back.detections.empty());
  EXPECT_TRUE(back.ground_truth.empty());
  EXPECT_EQ(back.manifest, sample_dataset().manifest);
}

TEST(Interchange, ManifestForwardCompatibility) {
  TempDir dir;
  write_dataset(sample_dataset(), dir.path());
  auto doc = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  doc["format_version"] = "1.4";
  doc["embedding_tap"] = "decoder.layer5";
  std::ofstream(dir / "manifest.json") << doc.dump();
  EXPECT_EQ(read_dataset(dir.path()), sample_dataset());

  doc["required_extensions"] = {"sparse_logits"};
  std::ofstream(dir / "manifest.json") << doc.dump();
  EXPECT_THROW(read_dataset(dir.path()), FormatError);

  doc.erase("required_extensions");
  doc["format_version"] = "2.0";
  std::ofstream(dir / "manifest.json") << doc.dump();
  EXPECT_THROW(read_dataset(dir.path()), FormatError);
}

TEST(Interchange, InvalidRecordsRejected) {
  Dataset ds = sample_dataset();
  ds.detections[0].box = box(5, 0, 4, 1);
  EXPECT_THROW(validate_dataset(ds), ValidationError);
  ds = sample_dataset();
  ds.ground_truth[0].class_id = 2;
  EXPECT_THROW(validate_dataset(ds), ValidationError);
  ds = sample_dataset();
  ds.detections[1].detector_score = 1.5f;
  EXPECT_THROW(validate_dataset(ds), ValidationError);
  ds = sample_dataset();
  ds.manifest.class_names.pop_back();
  EXPECT_THROW(validate_dataset(ds), SchemaError);
}

TEST(Interchange, MissingDirectoryIsFormatError) {
  EXPECT_THROW(read_dataset("/nonexistent/osgate/dir"), FormatError);
}

ClassDensityModel simple_model(int class_id, double prior, int dim, int k) {
  ClassDensityModel m;
  m.class_id = class_id;
  m.class_prior = prior;
  for (int j = 0; j < k; ++j) {
    GaussianComponent c;
    c.weight = 1.0 / k;
    c.mean = Eigen::VectorXd::LinSpaced(dim, 0.1 * j, 1.0 / 3.0 + j);
    c.chol = Eigen::MatrixXd::Identity(dim, dim) * (1.0 + j / 7.0);
    c.chol(dim - 1, 0) = 0.123456789012345;
    c.chol(0, 0) = 0.1;
    c.weight = j + 1 == k ? 1.0 - (k - 1) * (1.0 / k) : 1.0 / k;
    m.components.push_back(c);
  }
  m.info.requested_k = k;
  m.info.em_iterations = 12;
  m.info.events = {"note"};
  return m;
}

ModelSet simple_set(int k) {
  ModelSet s;
  s.num_classes = 2;
  s.embedding_dim = 3;
  s.single = {simple_model(0, 0.3, 3, 1), simple_model(1, 0.7, 3, 1)};
  s.multi = {simple_model(0, 0.3, 3, k), simple_model(1, 0.7, 3, k)};
  s.train_fingerprint = 0xfedcba9876543210ULL;
  return s;
}

void expect_models_equal(const ClassDensityModel& a, const ClassDensityModel& b) {
  EXPECT_EQ(a.class_id, b.class_id);
  EXPECT_EQ(a.class_prior, b.class_prior);
  ASSERT_EQ(a.k(), b.k());
  for (int j = 0; j < a.k(); ++j) {
    EXPECT_EQ(a.components[j].weight, b.components[j].weight);
    EXPECT_EQ(a.components[j].mean, b.components[j].mean);
    EXPECT_EQ(a.components[j].chol, b.components[j].chol);
  }
  EXPECT_EQ(a.info.em_iterations, b.info.em_iterations);
  EXPECT_EQ(a.info.events, b.info.events);
}

TEST(ModelIo, RoundTripIsExact) {
  TempDir dir;
  const auto set = simple_set(2);
  save_models(set, dir / "models.json");
  const auto back = load_models(dir / "models.json");
  EXPECT_EQ(back.train_fingerprint, set.train_fingerprint);
  for (int c = 0; c < 2; ++c) {
    expect_models_equal(back.single[c], set.single[c]);
    expect_models_equal(back.multi[c], set.multi[c]);
  }
}

TEST(ModelIo, MissingClassIsCompletenessError) {
  TempDir dir;
  auto set = simple_set(1);
  set.single.pop_back();
  EXPECT_THROW(save_models(set, dir / "models.json"), CompletenessError);

  save_models(simple_set(1), dir / "models.json");
  auto doc = nlohmann::json::parse(std::ifstream(dir / "models.json"));
  doc["multi"].erase(1);
  std::ofstream(dir / "models.json") << doc.dump();
  EXPECT_THROW(load_models(dir / "models.json"), CompletenessError);
}

TEST(ModelIo, NewerMinorVersionWithUnknownFieldsLoads) {
  TempDir dir;
  save_models(simple_set(2), dir / "models.json");
  auto doc = nlohmann::json::parse(std::ifstream(dir / "models.json"));
  doc["format_version"] = "1.9";
  doc["annotations"] = {{"tool", "future"}};
  doc["single"][0]["extra"] = 42;
  std::ofstream(dir / "models.json") << doc.dump();
  const auto back = load_models(dir / "models.json");
  expect_models_equal(back.single[0], simple_set(2).single[0]);
}

TEST(ModelIo, MissingFileIsFormatError) {
  EXPECT_THROW(load_models("/nonexistent/models.json"), FormatError);
  EXPECT_THROW(load_calibration("/nonexistent/calibration.json"), FormatError);
}

TEST(ModelIo, PriorsMustSumToOne) {
  auto set = simple_set(1);
  set.single[1].class_prior = 0.6;
  EXPECT_THROW(validate_model_set(set), ValidationError);
}

TEST(ModelIo, CalibrationRoundTrip) {
  TempDir dir;
  CalibrationArtifacts cal;
  cal.profile.t_model = 1.2345678901234;
  cal.profile.t_gmm = 17.0 / 3.0;
  cal.profile.mode = Mode::kPrunedTemp;
  cal.nll_model_before = 0.5;
  cal.nll_model_after = 0.25;
  cal.validation_matches = 7;
  const std::vector<double> soft = {0.9, 0.3, 0.6};
  const std::vector<double> ent = {0.1, 0.4, 0.2};
  for (Mode m : kAllModes) {
    cal.modes.push_back({m, {0.3, 0.4, {0.05, 0.95}}, ValidationReference(soft, ent)});
  }
  save_calibration(cal, dir / "calibration.json");
  const auto back = load_calibration(dir / "calibration.json");
  EXPECT_EQ(back.profile.t_model, cal.profile.t_model);
  EXPECT_EQ(back.profile.t_gmm, cal.profile.t_gmm);
  EXPECT_EQ(back.profile.mode, Mode::kPrunedTemp);
  EXPECT_EQ(back.validation_matches, 7u);
  ASSERT_EQ(back.modes.size(), 4u);
  EXPECT_EQ(back.at(Mode::kTemp).thresholds.tau_gmm, 0.4);
  EXPECT_EQ(back.at(Mode::kRaw).reference.sorted_soft(), cal.modes[0].reference.sorted_soft());
  EXPECT_EQ(back.at(Mode::kRaw).reference.sorted_neg_entropy(),
            cal.modes[0].reference.sorted_neg_entropy());
}

}  // namespace
}  // namespace osgate
