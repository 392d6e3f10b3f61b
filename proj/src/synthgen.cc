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

#include "osgate/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json_io.hpp"
#include "osgate/dataset_io.hpp"
#include "osgate/error.hpp"
#include "osgate/metrics.hpp"
#include "osgate/parallel.hpp"

namespace osgate {

void validate_synth_spec(const SynthSpec& s) {
  auto fail = [](const std::string& msg) { throw ArgumentError("synth spec: " + msg); };
  if (s.num_id_classes < 1) fail("num_id_classes must be >= 1");
  if (s.embedding_dim < s.num_id_classes + 1) {
    fail("embedding_dim must exceed num_id_classes (one axis per class plus one for unknowns)");
  }
  if (!(s.separation > 0.0) || !std::isfinite(s.separation)) fail("separation must be > 0");
  if (!(s.ood_offset >= 0.0) || !std::isfinite(s.ood_offset)) fail("ood_offset must be >= 0");
  if (!(s.background_spread > 0.0)) fail("background_spread must be > 0");
  if (!(s.logit_alpha >= 0.0) || !(s.ood_logit_alpha >= 0.0)) fail("logit alphas must be >= 0");
  if (!(s.logit_noise >= 0.0) || !(s.ood_logit_noise >= 0.0) ||
      !(s.background_logit_noise >= 0.0)) {
    fail("logit noise scales must be >= 0");
  }
  if (!(s.logit_scale > 0.0) || !std::isfinite(s.logit_scale)) fail("logit_scale must be > 0");
  if (s.image_width < 1 || s.image_height < 1) fail("image size must be positive");
  if (s.grid_cols < 1 || s.grid_rows < 1) fail("grid must have at least one cell");
  if (!(s.box_min > 0.0 && s.box_min <= s.box_max && s.box_max <= 1.0)) {
    fail("box size range must satisfy 0 < box_min <= box_max <= 1");
  }
  if (!(s.box_jitter >= 0.0 && s.box_jitter < 0.25)) fail("box_jitter must be in [0, 0.25)");
}

namespace {

enum class ObjectKind { kId, kOod, kBackground };

struct Object {
  ObjectKind kind = ObjectKind::kId;
  int class_id = 0;
};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class SplitGenerator {
 public:
  SplitGenerator(const SynthSpec& spec, const Eigen::MatrixXd& centers, std::uint64_t seed)
      : spec_(spec), centers_(centers), rng_(seed) {}

  Dataset run(Split split, std::size_t per_class, std::size_t ood, std::size_t background) {
    std::vector<Object> objects;
    for (int c = 0; c < spec_.num_id_classes; ++c) {
      objects.insert(objects.end(), per_class, Object{ObjectKind::kId, c});
    }
    objects.insert(objects.end(), ood, Object{ObjectKind::kOod, kOodClassId});
    objects.insert(objects.end(), background, Object{ObjectKind::kBackground, 0});
    std::shuffle(objects.begin(), objects.end(), rng_);

    Dataset ds;
    ds.manifest.num_classes = spec_.num_id_classes;
    for (int c = 0; c < spec_.num_id_classes; ++c) {
      ds.manifest.class_names.push_back("class_" + std::to_string(c));
    }
    ds.manifest.embedding_dim = spec_.embedding_dim;
    ds.manifest.split = split;
    ds.manifest.detector_name = "synthetic";

    const auto cells = static_cast<std::size_t>(spec_.grid_cols * spec_.grid_rows);
    for (std::size_t i = 0; i < objects.size(); ++i) {
      char image_id[64];
      std::snprintf(image_id, sizeof(image_id), "%s_%06zu", std::string(to_string(split)).c_str(),
                    i / cells);
      const auto cell = static_cast<int>(i % cells);
      emit(objects[i], image_id, cell, ds);
    }
    return ds;
  }

 private:
  double normal() { return normal_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  BoundingBox cell_box(int cell) {
    const double cw = static_cast<double>(spec_.image_width) / spec_.grid_cols;
    const double ch = static_cast<double>(spec_.image_height) / spec_.grid_rows;
    const double x0 = (cell % spec_.grid_cols) * cw;
    const double y0 = (cell / spec_.grid_cols) * ch;
    const double w = uniform(spec_.box_min, spec_.box_max) * cw;
    const double h = uniform(spec_.box_min, spec_.box_max) * ch;
    const double x = x0 + uniform(0.0, cw - w);
    const double y = y0 + uniform(0.0, ch - h);
    return {static_cast<float>(x), static_cast<float>(y), static_cast<float>(x + w),
            static_cast<float>(y + h)};
  }

  BoundingBox jittered(const BoundingBox& b) {
    const double w = b.width();
    const double h = b.height();
    const double j = spec_.box_jitter;
    auto clamp_x = [&](double v) { return std::clamp(v, 0.0, static_cast<double>(spec_.image_width)); };
    auto clamp_y = [&](double v) { return std::clamp(v, 0.0, static_cast<double>(spec_.image_height)); };
    return {static_cast<float>(clamp_x(b.x_min + uniform(-j, j) * w)),
            static_cast<float>(clamp_y(b.y_min + uniform(-j, j) * h)),
            static_cast<float>(clamp_x(b.x_max + uniform(-j, j) * w)),
            static_cast<float>(clamp_y(b.y_max + uniform(-j, j) * h))};
  }

  void emit(const Object& obj, const std::string& image_id, int cell, Dataset& ds) {
    const int classes = spec_.num_id_classes;
    const BoundingBox gt_box = cell_box(cell);

    DetectionRecord det;
    det.image_id = image_id;
    det.box = obj.kind == ObjectKind::kBackground ? gt_box : jittered(gt_box);

    Eigen::VectorXd center;
    double spread = 1.0;
    double alpha = 0.0;
    double noise = spec_.logit_noise;
    int hot = -1;
    switch (obj.kind) {
      case ObjectKind::kId:
        center = centers_.row(obj.class_id).transpose();
        alpha = spec_.logit_alpha;
        hot = obj.class_id;
        break;
      case ObjectKind::kOod:
        center = centers_.row(classes).transpose();
        alpha = spec_.ood_logit_alpha;
        noise = spec_.ood_logit_noise;
        hot = std::uniform_int_distribution<int>(0, classes - 1)(rng_);
        break;
      case ObjectKind::kBackground:
        center = centers_.topRows(classes).colwise().mean().transpose();
        spread = spec_.background_spread;
        noise = spec_.background_logit_noise;
        break;
    }
    det.embedding.resize(static_cast<std::size_t>(spec_.embedding_dim));
    for (int j = 0; j < spec_.embedding_dim; ++j) {
      det.embedding[static_cast<std::size_t>(j)] = static_cast<float>(center(j) + spread * normal());
    }
    det.logits.resize(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
      const double l = (c == hot ? alpha : 0.0) + noise * normal();
      det.logits[static_cast<std::size_t>(c)] = static_cast<float>(spec_.logit_scale * l);
    }
    ds.detections.push_back(std::move(det));

    if (obj.kind != ObjectKind::kBackground) {
      ds.ground_truth.push_back({image_id, gt_box, obj.class_id});
    }
  }

  const SynthSpec& spec_;
  const Eigen::MatrixXd& centers_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

}  // namespace

Eigen::MatrixXd synth_cluster_centers(const SynthSpec& spec) {
  validate_synth_spec(spec);
  const int c = spec.num_id_classes;
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(c + 1, spec.embedding_dim);
  // Pairwise distance between class means is exactly `separation`.
  const double r = spec.separation / std::sqrt(2.0);
  for (int k = 0; k < c; ++k) centers(k, k) = r;
  centers.row(c) = centers.topRows(c).colwise().mean();
  centers(c, c) = spec.ood_offset * spec.separation;
  return centers;
}

SynthDatasets generate(const SynthSpec& spec) {
  const Eigen::MatrixXd centers = synth_cluster_centers(spec);
  SynthDatasets out;
  std::array<Dataset*, 4> targets = {&out.train, &out.val, &out.closed_test, &out.open_test};
  constexpr std::array<Split, 4> splits = {Split::kTrain, Split::kVal, Split::kClosedTest,
                                           Split::kOpenTest};
#pragma omp parallel for schedule(static) num_threads(std::min(thread_cap(), 4))
  for (int s = 0; s < 4; ++s) {
    SplitGenerator gen(spec, centers, splitmix64(spec.seed * 4 + static_cast<std::uint64_t>(s)));
    const bool open = splits[static_cast<std::size_t>(s)] == Split::kOpenTest;
    const std::size_t per_class = s == 0 ? spec.train_per_class : spec.eval_per_class;
    *targets[static_cast<std::size_t>(s)] =
        gen.run(splits[static_cast<std::size_t>(s)], per_class, open ? spec.ood_count : 0,
                open ? spec.background_count : 0);
  }
  return out;
}

void write_synth(const SynthSpec& spec, const std::filesystem::path& dir) {
  validate_synth_spec(spec);
  const auto data = generate(spec);
  std::filesystem::create_directories(dir);
  write_dataset(data.train, dir / "train");
  write_dataset(data.val, dir / "val");
  write_dataset(data.closed_test, dir / "closed_test");
  write_dataset(data.open_test, dir / "open_test");
  detail::write_json_file(detail::json::parse(synth_spec_to_json(spec)), dir / "spec.json");
}

namespace {

// Field table shared by both directions of the JSON mapping.
template <typename Fn>
void for_each_field(SynthSpec& s, Fn&& fn) {
  fn("num_id_classes", s.num_id_classes);
  fn("train_per_class", s.train_per_class);
  fn("eval_per_class", s.eval_per_class);
  fn("embedding_dim", s.embedding_dim);
  fn("separation", s.separation);
  fn("ood_offset", s.ood_offset);
  fn("ood_count", s.ood_count);
  fn("background_count", s.background_count);
  fn("background_spread", s.background_spread);
  fn("logit_alpha", s.logit_alpha);
  fn("logit_noise", s.logit_noise);
  fn("ood_logit_alpha", s.ood_logit_alpha);
  fn("ood_logit_noise", s.ood_logit_noise);
  fn("background_logit_noise", s.background_logit_noise);
  fn("logit_scale", s.logit_scale);
  fn("image_width", s.image_width);
  fn("image_height", s.image_height);
  fn("grid_cols", s.grid_cols);
  fn("grid_rows", s.grid_rows);
  fn("box_min", s.box_min);
  fn("box_max", s.box_max);
  fn("box_jitter", s.box_jitter);
  fn("seed", s.seed);
}

}  // namespace

std::string synth_spec_to_json(const SynthSpec& spec) {
  SynthSpec copy = spec;
  detail::json doc;
  doc["format_version"] = "1.0";
  for_each_field(copy, [&](const char* key, const auto& value) { doc[key] = value; });
  return doc.dump(2);
}

SynthSpec synth_spec_from_json(const std::string& text) {
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::exception& e) {
    throw ArgumentError(std::string("synth spec: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ArgumentError("synth spec must be a JSON object");
  SynthSpec spec;
  std::vector<std::string> known = {"format_version"};
  for_each_field(spec, [&](const char* key, auto& value) {
    known.emplace_back(key);
    if (!doc.contains(key)) return;
    try {
      doc.at(key).get_to(value);
    } catch (const detail::json::exception& e) {
      throw ArgumentError(std::string("synth spec: bad value for '") + key + "': " + e.what());
    }
  });
  for (const auto& [key, value] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ArgumentError("synth spec: unknown field '" + key + "'");
    }
  }
  validate_synth_spec(spec);
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open synth spec '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return synth_spec_from_json(buffer.str());
}

double oracle_auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  if (id_scores.empty() || ood_scores.empty()) {
    throw UndefinedMetricError("oracle AUROC needs both score sets");
  }
  if (static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size()) > 1e6) {
    throw ArgumentError("oracle AUROC refuses more than 1e6 pairs");
  }
  std::uint64_t twice_u = 0;
  for (double a : id_scores) {
    for (double b : ood_scores) {
      if (a > b) {
        twice_u += 2;
      } else if (a == b) {
        twice_u += 1;
      }
    }
  }
  return auroc_from_counts(twice_u, id_scores.size(), ood_scores.size());
}

}  // namespace osgate
