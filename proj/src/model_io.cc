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

#include "osgate/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json_io.hpp"
#include "osgate/error.hpp"

namespace osgate {

using detail::json;

namespace {

json component_to_json(const GaussianComponent& c) {
  json doc;
  doc["weight"] = c.weight;
  doc["mean"] = std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size());
  // Lower triangle, row by row.
  std::vector<double> packed;
  for (Eigen::Index r = 0; r < c.chol.rows(); ++r) {
    for (Eigen::Index k = 0; k <= r; ++k) packed.push_back(c.chol(r, k));
  }
  doc["chol_lower"] = packed;
  return doc;
}

GaussianComponent component_from_json(const json& doc, const std::string& what) {
  GaussianComponent c;
  c.weight = detail::require<double>(doc, "weight", what);
  const auto mean = detail::require<std::vector<double>>(doc, "mean", what);
  const auto packed = detail::require<std::vector<double>>(doc, "chol_lower", what);
  const auto d = static_cast<Eigen::Index>(mean.size());
  if (packed.size() != static_cast<std::size_t>(d * (d + 1) / 2)) {
    throw FormatError(what + ": chol_lower has wrong length");
  }
  c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
  c.chol = Eigen::MatrixXd::Zero(d, d);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index k = 0; k <= r; ++k) c.chol(r, k) = packed[at++];
  }
  return c;
}

json model_to_json(const ClassDensityModel& m) {
  json doc;
  doc["class_id"] = m.class_id;
  doc["class_prior"] = m.class_prior;
  doc["k"] = m.k();
  json comps = json::array();
  for (const auto& c : m.components) comps.push_back(component_to_json(c));
  doc["components"] = comps;
  json info;
  info["requested_k"] = m.info.requested_k;
  info["em_iterations"] = m.info.em_iterations;
  info["converged"] = m.info.converged;
  info["degenerate"] = m.info.degenerate;
  info["sample_count"] = m.info.sample_count;
  info["events"] = m.info.events;
  doc["fit_info"] = info;
  return doc;
}

ClassDensityModel model_from_json(const json& doc, const std::string& what) {
  ClassDensityModel m;
  m.class_id = detail::require<int>(doc, "class_id", what);
  const std::string tag = what + " class " + std::to_string(m.class_id);
  m.class_prior = detail::require<double>(doc, "class_prior", tag);
  const auto comps = detail::require<json>(doc, "components", tag);
  if (!comps.is_array()) throw FormatError(tag + ": components must be an array");
  for (const auto& c : comps) m.components.push_back(component_from_json(c, tag));
  if (doc.contains("k") && doc["k"].get<int>() != m.k()) {
    throw FormatError(tag + ": k does not match component count");
  }
  if (doc.contains("fit_info")) {
    const auto& info = doc["fit_info"];
    m.info.requested_k = info.value("requested_k", m.k());
    m.info.em_iterations = info.value("em_iterations", 0);
    m.info.converged = info.value("converged", true);
    m.info.degenerate = info.value("degenerate", false);
    m.info.sample_count = info.value("sample_count", std::size_t{0});
    m.info.events = info.value("events", std::vector<std::string>{});
  }
  return m;
}

// Orders by class id and reports the first missing class.
std::vector<ClassDensityModel> complete_list(std::vector<ClassDensityModel> list, int num_classes,
                                             const char* which) {
  std::map<int, ClassDensityModel> by_class;
  for (auto& m : list) {
    if (m.class_id < 0 || m.class_id >= num_classes) {
      throw ValidationError(std::string(which) + " model has class id " +
                            std::to_string(m.class_id) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    if (!by_class.emplace(m.class_id, std::move(m)).second) {
      throw ValidationError(std::string(which) + " model set has duplicate class " +
                            std::to_string(m.class_id));
    }
  }
  std::vector<ClassDensityModel> out;
  for (int c = 0; c < num_classes; ++c) {
    auto it = by_class.find(c);
    if (it == by_class.end()) {
      throw CompletenessError(std::string(which) + " model set missing class " + std::to_string(c) +
                              " of " + std::to_string(num_classes));
    }
    out.push_back(std::move(it->second));
  }
  return out;
}

json reference_array(const std::vector<double>& v) { return json(v); }

}  // namespace

void save_models(const ModelSet& models, const std::filesystem::path& path) {
  validate_model_set(models);
  json doc;
  doc["format_version"] = "1.0";
  doc["num_classes"] = models.num_classes;
  doc["embedding_dim"] = models.embedding_dim;
  doc["train_fingerprint"] = models.train_fingerprint;
  json single = json::array();
  json multi = json::array();
  for (const auto& m : models.single) single.push_back(model_to_json(m));
  for (const auto& m : models.multi) multi.push_back(model_to_json(m));
  doc["single"] = single;
  doc["multi"] = multi;
  detail::write_json_file(doc, path);
}

ModelSet load_models(const std::filesystem::path& path) {
  const std::string what = path.filename().string();
  if (!std::filesystem::exists(path)) throw FormatError("model file '" + path.string() + "' not found");
  const json doc = detail::read_json_file(path);
  detail::check_format_version(doc, what);

  ModelSet models;
  models.num_classes = detail::require<int>(doc, "num_classes", what);
  models.embedding_dim = detail::require<int>(doc, "embedding_dim", what);
  models.train_fingerprint = doc.value("train_fingerprint", std::uint64_t{0});
  for (const char* which : {"single", "multi"}) {
    const auto list = detail::require<json>(doc, which, what);
    if (!list.is_array()) throw FormatError(what + ": '" + which + "' must be an array");
    std::vector<ClassDensityModel> parsed;
    for (const auto& m : list) parsed.push_back(model_from_json(m, what));
    auto complete = complete_list(std::move(parsed), models.num_classes, which);
    (std::string(which) == "single" ? models.single : models.multi) = std::move(complete);
  }
  validate_model_set(models);
  return models;
}

void save_calibration(const CalibrationArtifacts& cal, const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = "1.0";
  json profile;
  profile["t_model"] = cal.profile.t_model;
  profile["t_gmm"] = cal.profile.t_gmm;
  profile["prune_threshold"] = cal.profile.prune_threshold;
  profile["mode"] = std::string(to_string(cal.profile.mode));
  profile["use_class_priors"] = cal.profile.use_class_priors;
  doc["profile"] = profile;
  doc["nll"] = {{"model_before", cal.nll_model_before},
                {"model_after", cal.nll_model_after},
                {"gmm_before", cal.nll_gmm_before},
                {"gmm_after", cal.nll_gmm_after}};
  doc["validation_matches"] = cal.validation_matches;
  doc["match_floor"] = cal.match_floor;
  json modes = json::array();
  for (const auto& m : cal.modes) {
    json entry;
    entry["mode"] = std::string(to_string(m.mode));
    entry["tau_soft"] = m.thresholds.tau_soft;
    entry["tau_gmm"] = m.thresholds.tau_gmm;
    entry["soft_quantile"] = m.thresholds.policy.soft_quantile;
    entry["gmm_quantile"] = m.thresholds.policy.gmm_quantile;
    entry["reference_soft"] = reference_array(m.reference.sorted_soft());
    entry["reference_neg_entropy"] = reference_array(m.reference.sorted_neg_entropy());
    modes.push_back(entry);
  }
  doc["modes"] = modes;
  detail::write_json_file(doc, path);
}

CalibrationArtifacts load_calibration(const std::filesystem::path& path) {
  const std::string what = path.filename().string();
  if (!std::filesystem::exists(path)) {
    throw FormatError("calibration file '" + path.string() + "' not found");
  }
  const json doc = detail::read_json_file(path);
  detail::check_format_version(doc, what);

  CalibrationArtifacts cal;
  const auto profile = detail::require<json>(doc, "profile", what);
  cal.profile.t_model = detail::require<double>(profile, "t_model", what);
  cal.profile.t_gmm = detail::require<double>(profile, "t_gmm", what);
  cal.profile.prune_threshold = detail::require<double>(profile, "prune_threshold", what);
  cal.profile.use_class_priors = profile.value("use_class_priors", true);
  try {
    cal.profile.mode = parse_mode(profile.value("mode", std::string("PrunedTemp")));
  } catch (const ArgumentError& e) {
    throw FormatError(what + ": " + e.what());
  }
  if (!(cal.profile.t_model > 0.0) || !(cal.profile.t_gmm > 0.0) ||
      !std::isfinite(cal.profile.t_model) || !std::isfinite(cal.profile.t_gmm)) {
    throw ValidationError(what + ": temperatures must be positive and finite");
  }
  if (doc.contains("nll")) {
    const auto& nll = doc["nll"];
    cal.nll_model_before = nll.value("model_before", 0.0);
    cal.nll_model_after = nll.value("model_after", 0.0);
    cal.nll_gmm_before = nll.value("gmm_before", 0.0);
    cal.nll_gmm_after = nll.value("gmm_after", 0.0);
  }
  cal.validation_matches = doc.value("validation_matches", std::size_t{0});
  cal.match_floor = doc.value("match_floor", 0.5);

  const auto modes = detail::require<json>(doc, "modes", what);
  for (const auto& entry : modes) {
    ModeCalibration m;
    try {
      m.mode = parse_mode(detail::require<std::string>(entry, "mode", what));
    } catch (const ArgumentError& e) {
      throw FormatError(what + ": " + e.what());
    }
    m.thresholds.tau_soft = detail::require<double>(entry, "tau_soft", what);
    m.thresholds.tau_gmm = detail::require<double>(entry, "tau_gmm", what);
    m.thresholds.policy.soft_quantile = detail::require<double>(entry, "soft_quantile", what);
    m.thresholds.policy.gmm_quantile = detail::require<double>(entry, "gmm_quantile", what);
    try {
      m.reference = ValidationReference::from_sorted(
          detail::require<std::vector<double>>(entry, "reference_soft", what),
          detail::require<std::vector<double>>(entry, "reference_neg_entropy", what));
    } catch (const ConfigError& e) {
      throw FormatError(what + ": " + e.what());
    }
    cal.modes.push_back(std::move(m));
  }
  return cal;
}

}  // namespace osgate
