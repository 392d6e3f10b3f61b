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

#include "osgate/evaluation.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "json_io.hpp"
#include "osgate/error.hpp"

namespace osgate {

using detail::json;

std::string_view to_string(ConfidenceSource source) {
  return source == ConfidenceSource::kDetector ? "detector" : "softmax";
}

ConfidenceSource parse_confidence_source(std::string_view name) {
  if (name == "softmax") return ConfidenceSource::kSoftmax;
  if (name == "detector") return ConfidenceSource::kDetector;
  throw ArgumentError("unknown confidence source '" + std::string(name) + "'");
}

namespace {

void check_dims(const Dataset& ds, const ModelSet& models, const char* name) {
  if (ds.manifest.num_classes != models.num_classes ||
      ds.manifest.embedding_dim != models.embedding_dim) {
    throw ValidationError(std::string(name) + " does not match the model dimensions (" +
                          std::to_string(ds.manifest.num_classes) + " classes, dim " +
                          std::to_string(ds.manifest.embedding_dim) + " vs " +
                          std::to_string(models.num_classes) + ", " +
                          std::to_string(models.embedding_dim) + ")");
  }
}

int argmax(const std::vector<float>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Scores and pruning mask for one dataset under one mode.
struct ScoredSplit {
  std::vector<ScoreBundle> bundles;
  std::vector<std::size_t> kept;
};

ScoredSplit score_split(const Dataset& ds, const ScoringContext& ctx, const ModeConfig& cfg) {
  ScoredSplit out;
  out.bundles = score_detections(ds.detections, ctx);
  if (cfg.prune) {
    // Pruning always looks at the untempered softmax.
    std::vector<double> raw(ds.detections.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      raw[i] = score_softmax_family(std::span<const float>(ds.detections[i].logits), 1.0).conf;
    }
    out.kept = prune(raw, cfg.prune_threshold);
  } else {
    out.kept.resize(ds.detections.size());
    for (std::size_t i = 0; i < out.kept.size(); ++i) out.kept[i] = i;
  }
  return out;
}

struct MapOutcome {
  std::optional<double> value;
  std::string reason;
  std::vector<int> absent;
};

MapOutcome dataset_map(const Dataset& ds, const ScoredSplit& scored, ConfidenceSource source) {
  std::unordered_map<std::string, std::size_t> image_index;
  auto index_of = [&](const std::string& id) {
    return image_index.emplace(id, image_index.size()).first->second;
  };
  std::vector<MapDetection> dets;
  dets.reserve(scored.kept.size());
  for (auto i : scored.kept) {
    const auto& d = ds.detections[i];
    double conf = scored.bundles[i].softmax_conf;
    if (source == ConfidenceSource::kDetector) {
      if (!d.detector_score) {
        throw ConfigError("detection " + std::to_string(i) + " has no detector score");
      }
      conf = *d.detector_score;
    }
    dets.push_back({index_of(d.image_id), d.box, argmax(d.logits), conf, i});
  }
  std::vector<MapGroundTruth> gts;
  for (const auto& g : ds.ground_truth) {
    if (!g.is_ood()) gts.push_back({index_of(g.image_id), g.box, g.class_id});
  }
  MapOutcome out;
  const auto r = map_50_95(dets, gts, ds.manifest.num_classes);
  out.value = r.map;
  out.absent = r.absent_classes;
  if (!r.map) out.reason = "no in-distribution ground truth";
  return out;
}

DetectionCounts count(const std::vector<std::size_t>& kept, std::size_t total,
                      const std::vector<OodLabel>* labels) {
  DetectionCounts c;
  c.total = total;
  c.kept = kept.size();
  if (labels == nullptr) return c;
  for (auto i : kept) {
    switch ((*labels)[i]) {
      case OodLabel::kIdMatched: ++c.id; break;
      case OodLabel::kOodMatched: ++c.ood; break;
      case OodLabel::kBackground: ++c.background; break;
    }
  }
  return c;
}

std::optional<double> accept_rate(const std::vector<ScoreBundle>& bundles,
                                  const std::vector<std::size_t>& kept,
                                  const std::vector<OodLabel>& labels, OodLabel which,
                                  const JointThresholds& thresholds) {
  std::size_t n = 0;
  std::size_t accepted = 0;
  for (auto i : kept) {
    if (labels[i] != which) continue;
    ++n;
    if (joint_decide(bundles[i], thresholds) == Decision::kId) ++accepted;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(accepted) / static_cast<double>(n);
}

std::vector<EvaluationReport> evaluate_with_labels(const Dataset& closed_test,
                                                   const Dataset& open_test,
                                                   const ModelSet& models,
                                                   const CalibrationArtifacts& calibration,
                                                   Mode mode, const EvaluationOptions& options,
                                                   const std::vector<OodLabel>& labels) {
  const auto& calibrated = calibration.at(mode);
  const auto cfg = calibration.mode_matrix().at(mode);
  const ScoringContext ctx{models.single, models.multi, cfg.t_model, cfg.t_gmm,
                           calibration.profile.use_class_priors};

  const auto open = score_split(open_test, ctx, cfg);
  const auto closed = score_split(closed_test, ctx, cfg);
  const auto cs = dataset_map(closed_test, closed, options.confidence);
  const auto os = dataset_map(open_test, open, options.confidence);

  std::vector<EvaluationReport> reports;
  for (ScoreKind kind : options.scores) {
    EvaluationReport r;
    r.mode = mode;
    r.score = kind;
    r.mode_config = cfg;
    r.thresholds = calibrated.thresholds;
    r.match_floor = options.match_floor;
    r.use_class_priors = calibration.profile.use_class_priors;
    r.confidence = options.confidence;
    r.open_counts = count(open.kept, open_test.detections.size(), &labels);
    r.closed_counts = count(closed.kept, closed_test.detections.size(), nullptr);
    r.cs_map = cs.value;
    r.cs_map_reason = cs.reason;
    r.cs_map_absent_classes = cs.absent;
    r.os_map = os.value;
    r.os_map_reason = os.reason;
    r.os_map_absent_classes = os.absent;

    std::vector<double> scores;
    std::vector<OodLabel> kept_labels;
    std::vector<double> id, ood;
    scores.reserve(open.kept.size());
    for (auto i : open.kept) {
      const double s = oriented_score(open.bundles[i], kind, &calibrated.reference);
      scores.push_back(s);
      kept_labels.push_back(labels[i]);
      if (labels[i] == OodLabel::kIdMatched) id.push_back(s);
      if (labels[i] == OodLabel::kOodMatched) ood.push_back(s);
    }
    const auto proto = auroc_protocols(kept_labels, scores);
    r.auroc = proto.auroc;
    r.auroc_bd = proto.auroc_bd;
    r.auroc_reason = proto.auroc_reason;
    r.auroc_bd_reason = proto.auroc_bd_reason;
    if (!id.empty() && !ood.empty()) {
      r.tpr_at_osr = tpr_at_osr(id, ood, options.osr_levels);
      r.roc = roc_curve(id, ood);
    } else {
      r.tpr_reason = proto.auroc_reason;
    }
    if (kind == ScoreKind::kJoint) {
      JointRuleRates rates;
      rates.id_accept = accept_rate(open.bundles, open.kept, labels, OodLabel::kIdMatched,
                                    calibrated.thresholds);
      rates.ood_accept = accept_rate(open.bundles, open.kept, labels, OodLabel::kOodMatched,
                                     calibrated.thresholds);
      rates.background_accept = accept_rate(open.bundles, open.kept, labels,
                                            OodLabel::kBackground, calibrated.thresholds);
      r.joint_rule = rates;
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

void check_inputs(const Dataset& closed_test, const Dataset& open_test, const ModelSet& models,
                  const EvaluationOptions& options) {
  validate_model_set(models);
  check_dims(closed_test, models, "closed_test");
  check_dims(open_test, models, "open_test");
  if (options.scores.empty()) throw ArgumentError("no scores requested");
  if (options.modes.empty()) throw ArgumentError("no modes requested");
}

}  // namespace

std::vector<EvaluationReport> evaluate_mode(const Dataset& closed_test, const Dataset& open_test,
                                            const ModelSet& models,
                                            const CalibrationArtifacts& calibration, Mode mode,
                                            const EvaluationOptions& options) {
  check_inputs(closed_test, open_test, models, options);
  const auto labels = label_detections(open_test, options.match_floor);
  return evaluate_with_labels(closed_test, open_test, models, calibration, mode, options, labels);
}

std::vector<EvaluationReport> evaluate(const Dataset& closed_test, const Dataset& open_test,
                                       const ModelSet& models,
                                       const CalibrationArtifacts& calibration,
                                       const EvaluationOptions& options) {
  check_inputs(closed_test, open_test, models, options);
  const auto labels = label_detections(open_test, options.match_floor);
  std::vector<EvaluationReport> all;
  for (Mode mode : options.modes) {
    auto rows =
        evaluate_with_labels(closed_test, open_test, models, calibration, mode, options, labels);
    std::move(rows.begin(), rows.end(), std::back_inserter(all));
  }
  return all;
}

namespace {

std::string number(double v) { return json(v).dump(); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json counts_json(const DetectionCounts& c) {
  return {{"total", c.total}, {"kept", c.kept}, {"id", c.id}, {"ood", c.ood},
          {"background", c.background}};
}

std::vector<std::size_t> decimate(std::size_t n, std::size_t keep) {
  std::vector<std::size_t> idx;
  if (keep == 0 || n <= keep) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t i = (k * (n - 1) + (keep - 1) / 2) / (keep - 1);
    if (idx.empty() || idx.back() != i) idx.push_back(i);
  }
  return idx;
}

json report_json(const EvaluationReport& r, std::size_t roc_points) {
  json row;
  row["mode"] = std::string(to_string(r.mode));
  row["score"] = std::string(to_string(r.score));
  row["auroc"] = optional_number(r.auroc);
  row["auroc_bd"] = optional_number(r.auroc_bd);
  if (!r.auroc) row["auroc_reason"] = r.auroc_reason;
  if (!r.auroc_bd) row["auroc_bd_reason"] = r.auroc_bd_reason;
  json tpr = json::array();
  for (const auto& p : r.tpr_at_osr) {
    tpr.push_back({{"level", p.level}, {"threshold", p.threshold}, {"tpr", p.tpr}});
  }
  row["tpr_at_osr"] = tpr;
  if (r.tpr_at_osr.empty()) row["tpr_at_osr_reason"] = r.tpr_reason;
  row["cs_map"] = optional_number(r.cs_map);
  row["os_map"] = optional_number(r.os_map);
  if (!r.cs_map) row["cs_map_reason"] = r.cs_map_reason;
  if (!r.os_map) row["os_map_reason"] = r.os_map_reason;
  row["cs_map_absent_classes"] = r.cs_map_absent_classes;
  row["os_map_absent_classes"] = r.os_map_absent_classes;
  row["open_counts"] = counts_json(r.open_counts);
  row["closed_counts"] = counts_json(r.closed_counts);
  row["config"] = {{"prune", r.mode_config.prune},
                   {"prune_threshold", r.mode_config.prune_threshold},
                   {"t_model", r.mode_config.t_model},
                   {"t_gmm", r.mode_config.t_gmm},
                   {"tau_soft", r.thresholds.tau_soft},
                   {"tau_gmm", r.thresholds.tau_gmm},
                   {"soft_quantile", r.thresholds.policy.soft_quantile},
                   {"gmm_quantile", r.thresholds.policy.gmm_quantile},
                   {"match_floor", r.match_floor},
                   {"use_class_priors", r.use_class_priors},
                   {"confidence", std::string(to_string(r.confidence))}};
  if (r.joint_rule) {
    row["joint_rule"] = {{"id_accept", optional_number(r.joint_rule->id_accept)},
                         {"ood_accept", optional_number(r.joint_rule->ood_accept)},
                         {"background_accept", optional_number(r.joint_rule->background_accept)}};
  }
  if (!r.roc.tpr.empty()) {
    json fpr = json::array();
    json tpr_pts = json::array();
    for (auto i : decimate(r.roc.tpr.size(), roc_points)) {
      fpr.push_back(r.roc.fpr[i]);
      tpr_pts.push_back(r.roc.tpr[i]);
    }
    row["roc"] = {{"fpr", fpr}, {"tpr", tpr_pts}, {"points_total", r.roc.tpr.size()}};
  }
  return row;
}

}  // namespace

std::vector<std::string> report_csv_columns(std::span<const double> osr_levels) {
  std::vector<std::string> cols = {"mode", "score", "auroc", "auroc_bd"};
  for (double level : osr_levels) cols.push_back("tpr_at_" + number(level));
  for (const char* c :
       {"cs_map", "os_map", "open_total", "open_kept", "n_id", "n_ood", "n_background",
        "closed_total", "closed_kept", "prune", "prune_threshold", "t_model", "t_gmm", "tau_soft",
        "tau_gmm", "soft_quantile", "gmm_quantile", "match_floor", "use_class_priors",
        "confidence"}) {
    cols.emplace_back(c);
  }
  return cols;
}

std::string reports_to_json(std::span<const EvaluationReport> reports,
                            const EvaluationOptions& options,
                            const CalibrationArtifacts& calibration) {
  json doc;
  doc["format_version"] = "1.0";
  json modes = json::array();
  for (Mode m : options.modes) modes.push_back(std::string(to_string(m)));
  json scores = json::array();
  for (ScoreKind s : options.scores) scores.push_back(std::string(to_string(s)));
  doc["config"] = {{"modes", modes},
                   {"scores", scores},
                   {"match_floor", options.match_floor},
                   {"osr_levels", options.osr_levels},
                   {"confidence", std::string(to_string(options.confidence))},
                   {"t_model", calibration.profile.t_model},
                   {"t_gmm", calibration.profile.t_gmm},
                   {"prune_threshold", calibration.profile.prune_threshold},
                   {"use_class_priors", calibration.profile.use_class_priors},
                   {"validation_matches", calibration.validation_matches}};
  json rows = json::array();
  for (const auto& r : reports) rows.push_back(report_json(r, options.roc_points));
  doc["rows"] = rows;
  return doc.dump(2) + "\n";
}

std::string reports_to_csv(std::span<const EvaluationReport> reports,
                           std::span<const double> osr_levels) {
  std::ostringstream out;
  const auto cols = report_csv_columns(osr_levels);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? number(*v) : std::string(); };
  for (const auto& r : reports) {
    std::vector<std::string> cells = {std::string(to_string(r.mode)),
                                      std::string(to_string(r.score)), opt(r.auroc),
                                      opt(r.auroc_bd)};
    for (double level : osr_levels) {
      std::string cell;
      for (const auto& p : r.tpr_at_osr) {
        if (p.level == level) cell = number(p.tpr);
      }
      cells.push_back(cell);
    }
    const auto& c = r.mode_config;
    for (auto v : {opt(r.cs_map), opt(r.os_map), std::to_string(r.open_counts.total),
                   std::to_string(r.open_counts.kept), std::to_string(r.open_counts.id),
                   std::to_string(r.open_counts.ood), std::to_string(r.open_counts.background),
                   std::to_string(r.closed_counts.total), std::to_string(r.closed_counts.kept),
                   std::string(c.prune ? "1" : "0"), number(c.prune_threshold), number(c.t_model),
                   number(c.t_gmm), number(r.thresholds.tau_soft), number(r.thresholds.tau_gmm),
                   number(r.thresholds.policy.soft_quantile),
                   number(r.thresholds.policy.gmm_quantile), number(r.match_floor),
                   std::string(r.use_class_priors ? "1" : "0"),
                   std::string(to_string(r.confidence))}) {
      cells.push_back(v);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
  return out.str();
}

void write_reports(std::span<const EvaluationReport> reports, const EvaluationOptions& options,
                   const CalibrationArtifacts& calibration, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
  };
  write(dir / "report.json", reports_to_json(reports, options, calibration));
  write(dir / "report.csv", reports_to_csv(reports, options.osr_levels));
}

}  // namespace osgate
