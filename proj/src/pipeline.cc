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

#include "osgate/pipeline.hpp"

#include <iomanip>
#include <ostream>

#include "json_io.hpp"
#include "osgate/assignment.hpp"
#include "osgate/dataset_io.hpp"
#include "osgate/error.hpp"
#include "osgate/model_io.hpp"

namespace osgate {

using detail::json;

ModelSet fit_models(const Dataset& train, const FitConfig& config, double match_floor,
                    FitSummary* summary) {
  validate_fit_config(config);
  CollectionSummary collected;
  const auto labeled = collect_labeled_embeddings(train, match_floor, &collected);
  const int classes = train.manifest.num_classes;
  const int dim = train.manifest.embedding_dim;

  std::vector<std::vector<std::vector<float>>> by_class(static_cast<std::size_t>(classes));
  for (const auto& e : labeled) by_class[static_cast<std::size_t>(e.class_id)].push_back(e.embedding);
  for (int c = 0; c < classes; ++c) {
    const auto n = by_class[static_cast<std::size_t>(c)].size();
    if (n < 2) {
      const auto& names = train.manifest.class_names;
      const std::string name = c < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(c)] : "";
      throw CompletenessError("class " + std::to_string(c) + (name.empty() ? "" : " (" + name + ")") +
                              " has " + std::to_string(n) +
                              " matched training embeddings; at least 2 are required");
    }
  }

  ModelSet models;
  models.num_classes = classes;
  models.embedding_dim = dim;
  for (int c = 0; c < classes; ++c) {
    const Eigen::MatrixXd samples = to_matrix(by_class[static_cast<std::size_t>(c)], dim);
    models.single.push_back(fit_single_gaussian(samples, labeled.size(), config.jitter, c));
    models.multi.push_back(fit_gmm_em(samples, config, labeled.size(), c));
  }
  validate_model_set(models);

  if (summary != nullptr) {
    summary->matched_pairs = collected.matched_pairs;
    summary->unmatched_detections = collected.unmatched_detections;
    summary->classes.clear();
    for (int c = 0; c < classes; ++c) {
      const auto& s = models.single[static_cast<std::size_t>(c)];
      const auto& m = models.multi[static_cast<std::size_t>(c)];
      summary->classes.push_back({c, s.info.sample_count, s.class_prior, s.info, m.info, m.k()});
    }
  }
  return models;
}

namespace {

json fit_info_json(const FitInfo& info) {
  return {{"requested_k", info.requested_k}, {"em_iterations", info.em_iterations},
          {"converged", info.converged},     {"degenerate", info.degenerate},
          {"sample_count", info.sample_count}, {"events", info.events}};
}

Dataset load_split(const std::filesystem::path& path, const char* flag) {
  if (path.empty()) throw ArgumentError(std::string("missing required flag ") + flag);
  return read_dataset(path);
}

}  // namespace

void cmd_fit(const RunConfig& config, std::ostream& log) {
  const Dataset train = load_split(config.train, "--train");
  FitSummary summary;
  ModelSet models = fit_models(train, config.fit, config.match_floor, &summary);
  models.train_fingerprint = dataset_fingerprint(config.train);

  std::filesystem::create_directories(config.out);
  save_models(models, config.models_path());

  json doc;
  doc["format_version"] = "1.0";
  doc["matched_pairs"] = summary.matched_pairs;
  doc["unmatched_detections"] = summary.unmatched_detections;
  doc["config"] = {{"k", config.fit.k},
                   {"jitter", config.fit.jitter},
                   {"em_max_iters", config.fit.em_max_iters},
                   {"em_tol", config.fit.em_tol},
                   {"seed", config.fit.seed},
                   {"match_floor", config.match_floor}};
  json classes = json::array();
  for (const auto& c : summary.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"samples", c.samples},
                       {"prior", c.prior},
                       {"multi_k", c.multi_k},
                       {"single", fit_info_json(c.single)},
                       {"multi", fit_info_json(c.multi)}});
    log << "class " << c.class_id << ": " << c.samples << " embeddings, prior " << c.prior
        << ", multi K=" << c.multi_k << " after " << c.multi.em_iterations << " EM iterations"
        << (c.multi.converged ? "" : " (not converged)") << '\n';
    for (const auto& e : c.multi.events) log << "  " << e << '\n';
  }
  doc["classes"] = classes;
  detail::write_json_file(doc, config.out / "fit_summary.json");
  log << "wrote " << config.models_path().string() << '\n';
}

void cmd_calibrate(const RunConfig& config, std::ostream& log) {
  const ModelSet models = load_models(config.models_path());
  const Dataset val = load_split(config.val, "--val");
  if (models.train_fingerprint != 0 &&
      dataset_fingerprint(config.val) == models.train_fingerprint) {
    log << "warning: validation data is identical to the training data; calibration will be "
           "optimistic\n";
  }
  CalibrationOptions options;
  options.prune_threshold = config.prune_threshold;
  options.policy = config.policy;
  options.match_floor = config.match_floor;
  options.use_class_priors = config.use_class_priors;
  const auto cal = calibrate(val, models, options);

  std::filesystem::create_directories(config.out);
  save_calibration(cal, config.calibration_path());
  const auto old_precision = log.precision(6);
  log << "matched validation detections: " << cal.validation_matches << '\n'
      << "T_model = " << cal.profile.t_model << "  NLL " << cal.nll_model_before << " -> "
      << cal.nll_model_after << '\n'
      << "T_gmm   = " << cal.profile.t_gmm << "  NLL " << cal.nll_gmm_before << " -> "
      << cal.nll_gmm_after << '\n';
  const auto& pt = cal.at(Mode::kPrunedTemp).thresholds;
  log << "PrunedTemp thresholds: tau_soft " << pt.tau_soft << ", tau_gmm " << pt.tau_gmm << '\n';
  log.precision(old_precision);
  log << "wrote " << config.calibration_path().string() << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  const ModelSet models = load_models(config.models_path());
  const CalibrationArtifacts cal = load_calibration(config.calibration_path());
  const Dataset closed = load_split(config.closed_test, "--closed-test");
  const Dataset open = load_split(config.open_test, "--open-test");
  EvaluationOptions options = config.evaluation;
  options.match_floor = config.match_floor;
  const auto reports = evaluate(closed, open, models, cal, options);
  write_reports(reports, options, cal, config.out);

  for (const auto& r : reports) {
    log << std::left << std::setw(11) << to_string(r.mode) << std::setw(18) << to_string(r.score);
    if (r.auroc) {
      log << "auroc " << std::fixed << std::setprecision(4) << *r.auroc;
    } else {
      log << "auroc absent (" << r.auroc_reason << ")";
    }
    if (r.auroc_bd) log << "  auroc_bd " << *r.auroc_bd;
    log << std::defaultfloat << '\n';
  }
  log << "wrote " << reports.size() << " rows to " << (config.out / "report.json").string()
      << " and report.csv\n";
}

void cmd_synth(const SynthSpec& spec, const std::filesystem::path& out, std::ostream& log) {
  write_synth(spec, out);
  log << "wrote train, val, closed_test and open_test under " << out.string() << '\n';
}

}  // namespace osgate
