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

// Command-line front end: osgate {synth,fit,calibrate,evaluate}.
//
// Exit codes: 0 success, 2 usage, 3 data validation, 4 numerical failure.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "osgate/error.hpp"
#include "osgate/pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<osgate::Mode> parse_modes(const std::vector<std::string>& names) {
  std::vector<osgate::Mode> modes;
  for (const auto& n : names) {
    if (n == "all") return {osgate::kAllModes.begin(), osgate::kAllModes.end()};
    modes.push_back(osgate::parse_mode(n));
  }
  return modes;
}

std::vector<osgate::ScoreKind> parse_scores(const std::vector<std::string>& names) {
  std::vector<osgate::ScoreKind> scores;
  for (const auto& n : names) {
    if (n == "all") {
      return {std::begin(osgate::kDefaultScoreKinds), std::end(osgate::kDefaultScoreKinds)};
    }
    scores.push_back(osgate::parse_score_kind(n));
  }
  return scores;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set detection gating: density fitting, calibration and evaluation"};
  app.require_subcommand(1);

  osgate::RunConfig cfg;
  osgate::SynthSpec spec;
  std::string spec_file;
  std::vector<std::string> modes;
  std::vector<std::string> scores;
  std::string confidence = "softmax";
  bool no_priors = false;

  auto add_floor = [&](CLI::App* cmd) {
    cmd->add_option("--match-floor", cfg.match_floor, "Minimum IoU for a match")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
  };
  auto add_out = [&](CLI::App* cmd) {
    cmd->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic open-set dataset");
  synth->add_option("--spec", spec_file, "JSON spec file (flags override its values)");
  synth->add_option("--seed", spec.seed, "Random seed");
  synth->add_option("--classes", spec.num_id_classes, "In-distribution classes");
  synth->add_option("--dim", spec.embedding_dim, "Embedding dimension");
  synth->add_option("--train-per-class", spec.train_per_class, "Training objects per class");
  synth->add_option("--eval-per-class", spec.eval_per_class, "Objects per class in eval splits");
  synth->add_option("--separation", spec.separation, "Class mean separation (cluster stds)");
  synth->add_option("--ood-offset", spec.ood_offset, "Unknown-cluster offset (separations)");
  synth->add_option("--ood-count", spec.ood_count, "Unknown objects in open_test");
  synth->add_option("--background-count", spec.background_count, "Background detections");
  synth->add_option("--logit-scale", spec.logit_scale, "Multiplier on every logit");
  add_out(synth);

  auto* fit = app.add_subcommand("fit", "Fit per-class density models");
  fit->add_option("--train", cfg.train, "Training container")->required();
  fit->add_option("--k", cfg.fit.k, "Mixture components per class")
      ->capture_default_str()
      ->check(CLI::Range(1, 4));
  fit->add_option("--jitter", cfg.fit.jitter, "Relative covariance jitter")->capture_default_str();
  fit->add_option("--em-max-iters", cfg.fit.em_max_iters, "EM iteration cap")->capture_default_str();
  fit->add_option("--em-tol", cfg.fit.em_tol, "EM relative tolerance")->capture_default_str();
  fit->add_option("--seed", cfg.fit.seed, "Random seed")->capture_default_str();
  fit->add_option("--models", cfg.models, "Model file (default <out>/models.json)");
  add_floor(fit);
  add_out(fit);

  auto* cal = app.add_subcommand("calibrate", "Learn temperatures and joint thresholds");
  cal->add_option("--val", cfg.val, "Validation container")->required();
  cal->add_option("--models", cfg.models, "Model file (default <out>/models.json)");
  cal->add_option("--calibration", cfg.calibration, "Output file (default <out>/calibration.json)");
  cal->add_option("--prune-threshold", cfg.prune_threshold, "Softmax pruning floor")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cal->add_option("--soft-quantile", cfg.policy.soft_quantile, "Quantile for tau_soft")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cal->add_option("--gmm-quantile", cfg.policy.gmm_quantile, "Quantile for tau_gmm")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  cal->add_flag("--no-priors", no_priors, "Leave class priors out of the GMM posterior");
  cal->add_option("--seed", cfg.fit.seed, "Accepted for uniformity; calibration is deterministic");
  add_floor(cal);
  add_out(cal);

  auto* eval = app.add_subcommand("evaluate", "Evaluate every mode and score");
  eval->add_option("--closed-test", cfg.closed_test, "Closed-set test container")->required();
  eval->add_option("--open-test", cfg.open_test, "Open-set test container")->required();
  eval->add_option("--models", cfg.models, "Model file (default <out>/models.json)");
  eval->add_option("--calibration", cfg.calibration,
                   "Calibration file (default <out>/calibration.json)");
  eval->add_option("--modes", modes, "Modes: Raw,Pruned,Temp,PrunedTemp or all")->delimiter(',');
  eval->add_option("--scores", scores, "Scores, comma separated, or all")->delimiter(',');
  eval->add_option("--osr-levels", cfg.evaluation.osr_levels, "OOD false-accept levels")
      ->delimiter(',');
  eval->add_option("--confidence", confidence, "mAP confidence: softmax or detector")
      ->capture_default_str();
  eval->add_option("--seed", cfg.fit.seed, "Accepted for uniformity; evaluation is deterministic");
  add_floor(eval);
  add_out(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      osgate::SynthSpec base;
      if (!spec_file.empty()) {
        base = osgate::load_synth_spec(spec_file);
        // Re-apply only the flags given on the command line.
        osgate::SynthSpec flags = spec;
        spec = base;
        if (synth->count("--seed")) spec.seed = flags.seed;
        if (synth->count("--classes")) spec.num_id_classes = flags.num_id_classes;
        if (synth->count("--dim")) spec.embedding_dim = flags.embedding_dim;
        if (synth->count("--train-per-class")) spec.train_per_class = flags.train_per_class;
        if (synth->count("--eval-per-class")) spec.eval_per_class = flags.eval_per_class;
        if (synth->count("--separation")) spec.separation = flags.separation;
        if (synth->count("--ood-offset")) spec.ood_offset = flags.ood_offset;
        if (synth->count("--ood-count")) spec.ood_count = flags.ood_count;
        if (synth->count("--background-count")) spec.background_count = flags.background_count;
        if (synth->count("--logit-scale")) spec.logit_scale = flags.logit_scale;
      }
      osgate::validate_synth_spec(spec);
      osgate::cmd_synth(spec, cfg.out, std::cout);
    } else if (fit->parsed()) {
      osgate::cmd_fit(cfg, std::cout);
    } else if (cal->parsed()) {
      cfg.use_class_priors = !no_priors;
      osgate::cmd_calibrate(cfg, std::cout);
    } else if (eval->parsed()) {
      if (!modes.empty()) cfg.evaluation.modes = parse_modes(modes);
      if (!scores.empty()) cfg.evaluation.scores = parse_scores(scores);
      cfg.evaluation.confidence = osgate::parse_confidence_source(confidence);
      osgate::cmd_evaluate(cfg, std::cout);
    }
  } catch (const osgate::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const osgate::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const osgate::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const osgate::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const osgate::FitError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const osgate::UndefinedMetricError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
