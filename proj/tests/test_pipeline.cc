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

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "json.hpp"
#include "osgate/dataset_io.hpp"
#include "osgate/error.hpp"
#include "osgate/model_io.hpp"
#include "osgate/pipeline.hpp"
#include "osgate/synthgen.hpp"
#include "test_support.hpp"

namespace osgate {
namespace {

using testing::TempDir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct CliResult {
  int code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const TempDir& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd =
      std::string(OSGATE_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.train_per_class = 400;
  s.eval_per_class = 200;
  s.ood_count = 200;
  s.background_count = 150;
  s.embedding_dim = 12;
  s.seed = 2;
  return s;
}

RunConfig config_for(const TempDir& dir) {
  RunConfig cfg;
  cfg.train = dir / "data/train";
  cfg.val = dir / "data/val";
  cfg.closed_test = dir / "data/closed_test";
  cfg.open_test = dir / "data/open_test";
  cfg.out = dir / "run";
  cfg.fit.k = 2;
  return cfg;
}

TEST(Pipeline, LibraryStagesEndToEnd) {
  TempDir dir;
  std::ostringstream log;
  cmd_synth(small_spec(), dir / "data", log);
  for (const char* split : {"train", "val", "closed_test", "open_test"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / split / "manifest.json"));
  }
  const auto cfg = config_for(dir);
  cmd_fit(cfg, log);
  const auto models = load_models(cfg.models_path());
  EXPECT_EQ(models.num_classes, 2);
  EXPECT_EQ(models.train_fingerprint, dataset_fingerprint(cfg.train));
  const auto summary = nlohmann::json::parse(slurp(cfg.out / "fit_summary.json"));
  EXPECT_EQ(summary["classes"].size(), 2u);
  EXPECT_EQ(summary["classes"][0]["samples"], 400);

  cmd_calibrate(cfg, log);
  const auto cal = load_calibration(cfg.calibration_path());
  // Default logits are calibrated at T = 1; 400 validation samples pin it only loosely.
  EXPECT_GT(cal.profile.t_model, 0.5);
  EXPECT_LT(cal.profile.t_model, 2.0);
  EXPECT_LE(cal.nll_model_after, cal.nll_model_before);
  EXPECT_NE(log.str().find("NLL"), std::string::npos);
  EXPECT_EQ(log.str().find("warning"), std::string::npos);

  cmd_evaluate(cfg, log);
  const auto report = nlohmann::json::parse(slurp(cfg.out / "report.json"));
  EXPECT_EQ(report["rows"].size(), 28u);
  const auto csv = slurp(cfg.out / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 29);
}

TEST(Pipeline, FitRerunIsByteIdentical) {
  TempDir dir;
  std::ostringstream log;
  cmd_synth(small_spec(), dir / "data", log);
  auto cfg = config_for(dir);
  cmd_fit(cfg, log);
  const auto first = slurp(cfg.models_path());
  cmd_fit(cfg, log);
  EXPECT_EQ(slurp(cfg.models_path()), first);
  cmd_calibrate(cfg, log);
  const auto cal = slurp(cfg.calibration_path());
  cmd_calibrate(cfg, log);
  EXPECT_EQ(slurp(cfg.calibration_path()), cal);
}

TEST(Pipeline, MissingClassIsHardError) {
  TempDir dir;
  auto spec = small_spec();
  auto data = generate(spec);
  std::erase_if(data.train.ground_truth, [](const auto& g) { return g.class_id == 1; });
  write_dataset(data.train, dir / "train");
  RunConfig cfg;
  cfg.train = dir / "train";
  cfg.out = dir / "run";
  std::ostringstream log;
  try {
    cmd_fit(cfg, log);
    FAIL() << "expected CompletenessError";
  } catch (const CompletenessError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(Pipeline, CalibrateOnTrainingDataWarns) {
  TempDir dir;
  std::ostringstream log;
  cmd_synth(small_spec(), dir / "data", log);
  auto cfg = config_for(dir);
  cmd_fit(cfg, log);
  cfg.val = cfg.train;
  std::ostringstream cal_log;
  cmd_calibrate(cfg, cal_log);
  EXPECT_NE(cal_log.str().find("warning"), std::string::npos);
}

TEST(Pipeline, MissingModelFileIsFormatError) {
  TempDir dir;
  std::ostringstream log;
  cmd_synth(small_spec(), dir / "data", log);
  auto cfg = config_for(dir);
  EXPECT_THROW(cmd_calibrate(cfg, log), FormatError);
}

TEST(Cli, FullPipelineAndExitCodes) {
  TempDir dir;
  const std::string data = (dir / "data").string();
  const std::string run = (dir / "run").string();
  auto r = run_cli("synth --seed 3 --dim 12 --train-per-class 300 --eval-per-class 150 "
                   "--ood-count 150 --background-count 100 --out " + data, dir);
  ASSERT_EQ(r.code, 0) << r.output;
  r = run_cli("fit --train " + data + "/train --k 2 --out " + run, dir);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto models = slurp(dir / "run/models.json");
  r = run_cli("fit --train " + data + "/train --k 2 --out " + run, dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(dir / "run/models.json"), models);

  r = run_cli("calibrate --val " + data + "/val --out " + run, dir);
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("T_model"), std::string::npos);

  r = run_cli("evaluate --closed-test " + data + "/closed_test --open-test " + data +
                  "/open_test --modes Raw --scores softmax --out " + run,
              dir);
  ASSERT_EQ(r.code, 0) << r.output;
  auto report = nlohmann::json::parse(slurp(dir / "run/report.json"));
  EXPECT_EQ(report["rows"].size(), 1u);

  // Closed set used as the open set: AUROC is absent, the run still succeeds.
  r = run_cli("evaluate --closed-test " + data + "/closed_test --open-test " + data +
                  "/closed_test --out " + run,
              dir);
  ASSERT_EQ(r.code, 0) << r.output;
  report = nlohmann::json::parse(slurp(dir / "run/report.json"));
  EXPECT_EQ(report["rows"].size(), 28u);
  EXPECT_TRUE(report["rows"][0]["auroc"].is_null());
  EXPECT_FALSE(report["rows"][0]["os_map"].is_null());

  EXPECT_EQ(run_cli("fit --k 2", dir).code, 2);
  EXPECT_EQ(run_cli("fit --train " + data + "/train --k 9", dir).code, 2);
  EXPECT_EQ(run_cli("synth --ood-count -5 --out " + (dir / "bad").string(), dir).code, 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "bad"));
  EXPECT_EQ(run_cli("evaluate --closed-test " + data + "/closed_test --open-test " + data +
                        "/open_test --modes Sideways --out " + run,
                    dir)
                .code,
            2);
  EXPECT_EQ(run_cli("calibrate --val " + data + "/val --models " + run + "/nope.json --out " + run,
                    dir)
                .code,
            3);
  EXPECT_EQ(run_cli("fit --train " + (dir / "missing").string() + " --out " + run, dir).code, 3);
}

TEST(Cli, SynthIsIdempotent) {
  TempDir dir;
  const std::string args = "synth --seed 11 --dim 6 --train-per-class 50 --eval-per-class 20 "
                           "--ood-count 20 --background-count 10 --out ";
  ASSERT_EQ(run_cli(args + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(run_cli(args + (dir / "b").string(), dir).code, 0);
  for (const char* f : {"train/detections.bin", "open_test/groundtruth.bin",
                        "open_test/manifest.json", "spec.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  // A spec file supplies defaults and flags override it.
  ASSERT_EQ(run_cli("synth --spec " + (dir / "a/spec.json").string() + " --seed 12 --out " +
                        (dir / "c").string(),
                    dir)
                .code,
            0);
  const auto spec = load_synth_spec(dir / "c/spec.json");
  EXPECT_EQ(spec.seed, 12u);
  EXPECT_EQ(spec.embedding_dim, 6);
}

}  // namespace
}  // namespace osgate
