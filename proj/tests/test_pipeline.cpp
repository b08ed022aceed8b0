// Copyright 2026 The dpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <sstream>

#include "dpmorse/pipeline.hpp"

namespace dpmorse {
namespace {

RunConfig moons_em_hard(int n) {
  RunConfig cfg;
  cfg.generator = "two_moons";
  cfg.n = n;
  cfg.method = Method::em_hard;
  cfg.k0 = 6;
  cfg.k = 2;
  return cfg;
}

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, ParsesFlatKeyValueText) {
  std::istringstream in("# comment\nmethod = em_soft\nk0=8  # trailing\n\nmorse = off\nperturb = 0.01\n");
  RunConfig cfg;
  parse_config(in, cfg);
  EXPECT_EQ(cfg.method, Method::em_soft);
  EXPECT_EQ(cfg.k0, 8);
  EXPECT_FALSE(cfg.morse);
  EXPECT_EQ(cfg.eps_perturb, 0.01);
}

TEST(Config, BadInputIsConfigError) {
  RunConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "nope", "1"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "k0", "six"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "morse", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(cfg, "method", "kmeans"), ConfigError);
  std::istringstream in("k0\n");
  EXPECT_THROW(parse_config(in, cfg), ConfigError);
}

TEST(Config, ValidationRules) {
  RunConfig cfg;
  cfg.k = 7;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.epsilon = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.method = Method::em_hard;
  EXPECT_NO_THROW(cfg.validate());
  cfg.generator = "spiral";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, ReportEchoesEverySetting) {
  const Json j = to_json(RunConfig{});
  for (const char* key : {"generator", "n", "noise", "data_seed", "method", "morse", "k0", "k", "epsilon", "delta",
                          "tau1", "tau2", "m", "perturb", "repeats", "seed"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Aggregate, SampleStandardDeviation) {
  const Aggregate a = aggregate({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(a.mean, 2.5);
  EXPECT_DOUBLE_EQ(a.std, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(aggregate({7.0}).std, 0.0);
}

TEST(Pipeline, NonPrivateMorseMergeRecoversMoons) {
  const RunReport rep = run_pipeline(moons_em_hard(200));
  ASSERT_TRUE(rep.ari_merged.has_value());
  EXPECT_EQ(rep.ari_merged->mean, 1.0);
}

TEST(Pipeline, ConvexBaselinesSplitTheMoons) {
  RunConfig cfg = moons_em_hard(200);
  cfg.morse = false;
  const RunReport off = run_pipeline(cfg);
  EXPECT_LT(off.ari_merged->mean, 1.0);
  cfg.k0 = 2;
  cfg.k = 2;
  const Dataset d = load_dataset(cfg);
  const FitResult lloyd = fit_lloyd(d, 2, 10, 0);
  EXPECT_LT(adjusted_rand_index(*d.labels, detail::nearest_center(lloyd.model.means(), d.rows)), 0.7);
}

TEST(Pipeline, ReportIsByteIdenticalOnRerun) {
  RunConfig cfg;
  cfg.n = 150;
  cfg.repeats = 3;
  cfg.seed = 42;
  const std::string first = report_text(run_pipeline(cfg).json);
  EXPECT_EQ(first, report_text(run_pipeline(cfg).json));
  cfg.threads = 3;
  EXPECT_EQ(first, report_text(run_pipeline(cfg).json));
}

TEST(Pipeline, PerRepeatSeedsAreSeedPlusIndex) {
  RunConfig cfg;
  cfg.n = 90;
  cfg.repeats = 2;
  cfg.seed = 10;
  cfg.morse = false;
  const RunReport rep = run_pipeline(cfg);
  EXPECT_EQ(rep.json["repeats"][0]["seed"], 10);
  EXPECT_EQ(rep.json["repeats"][1]["seed"], 11);
  EXPECT_EQ(rep.json["schema_version"], kReportSchemaVersion);
}

TEST(Pipeline, TooFewRowsIsDataError) {
  RunConfig cfg = moons_em_hard(400);
  Dataset d = make_two_moons(4, 0.0, 0);
  EXPECT_THROW(run_pipeline(cfg, d), DataError);
}

TEST(Sweep, EmptyGridIsConfigError) { EXPECT_THROW(sweep({}), ConfigError); }

TEST(Sweep, DuplicateKeyIsConfigError) {
  const RunConfig cfg;
  EXPECT_THROW(sweep({cfg, cfg}), ConfigError);
}

TEST(Sweep, FailedCellRecordedAndOthersRun) {
  RunConfig base;
  base.generator = "blobs";
  base.n = 90;
  base.k = 3;
  base.morse = false;
  std::vector<RunConfig> grid = expand_grid(base, {10.0, 1.0}, {2, 6}, {Method::dpmog_hard}, {false});
  const SweepResult s = sweep(grid);
  ASSERT_EQ(s.cells.size(), 4u);
  int failed = 0;
  for (const auto& c : s.cells) failed += c.report ? 0 : 1;
  EXPECT_EQ(failed, 2);  // k0 = 2 < k
  EXPECT_EQ(s.cells[0].key.epsilon, 1.0);
  EXPECT_EQ(s.json["cells"].size(), 4u);
  EXPECT_EQ(std::count(s.csv.begin(), s.csv.end(), '\n'), 5);
  EXPECT_EQ(s.csv.rfind("epsilon,k0,method,morse,status,", 0), 0u);
}

}  // namespace
}  // namespace dpmorse
