// Copyright 2026 The FedCL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fedcl/harness/config.hpp"
#include "fedcl/harness/experiment.hpp"

namespace fedcl::harness {
namespace {

const char* kMinimal = R"(
data:
  class_counts: [40, 30, 20, 10]
strategies:
  - name: naive
)";

std::string error_of(const std::string& text, ConfigError::Kind* kind = nullptr) {
  try {
    parse_config_text(text, "test.yaml");
  } catch (const ConfigError& e) {
    if (kind) *kind = e.kind();
    return e.what();
  }
  return "";
}

ExperimentConfig tiny(std::size_t runs = 1) {
  ExperimentConfig cfg = parse_config_text(R"(
master_seed: 3
data:
  feature_dim: 4
  class_counts: [30, 30, 20, 10]
federation: {nodes: 2, rounds: 2, local_epochs: 2}
strategies:
  - {name: naive}
  - {name: ewc, lambda: 5}
  - {name: cumulative}
)");
  cfg.runs_per_strategy = runs;
  return cfg;
}

TEST(Config, MinimalConfigGetsProtocolDefaults) {
  const ExperimentConfig cfg = parse_config_text(kMinimal);
  EXPECT_EQ(cfg.federation.nodes, 5u);
  EXPECT_EQ(cfg.federation.rounds, 20u);
  EXPECT_EQ(cfg.federation.local_epochs, 50u);
  EXPECT_EQ(cfg.runs_per_strategy, 1u);
  ASSERT_EQ(cfg.strategies.size(), 1u);
  EXPECT_EQ(cfg.strategies[0].label, "naive");
  EXPECT_EQ(cfg.model_spec().input_dim(), 8u);
  EXPECT_EQ(cfg.model_spec().class_count(), 4u);
}

TEST(Config, StrategyHyperparameters) {
  const ExperimentConfig cfg = parse_config_text(R"(
strategies:
  - {name: ewc, lambda: 3.5}
  - {name: replay, buffer_capacity: 50, mix_fraction: 0.25}
  - {name: lwf, label: distill, temperature: 4, alpha: 0.2}
)");
  EXPECT_EQ(std::get<EwcStrategy>(cfg.strategies[0].kind).lambda, 3.5);
  EXPECT_EQ(std::get<ReplayStrategy>(cfg.strategies[1].kind).buffer_capacity, 50u);
  EXPECT_EQ(std::get<ReplayStrategy>(cfg.strategies[1].kind).mix_fraction, 0.25);
  EXPECT_EQ(cfg.strategies[2].label, "distill");
  EXPECT_EQ(std::get<LwfStrategy>(cfg.strategies[2].kind).temperature, 4.0);
}

TEST(Config, NegativeLambdaNamesTheField) {
  ConfigError::Kind kind{};
  const std::string msg = error_of("strategies:\n  - {name: ewc, lambda: -1}\n", &kind);
  EXPECT_EQ(kind, ConfigError::Kind::validation);
  EXPECT_NE(msg.find("strategies[0].lambda"), std::string::npos) << msg;
  EXPECT_NE(msg.find("test.yaml:2"), std::string::npos) << msg;
}

TEST(Config, UnknownStrategyListsValidNames) {
  const std::string msg = error_of("strategies:\n  - name: dropout\n");
  for (const char* n : {"naive", "ewc", "replay", "cumulative", "lwf"})
    EXPECT_NE(msg.find(n), std::string::npos) << msg;
}

TEST(Config, ErrorKindsHaveDistinctExitCodes) {
  ConfigError::Kind kind{};
  error_of("strategies: [name: naive\n", &kind);
  EXPECT_EQ(kind, ConfigError::Kind::syntax);
  try {
    parse_config("/nonexistent/fedcl.yaml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.kind(), ConfigError::Kind::missing_file);
    EXPECT_EQ(e.exit_code(), 6);
  }
  EXPECT_EQ(ConfigError(ConfigError::Kind::validation, "").exit_code(), 2);
  EXPECT_EQ(ConfigError(ConfigError::Kind::syntax, "").exit_code(), 5);
}

TEST(Config, ValidationFailures) {
  EXPECT_NE(error_of("strategies: []\n"), "");
  EXPECT_NE(error_of("runs_per_strategy: 0\nstrategies: [{name: naive}]\n"), "");
  EXPECT_NE(error_of("frobnicate: 1\nstrategies: [{name: naive}]\n").find("master_seed"), std::string::npos);
  EXPECT_NE(error_of("data: {tasks: {groups: [[0, 1], [1, 2]]}}\nstrategies: [{name: naive}]\n"), "");
  EXPECT_NE(error_of("data: {tasks: {groups: [[0, 9]]}}\nstrategies: [{name: naive}]\n"), "");
  EXPECT_NE(error_of("strategies: [{name: naive}, {name: naive}]\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("federation: {participation: 1.5}\nstrategies: [{name: naive}]\n"), "");
  EXPECT_EQ(error_of("strategies: [{name: naive}, {name: naive, label: again}]\n"), "");
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"acceptance.yaml", "protocol.yaml", "smoke.yaml"})
    EXPECT_NO_THROW(parse_config(std::filesystem::path(FEDCL_CONFIG_DIR) / name)) << name;
}

TEST(Table, CellFormat) {
  EXPECT_EQ(format_cell({0.978, 0.0042}, false), "97.8 ± 0.42");
  EXPECT_EQ(format_cell({0.5, 0.0}, true), "50.0 ± 0.00*");
}

TEST(Experiment, TinySmokeRun) {
  ExperimentConfig cfg = tiny();
  cfg.strategies.resize(1);
  const ExperimentReport rep = run_experiment(cfg);
  ASSERT_EQ(rep.strategies.size(), 1u);
  ASSERT_TRUE(rep.strategies[0].aggregate);
  EXPECT_EQ(rep.strategies[0].aggregate->runs, 1u);
  EXPECT_TRUE(rep.strategies[0].aggregate->std_undefined);
  EXPECT_TRUE(rep.failures.empty());
  const std::string table = render_table(rep);
  EXPECT_NE(table.find("± 0.00*"), std::string::npos) << table;
  EXPECT_NE(table.find("* single run"), std::string::npos) << table;
}

TEST(Experiment, TableRowsFollowConfigOrder) {
  const ExperimentReport rep = run_experiment(tiny());
  const std::string table = render_table(rep);
  const auto a = table.find("\nnaive"), b = table.find("\newc"), c = table.find("\ncumulative †");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  ASSERT_NE(c, std::string::npos) << table;
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_NE(table.find("† retains"), std::string::npos);
}

TEST(Experiment, CurveRowCount) {
  const ExperimentConfig cfg = tiny(2);
  const ExperimentReport rep = run_experiment(cfg);
  const std::string csv = render_curves(rep);
  const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  EXPECT_EQ(lines - 1, cfg.strategies.size() * cfg.runs_per_strategy * rep.tasks * cfg.federation.rounds);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "strategy,run,task,round,global_accuracy");
}

TEST(Experiment, JsonRoundTripRendersTheSameTable) {
  const ExperimentReport rep = run_experiment(tiny(2));
  const auto j = nlohmann::json::parse(to_json(rep).dump(2));
  const ExperimentReport back = from_json(j);
  EXPECT_EQ(render_table(back), render_table(rep));
  EXPECT_EQ(render_curves(back), render_curves(rep));
}

TEST(Experiment, DeterministicAcrossRunsAndThreadCounts) {
  const ExperimentConfig cfg = tiny(2);
  const ExperimentReport a = run_experiment(cfg, 1), b = run_experiment(cfg, 3);
  EXPECT_EQ(strip_wall_time(to_json(a)).dump(2), strip_wall_time(to_json(b)).dump(2));
  EXPECT_EQ(render_curves(a), render_curves(b));
  EXPECT_EQ(strip_wall_time(to_json(a)).dump().find("wall_time_s"), std::string::npos);
}

TEST(Experiment, FailedRunsAreReportedNotFatal) {
  ExperimentConfig cfg = tiny();
  // A lone sample of class 3 cannot be split into train and test of a task.
  cfg.data.class_counts = {30, 30, 20, 1};
  cfg.data.smote_enabled = false;
  const ExperimentReport rep = run_experiment(cfg);
  EXPECT_EQ(rep.failures.size(), cfg.strategies.size());
  EXPECT_FALSE(rep.strategies[0].aggregate);
  EXPECT_NE(render_table(rep).find("failed"), std::string::npos);
}

TEST(Experiment, WritesAllOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "fedcl_harness_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = tiny();
  cfg.strategies.resize(1);
  write_outputs(run_experiment(cfg), dir);
  for (const char* f : {"report.json", "table.txt", "curves.csv"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::filesystem::remove_all(dir);
}

TEST(Acceptance, ChecksGainsAndForgetting) {
  ExperimentReport rep;
  const auto strat = [](std::string label, double acc, double forget) {
    StrategyReport s{std::move(label), NaiveStrategy{}, {}, RunAggregate{}, {acc, 0.0}, {forget, 0.0}};
    return s;
  };
  rep.strategies = {strat("base", 0.6, 0.3), strat("good", 0.7, 0.1), strat("meh", 0.62, 0.1)};
  AcceptanceConfig acc{"base", 0.15, 0.05, {"good", "meh"}};
  const auto checks = check_acceptance(rep, acc);
  ASSERT_EQ(checks.size(), 3u);
  EXPECT_TRUE(checks[0].passed);
  EXPECT_TRUE(checks[1].passed);
  EXPECT_FALSE(checks[2].passed);
}

}  // namespace
}  // namespace fedcl::harness
