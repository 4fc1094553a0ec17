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

// fedcl: run federated continual-learning experiments from a config file.
//
//   fedcl run <config> [--out DIR] [--jobs N] [--strategies a,b] [--seed S]
//   fedcl validate <config>
//   fedcl render <report.json>
//
// Exit codes: 0 ok, 2 invalid config, 3 runtime failure, 4 acceptance check
// failed, 5 malformed config syntax, 6 config file missing.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedcl/harness/config.hpp"
#include "fedcl/harness/experiment.hpp"

namespace {

constexpr int kExitRuntime = 3;
constexpr int kExitAcceptance = 4;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

void apply_filter(fedcl::harness::ExperimentConfig& cfg, const std::string& filter) {
  const std::vector<std::string> wanted = split_csv(filter);
  std::set<std::string> known;
  for (const auto& s : cfg.strategies) known.insert(s.label);
  for (const auto& w : wanted)
    if (!known.count(w))
      throw fedcl::harness::ConfigError(fedcl::harness::ConfigError::Kind::validation,
                                        "--strategies: no strategy labelled '" + w + "'");
  std::erase_if(cfg.strategies, [&](const auto& s) {
    return std::find(wanted.begin(), wanted.end(), s.label) == wanted.end();
  });
  if (cfg.acceptance) cfg.acceptance.reset();  // checks refer to the full strategy set
}

int cmd_run(const std::string& path, const std::string& out_dir, std::size_t jobs, const std::string& filter,
            const std::optional<std::uint64_t>& seed) {
  using namespace fedcl::harness;
  ExperimentConfig cfg = parse_config(path);
  if (!filter.empty()) apply_filter(cfg, filter);
  if (seed) cfg.master_seed = *seed;
  const std::string dir = out_dir.empty() ? cfg.output_dir : out_dir;

  const ExperimentReport rep = run_experiment(cfg, jobs);
  write_outputs(rep, dir);
  std::cout << render_table(rep);
  std::cout << "outputs written to " << dir << '\n';
  if (!rep.failures.empty()) {
    std::cerr << rep.failures.size() << " run(s) failed; see report.json\n";
    return kExitRuntime;
  }
  if (cfg.acceptance) {
    bool ok = true;
    for (const CheckResult& c : check_acceptance(rep, *cfg.acceptance)) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
      ok = ok && c.passed;
    }
    if (!ok) return kExitAcceptance;
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const auto cfg = fedcl::harness::parse_config(path);
  std::cout << path << ": ok (" << cfg.strategies.size() << " strategies, " << cfg.runs_per_strategy
            << " runs each, K=" << cfg.federation.nodes << " T=" << cfg.federation.rounds
            << " E=" << cfg.federation.local_epochs << ")\n";
  return 0;
}

int cmd_render(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << path << ": cannot open report\n";
    return kExitRuntime;
  }
  const auto j = nlohmann::json::parse(in);
  std::cout << fedcl::harness::render_table(fedcl::harness::from_json(j));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated continual-learning experiment runner"};
  app.set_version_flag("--version", std::string(fedcl::harness::kToolVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir, filter, report_path;
  std::size_t jobs = 1;
  std::uint64_t seed_value = 0;

  auto* run = app.add_subcommand("run", "Run every strategy x seed in a config and write report.json, table.txt, curves.csv");
  run->add_option("config", config_path, "Experiment config (YAML)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);
  run->add_option("--strategies", filter, "Comma-separated strategy labels to run");
  auto* seed_opt = run->add_option("--seed", seed_value, "Override master_seed");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
  validate->add_option("config", config_path, "Experiment config (YAML)")->required();

  auto* render = app.add_subcommand("render", "Print the comparison table of a report.json");
  render->add_option("report", report_path, "report.json from a previous run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::optional<std::uint64_t> seed;
      if (*seed_opt) seed = seed_value;
      return cmd_run(config_path, out_dir, jobs, filter, seed);
    }
    if (*validate) return cmd_validate(config_path);
    if (*render) return cmd_render(report_path);
  } catch (const fedcl::harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
