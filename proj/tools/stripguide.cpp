// Copyright 2026 The stripguide Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Command-line front end: run scenarios, compare runs, validate configs.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "stripguide/config.hpp"
#include "stripguide/runner.hpp"

namespace {

using namespace stripguide;
namespace fs = std::filesystem;

struct RunArgs {
  std::string config;
  std::string objective;
  bool constrained = false;
  std::string out;
  double dt = 0.0;
  int max_iters = 0;
  bool validate_only = false;
};

int print_config_error(const std::exception& e) {
  std::cerr << "config error: " << e.what() << "\n";
  return runner::kConfigError;
}

// Loads a config and checks the geometry without solving anything.
config::RunConfig load_checked(const std::string& file, const runner::Overrides& o) {
  auto c = config::load(file);
  runner::apply(c, o);
  try {
    const ocp::StripContext ctx(c.scenario);
    (void)ocp::run_linear(ctx);
  } catch (const ValidationError& e) {
    throw config::ConfigError(file, e.what());
  }
  return c;
}

int do_run(const RunArgs& a, CLI::App& cmd) {
  runner::Overrides o;
  try {
    if (!a.objective.empty() && a.objective != "all") {
      o.objective = config::parse_objective(a.objective, "--objective");
    }
    o.constrained = a.constrained;
    if (cmd.count("--dt")) o.dt = a.dt;
    if (cmd.count("--max-iters")) o.max_iterations = a.max_iters;
  } catch (const config::ConfigError& e) {
    return print_config_error(e);
  }

  config::RunConfig c;
  try {
    c = load_checked(a.config, o);
  } catch (const config::ConfigError& e) {
    return print_config_error(e);
  } catch (const DegenerateGeometryError& e) {
    std::cerr << "degenerate geometry: " << e.what() << "\n";
    return runner::kSingularity;
  } catch (const SingularityError& e) {
    std::cerr << "kinematic singularity: " << e.what() << "\n";
    return runner::kSingularity;
  }
  if (a.validate_only) {
    std::cout << a.config << ": ok (" << c.name << ")\n";
    return runner::kOk;
  }

  const auto runs = runner::execute(c);
  const fs::path dir = a.out.empty() ? fs::path("out") / c.name : fs::path(a.out);
  const auto summary = runner::write_run(dir, c, runs);

  std::cout << "scenario " << c.name << (c.scenario.f_ccd_bounds_active ? " (constrained)" : "")
            << "\n"
            << runner::table(summary["methods"]);
  std::cout << "lowest integral: " << summary["winners"]["integral_omega_sq"].dump()
            << ", lowest max rate: " << summary["winners"]["max_omega"].dump() << "\n";
  for (const auto& row : summary["methods"]) {
    if (row.contains("bounds_satisfied")) {
      std::cout << "  " << row["label"].get<std::string>() << ": line-rate bounds "
                << (row["bounds_satisfied"].get<bool>() ? "satisfied" : "VIOLATED") << "\n";
    }
    if (row.contains("error")) {
      std::cerr << row["label"].get<std::string>() << ": " << row["error"].get<std::string>()
                << "\n";
    } else if (!row["converged"].get<bool>()) {
      std::cerr << row["label"].get<std::string>() << ": did not converge; see "
                << (dir / (row["label"].get<std::string>() + "_iterations.csv")).string()
                << "\n";
    }
  }
  std::cout << "artifacts in " << dir.string() << "\n";
  return runner::exit_code(runs);
}

int do_compare(const std::vector<std::string>& dirs, const std::string& out) {
  nlohmann::ordered_json cmp;
  try {
    std::vector<fs::path> paths(dirs.begin(), dirs.end());
    cmp = runner::compare(paths);
  } catch (const runner::CompareError& e) {
    std::cerr << "compare refused: " << e.what() << "\n";
    return runner::kConfigError;
  }
  std::cout << "scenario " << cmp["scenario"].get<std::string>() << "\n"
            << runner::table(cmp["rows"]);
  std::cout << "lowest integral: " << cmp["winners"]["integral_omega_sq"].dump()
            << ", lowest max rate: " << cmp["winners"]["max_omega"].dump() << "\n";
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "comparison.json") << cmp.dump(2) << "\n";
    std::ofstream(fs::path(out) / "comparison.csv") << runner::comparison_csv(cmp);
    std::cout << "comparison written to " << out << "\n";
  }
  return runner::kOk;
}

int do_validate(const std::vector<std::string>& files) {
  int code = runner::kOk;
  for (const auto& f : files) {
    try {
      const auto c = load_checked(f, {});
      std::cout << f << ": ok (" << c.name << ")\n";
    } catch (const config::ConfigError& e) {
      code = print_config_error(e);
    } catch (const Error& e) {
      std::cerr << f << ": " << e.what() << "\n";
      code = runner::kSingularity;
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strip-imaging scan-rate optimizer"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Solve a scenario and write profiles and a summary");
  run_cmd->add_option("config", run.config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--objective", run.objective, "linear, min_integral, min_max or all");
  run_cmd->add_flag("--constrained", run.constrained, "Enforce the camera line-rate bounds");
  run_cmd->add_option("--out", run.out, "Output directory (default out/<name>)");
  run_cmd->add_option("--dt", run.dt, "Grid step in seconds");
  run_cmd->add_option("--max-iters", run.max_iters, "Solver iteration cap");
  run_cmd->add_flag("--validate-only", run.validate_only, "Check the config and stop");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* cmp_cmd = app.add_subcommand("compare", "Tabulate metrics across runs of one scenario");
  cmp_cmd->add_option("runs", compare_dirs, "Run directories")->required()->expected(2, -1);
  cmp_cmd->add_option("--out", compare_out, "Directory for comparison.json/csv");

  std::vector<std::string> validate_files;
  auto* val_cmd = app.add_subcommand("validate", "Check scenario files without solving");
  val_cmd->add_option("configs", validate_files, "Scenario YAML files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : runner::kConfigError;
  }

  try {
    if (*run_cmd) return do_run(run, *run_cmd);
    if (*cmp_cmd) return do_compare(compare_dirs, compare_out);
    return do_validate(validate_files);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
