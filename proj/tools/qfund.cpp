// qfund: quadratic-funding mechanism toolkit.
//
// Exit codes: 0 success, 2 validation/parse failure, 3 non-convergence,
// 4 I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qfund/qfund.hpp"

namespace {

struct CliOptions {
  std::string command;
  std::optional<std::string> scenario_path;
  std::optional<std::string> out_dir;
  std::optional<double> tol;
  std::optional<int> max_sweeps;
  std::optional<std::string> grid_spec;
};

qfund::Scenario demo_scenario() {
  return qfund::Scenario{qfund::qf_mechanism(),
                         true,
                         {qfund::Citizen{"demo", qfund::SqrtValue(1.0)}},
                         {qfund::Good{"demo", std::nullopt}},
                         qfund::SolverOptions{}};
}

int run(const CliOptions& cli) {
  qfund::Scenario scenario =
      cli.scenario_path ? qfund::load_scenario(*cli.scenario_path) : demo_scenario();

  qfund::RunFlags flags;
  flags.tol = cli.tol;
  flags.max_sweeps = cli.max_sweeps;
  if (cli.grid_spec) flags.grid = qfund::parse_grid(*cli.grid_spec);

  const qfund::RunOutput output = qfund::run_command(cli.command, scenario, flags);
  std::cout << output.report.dump(2) << "\n";

  if (cli.out_dir) {
    const std::filesystem::path dir(*cli.out_dir);
    qfund::write_tables(output.tables, dir);
    std::ofstream report_file(dir / "report.json");
    if (!report_file) throw qfund::IoError("cannot write report to '" + *cli.out_dir + "'");
    report_file << output.report.dump(2) << "\n";
  }

  return output.all_converged ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadratic funding: mechanism evaluation, contribution-game "
               "equilibria, and uniqueness checks"};
  app.require_subcommand(1);

  CliOptions cli;
  const auto add_common = [&](CLI::App* sub, bool scenario_required) {
    auto* opt = sub->add_option("--scenario", cli.scenario_path, "scenario file (JSON)");
    if (scenario_required) opt->required();
    sub->add_option("--out", cli.out_dir, "directory for report.json and plot tables");
    sub->add_option("--tol", cli.tol, "verdict / scan tolerance override");
    sub->add_option("--max-sweeps", cli.max_sweeps, "solver sweep cap override");
    sub->add_option("--grid", cli.grid_spec, "grid: start:stop:step or comma list");
    sub->callback([&cli, sub] { cli.command = sub->get_name(); });
  };

  add_common(app.add_subcommand("fund", "evaluate funding for fixed contributions"), true);
  add_common(app.add_subcommand("equilibrium", "solve the private-contribution game"), true);
  add_common(app.add_subcommand("optimal", "socially optimal funding level F*"), true);
  add_common(app.add_subcommand("welfare", "welfare and utilities at fixed contributions"), true);
  add_common(app.add_subcommand("scan-q", "Hoelder gap scan over lever exponents"), true);
  add_common(app.add_subcommand("verify-ci", "matching-condition residuals for the mechanism"), true);
  add_common(app.add_subcommand("verify-ode", "uniqueness ODE residuals for weight and lever"), true);
  add_common(app.add_subcommand("series-demo", "Taylor solution of the weight ODE vs closed form"),
             false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems count as validation failures
  }

  try {
    return run(cli);
  } catch (const qfund::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const qfund::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const qfund::NoConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const qfund::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
