#include <iostream>

#include <CLI11.hpp>

#include "hcw/cli.hpp"

int main(int argc, char** argv) {
  using hcw::cli::CliInvocation;
  CLI::App app{"Heteroskedastic, corruption-robust generalized linear bandit simulator"};
  app.require_subcommand(1);
  CliInvocation inv;

  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("--config", inv.config_path, "experiment config (JSON)")->required();
      sub->add_option("--set", inv.overrides, "override a config field, key.path=value (repeatable)");
      sub->add_option("--seed", inv.seed, "override base_seed");
    }
    sub->add_option("--out", inv.output_dir, "output directory");
    sub->add_option("--jobs", inv.jobs, "replications run in parallel")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "run an experiment");
  common(run, true);
  auto* sweep = app.add_subcommand("sweep", "run one config across values of a parameter");
  common(sweep, true);
  sweep->add_option("--param", inv.sweep_param, "horizon, corruption_budget or dispersion_scale")
      ->required();
  sweep->add_option("--values", inv.sweep_values, "values to sweep")->required()->delimiter(',');
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("--config", inv.config_path, "experiment config (JSON)")->required();
  validate->add_option("--set", inv.overrides, "override a config field (repeatable)");
  auto* accept = app.add_subcommand("accept", "run a built-in acceptance suite");
  common(accept, false);
  accept->add_option("suite", inv.suite, "coverage, scaling, corruption or variance")->required();
  accept->add_flag("--sabotage-weights", inv.sabotage_weights,
                   "force every confidence weight to 1 (ablation)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hcw::cli::kExitConfigError;
  }
  inv.subcommand = app.get_subcommands().front()->get_name();
  return hcw::cli::dispatch(inv, std::cout, std::cerr);
}
