#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hcw/acceptance.hpp"
#include "hcw/harness.hpp"

namespace hcw::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCriterionFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

inline constexpr const char* kDefaultOutput = "hcw_out";

struct CliInvocation {
  std::string subcommand;  ///< run, sweep, validate or accept
  std::string config_path;
  std::vector<std::string> overrides;  ///< dotted key=value, applied in order
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  // sweep
  std::string sweep_param;
  std::vector<double> sweep_values;

  // accept
  std::string suite;
  bool sabotage_weights = false;
};

/// Reads the config file, then applies --set overrides, --out and --seed, and
/// only then validates.
inline ExperimentConfig load_config(const CliInvocation& inv) {
  if (inv.config_path.empty()) throw ConfigError("--config", "no config file given");
  Json doc = read_json_file(inv.config_path);
  for (const auto& o : inv.overrides) apply_override(doc, o);
  if (!inv.output_dir.empty()) doc["output"] = inv.output_dir;
  if (inv.seed) doc["base_seed"] = *inv.seed;
  if (!doc.contains("output")) doc["output"] = kDefaultOutput;
  return parse_config(doc);
}

/// Maps exceptions to exit codes and prints the diagnostic.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

inline int cmd_validate(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(inv);
    out << "config OK (digest " << cfg.digest() << ", horizon " << cfg.horizon << ", "
        << cfg.replications << " replications)\n";
    return kExitOk;
  });
}

inline int cmd_run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_config(inv);
    const ExperimentSummary s = run_experiment(cfg, inv.jobs);
    out << "replications: " << s.replications.size() << "\n"
        << "mean final regret: " << format_real(s.mean_final_regret) << " (stderr "
        << format_real(s.stderr_final_regret) << ")\n";
    if (s.coverage_fraction) out << "coverage fraction: " << format_real(*s.coverage_fraction) << "\n";
    out << "SUMMARY: " << s.summary_path.string() << "\n";
    return kExitOk;
  });
}

inline int cmd_sweep(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SweepParameter p = sweep_parameter_from_string(inv.sweep_param);
    if (inv.sweep_values.empty()) throw ConfigError("--values", "no sweep values given");
    const ExperimentConfig base = load_config(inv);
    const auto rows = scaling_sweep(make_sweep_configs(base, p, inv.sweep_values), p, inv.jobs);
    const std::filesystem::path dir(base.output);
    write_text_file(dir / "sweep.csv", sweep_table_csv(rows));
    write_text_file(dir / "sweep.json", sweep_table_json(rows, p).dump(2) + "\n");
    out << to_string(p) << "  mean_final_regret  stderr\n";
    for (const auto& r : rows) {
      out << format_real(r.value) << "  " << format_real(r.mean_final_regret) << "  "
          << format_real(r.stderr_final_regret) << "\n";
    }
    out << "SUMMARY: " << (dir / "sweep.json").string() << "\n";
    return kExitOk;
  });
}

inline int cmd_accept(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    accept::SuiteOptions opt;
    if (!inv.output_dir.empty()) opt.work_dir = inv.output_dir;
    opt.jobs = inv.jobs;
    opt.sabotage_weights = inv.sabotage_weights;
    const auto results = accept::run_suite(accept::suite_from_string(inv.suite), opt, out);
    for (const auto& r : results) out << accept::line(r) << "\n";
    return accept::all_pass(results) ? kExitOk : kExitCriterionFailed;
  });
}

inline int dispatch(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  if (inv.subcommand == "run") return cmd_run(inv, out, err);
  if (inv.subcommand == "sweep") return cmd_sweep(inv, out, err);
  if (inv.subcommand == "validate") return cmd_validate(inv, out, err);
  if (inv.subcommand == "accept") return cmd_accept(inv, out, err);
  err << "unknown subcommand '" << inv.subcommand << "'\n";
  return kExitConfigError;
}

}  // namespace hcw::cli
