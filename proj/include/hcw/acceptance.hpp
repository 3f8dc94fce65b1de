#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "hcw/harness.hpp"

namespace hcw::accept {

/// Outcome of one pass/fail criterion with the measured value behind it.
struct CriterionResult {
  std::string id;
  bool pass = false;
  std::string detail;
};

inline std::string line(const CriterionResult& r) {
  return std::string(r.pass ? "PASS " : "FAIL ") + r.id + ": " + r.detail;
}

inline bool all_pass(const std::vector<CriterionResult>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

enum class Suite { Coverage, Scaling, Corruption, Variance };

inline std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::Coverage: return "coverage";
    case Suite::Scaling: return "scaling";
    case Suite::Corruption: return "corruption";
    case Suite::Variance: return "variance";
  }
  return "coverage";
}

inline Suite suite_from_string(std::string_view name) {
  if (name == "coverage") return Suite::Coverage;
  if (name == "scaling") return Suite::Scaling;
  if (name == "corruption") return Suite::Corruption;
  if (name == "variance") return Suite::Variance;
  throw ConfigError("suite", "unknown suite '" + std::string(name) +
                                 "' (expected coverage, scaling, corruption or variance)");
}

struct SuiteOptions {
  std::filesystem::path work_dir = "accept_out";
  int jobs = 1;
  /// Ablation: run HCW-GLB-OMD with every weight forced to 1 (radius unchanged).
  bool sabotage_weights = false;
};

// Fixed seeds for the built-in suites.
inline constexpr std::uint64_t kCoverageSeed = 20240601;
inline constexpr std::uint64_t kScalingSeed = 20240602;
inline constexpr std::uint64_t kCorruptionSeed = 20240603;
inline constexpr std::uint64_t kVarianceSeed = 20240604;

inline Json coverage_config(const std::filesystem::path& out) {
  return Json{
      {"environment",
       {{"link", "logistic"},
        {"d", 3},
        {"S", 1.0},
        {"arms", {{"type", "sphere"}, {"K", 10}, {"per_round", false}}},
        {"dispersion", {{"type", "constant"}, {"g", 1.0}}}}},
      {"adversary", {{"type", "null"}, {"budget", 0.0}}},
      {"policy", {{"name", "hcw-glb-omd"}, {"delta", 0.05}, {"corruption_budget", 0.0}}},
      {"horizon", 2000},
      {"replications", 200},
      {"base_seed", kCoverageSeed},
      {"output", out.string()},
      {"log", {{"granularity", "checkpoints"}, {"coverage", true}}}};
}

inline Json scaling_config(const std::filesystem::path& out) {
  return Json{
      {"environment",
       {{"link", "logistic"},
        {"d", 3},
        {"S", 1.0},
        {"arms", {{"type", "sphere"}, {"K", 10}, {"per_round", true}}},
        {"dispersion", {{"type", "constant"}, {"g", 1.0}}}}},
      {"adversary", {{"type", "null"}, {"budget", 0.0}}},
      {"policy", {{"name", "hcw-glb-omd"}, {"delta", 0.05}, {"corruption_budget", 0.0}}},
      {"horizon", 2000},
      {"replications", 50},
      {"base_seed", kScalingSeed},
      {"output", out.string()},
      {"log", {{"granularity", "checkpoints"}, {"coverage", false}}}};
}

/// Cone instance with d = 5, phi = pi/4, S = 1 and the flip adversary whose
/// q = Delta / mu(S) makes the optimal arm look exactly like a suboptimal one.
inline Json corruption_config(const std::filesystem::path& out, double C, const std::string& policy,
                              bool weighting) {
  constexpr double S = 1.0;
  constexpr double phi = std::numbers::pi / 4.0;
  const GlmModel model = constants_for(LinkKind::Logistic, S);
  const double q = cone_gap(model, S, phi) / mu(model, S);
  Json pol{{"name", policy}, {"delta", 0.05}, {"corruption_budget", C}, {"alpha", "auto"}};
  if (!weighting) pol["confidence_weighting"] = false;
  return Json{
      {"environment",
       {{"link", "logistic"},
        {"d", 5},
        {"S", S},
        {"arms", {{"type", "cone"}, {"phi", phi}, {"optimal_index", 0}}},
        {"dispersion", {{"type", "constant"}, {"g", 1.0}}}}},
      {"adversary", {{"type", "flip"}, {"budget", C}, {"q", q}, {"target", "optimal"}}},
      {"policy", pol},
      {"horizon", 5000},
      {"replications", 50},
      {"base_seed", kCorruptionSeed},
      {"output", out.string()},
      {"log", {{"granularity", "checkpoints"}, {"coverage", false}}}};
}

inline Json variance_config(const std::filesystem::path& out) {
  return Json{
      {"environment",
       {{"link", "linear"},
        {"d", 3},
        {"S", 1.0},
        {"arms", {{"type", "sphere"}, {"K", 10}, {"per_round", true}}},
        {"dispersion", {{"type", "constant"}, {"sigma", 0.1}}}}},
      {"adversary", {{"type", "null"}, {"budget", 0.0}}},
      {"policy", {{"name", "hcw-glb-omd"}, {"delta", 0.05}, {"corruption_budget", 0.0}}},
      {"horizon", 4000},
      {"replications", 50},
      {"base_seed", kVarianceSeed},
      {"output", out.string()},
      {"log", {{"granularity", "checkpoints"}, {"coverage", false}}}};
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0.0) return 1.0;
  if (sxx == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

inline std::vector<CriterionResult> run_coverage(const SuiteOptions& opt, std::ostream& log) {
  const auto summary = run_experiment(parse_config(coverage_config(opt.work_dir / "coverage")), opt.jobs);
  const double frac = summary.coverage_fraction.value_or(0.0);
  log << "coverage: " << summary.replications.size() << " replications, fraction covering every round "
      << fmt(frac) << "\n";
  return {{"AC-1 coverage", frac >= 0.90, "fraction " + fmt(frac) + " (need >= 0.90)"}};
}

inline std::vector<CriterionResult> run_scaling(const SuiteOptions& opt, std::ostream& log) {
  const auto base = parse_config(scaling_config(opt.work_dir / "scaling"));
  const auto rows = scaling_sweep(make_sweep_configs(base, SweepParameter::Horizon, {2000, 8000}),
                                  SweepParameter::Horizon, opt.jobs);
  write_text_file(opt.work_dir / "scaling" / "sweep.csv", sweep_table_csv(rows));
  log << "scaling:\n  T      mean_regret  stderr\n";
  for (const auto& r : rows) {
    log << "  " << fmt(r.value) << "  " << fmt(r.mean_final_regret) << "  " << fmt(r.stderr_final_regret)
        << "\n";
  }
  const double ratio = rows[1].mean_final_regret / rows[0].mean_final_regret;
  log << "  ratio R(8000)/R(2000) = " << fmt(ratio) << "\n";
  return {{"AC-2 sqrt(T) scaling", ratio >= 1.5 && ratio <= 2.8,
           "ratio " + fmt(ratio) + " (need within [1.5, 2.8])"}};
}

inline std::vector<CriterionResult> run_corruption(const SuiteOptions& opt, std::ostream& log) {
  const auto dir = opt.work_dir / "corruption";
  const bool weighting = !opt.sabotage_weights;
  const auto hcw50 = run_experiment(
      parse_config(corruption_config(dir / "hcw_C50", 50.0, "hcw-glb-omd", weighting)), opt.jobs);
  const auto base50 = run_experiment(
      parse_config(corruption_config(dir / "baseline_C50", 50.0, "glb-omd", true)), opt.jobs);
  const double ratio = hcw50.mean_final_regret / base50.mean_final_regret;
  log << "corruption: C=50 hcw " << fmt(hcw50.mean_final_regret) << " +- "
      << fmt(hcw50.stderr_final_regret) << ", baseline " << fmt(base50.mean_final_regret) << " +- "
      << fmt(base50.stderr_final_regret) << ", ratio " << fmt(ratio)
      << (opt.sabotage_weights ? " (weights forced to 1)" : "") << "\n";

  std::vector<ExperimentConfig> sweep;
  for (double C : {0.0, 25.0, 50.0}) {
    sweep.push_back(parse_config(corruption_config(dir / ("hcw_sweep_C" + std::to_string(static_cast<int>(C))),
                                                   C, "hcw-glb-omd", weighting)));
  }
  const auto rows = scaling_sweep(sweep, SweepParameter::CorruptionBudget, opt.jobs);
  write_text_file(dir / "sweep.csv", sweep_table_csv(rows));
  write_text_file(dir / "sweep.json", sweep_table_json(rows, SweepParameter::CorruptionBudget).dump(2) + "\n");
  std::vector<double> cs, regrets;
  log << "  C   mean_regret  increment\n";
  for (const auto& r : rows) {
    cs.push_back(r.value);
    regrets.push_back(r.mean_final_regret);
    log << "  " << fmt(r.value) << "  " << fmt(r.mean_final_regret) << "  "
        << fmt(r.mean_final_regret - rows[0].mean_final_regret) << "\n";
  }
  const double r2 = r_squared(cs, regrets);
  return {{"AC-3 corruption robustness", ratio <= 0.8,
           "hcw/baseline regret ratio " + fmt(ratio) + " at C=50 (need <= 0.8)"},
          {"AC-3 linear in C", r2 >= 0.8, "R^2 " + fmt(r2) + " over C in {0, 25, 50} (need >= 0.8)"}};
}

inline std::vector<CriterionResult> run_variance(const SuiteOptions& opt, std::ostream& log) {
  const auto base = parse_config(variance_config(opt.work_dir / "variance"));
  const auto rows = scaling_sweep(make_sweep_configs(base, SweepParameter::DispersionScale, {0.1, 1.0}),
                                  SweepParameter::DispersionScale, opt.jobs);
  write_text_file(opt.work_dir / "variance" / "sweep.csv", sweep_table_csv(rows));
  const double ratio = rows[1].mean_final_regret / rows[0].mean_final_regret;
  log << "variance: sigma=0.1 " << fmt(rows[0].mean_final_regret) << ", sigma=1 "
      << fmt(rows[1].mean_final_regret) << ", ratio " << fmt(ratio) << "\n";
  return {{"AC-4 variance awareness", ratio >= 4.0 && ratio <= 25.0,
           "ratio " + fmt(ratio) + " (need within [4, 25])"}};
}

inline std::vector<CriterionResult> run_suite(Suite s, const SuiteOptions& opt, std::ostream& log) {
  std::filesystem::create_directories(opt.work_dir);
  switch (s) {
    case Suite::Coverage: return run_coverage(opt, log);
    case Suite::Scaling: return run_scaling(opt, log);
    case Suite::Corruption: return run_corruption(opt, log);
    case Suite::Variance: return run_variance(opt, log);
  }
  return {};
}

}  // namespace hcw::accept
