#pragma once

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hcw/adversary.hpp"
#include "hcw/environment.hpp"
#include "hcw/policy.hpp"

namespace hcw {

using Json = nlohmann::json;

/// Exact trajectory CSV header.
inline constexpr const char* kTrajectoryHeader =
    "t,arm_index,g_tau,w_t,r_true,c_t,r_obs,instant_regret,cumulative_regret,radius,"
    "theta_in_confset";

/// 17 significant digits, round-trip exact.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

// ---------------------------------------------------------------------------
// Config access helpers. Every failure names the dotted field path.
namespace config_detail {

inline std::string join(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

inline const Json& require(const Json& obj, std::string_view key, const std::string& base) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(join(base, key), "missing field");
  return obj.at(std::string(key));
}

inline double number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline double number(const Json& obj, std::string_view key, const std::string& base) {
  return number(require(obj, key, base), join(base, key));
}

inline double number_or(const Json& obj, std::string_view key, const std::string& base,
                        double fallback) {
  if (!obj.contains(key)) return fallback;
  return number(obj.at(std::string(key)), join(base, key));
}

inline long integer(const Json& obj, std::string_view key, const std::string& base) {
  const Json& v = require(obj, key, base);
  if (!v.is_number_integer()) throw ConfigError(join(base, key), "expected an integer");
  return v.get<long>();
}

inline std::string string(const Json& obj, std::string_view key, const std::string& base) {
  const Json& v = require(obj, key, base);
  if (!v.is_string()) throw ConfigError(join(base, key), "expected a string");
  return v.get<std::string>();
}

/// Numeric field that may also be the string "auto" (returns nullopt).
inline std::optional<double> auto_or_number(const Json& obj, std::string_view key,
                                            const std::string& base) {
  if (!obj.contains(key)) return std::nullopt;
  const Json& v = obj.at(std::string(key));
  if (v.is_string() && v.get<std::string>() == "auto") return std::nullopt;
  return number(v, join(base, key));
}

inline std::vector<double> number_list(const Json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline Vector vector_of(const Json& v, const std::string& path) {
  const auto xs = number_list(v, path);
  Vector out(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) out[static_cast<Eigen::Index>(i)] = xs[i];
  return out;
}

}  // namespace config_detail

/// Logging granularity of the trajectory CSV.
struct LogSpec {
  bool every_round = false;
  std::vector<long> checkpoints;  ///< used when !every_round; empty means powers of two plus T
  bool coverage = true;           ///< evaluate theta_star in C_t(delta) each round

  /// Sorted checkpoint rounds for horizon T.
  std::vector<long> rounds(long T) const {
    std::set<long> s;
    if (checkpoints.empty()) {
      for (long p = 1; p <= T; p *= 2) s.insert(p);
      s.insert(T);
    } else {
      for (long c : checkpoints)
        if (c >= 1 && c <= T) s.insert(c);
    }
    return {s.begin(), s.end()};
  }
};

/// Validated experiment configuration. `doc` is the full JSON document with
/// top-level keys environment, adversary, policy, horizon, replications,
/// base_seed, output, log.
struct ExperimentConfig {
  Json doc;
  long horizon = 1;
  long replications = 1;
  std::uint64_t base_seed = 0;
  std::string output;
  LogSpec log;

  /// Replication r runs with seed base_seed + r.
  std::uint64_t seed_for(std::size_t r) const { return base_seed + r; }

  /// FNV-1a of the document without the output path.
  std::string digest() const {
    Json copy = doc;
    copy.erase("output");
    return fnv1a_hex(copy.dump());
  }
};

/// Everything one replication needs, built from the config and its seed.
struct ReplicationSetup {
  Environment env;
  Adversary adversary = make_null_adversary();
  PolicyConfig policy;
};

namespace config_detail {

inline DispersionSchedule build_dispersion(const Json& node, long T, const std::string& path,
                                           std::optional<PeelingSchedule>& peeling) {
  const std::string type = string(node, "type", path);
  auto values_from = [&](const char* single_g, const char* single_sigma) -> std::vector<double> {
    if (node.contains(single_sigma)) {
      const Json& v = node.at(single_sigma);
      std::vector<double> s = v.is_array() ? number_list(v, join(path, single_sigma))
                                           : std::vector<double>{number(v, join(path, single_sigma))};
      for (double& x : s) {
        if (!(x > 0.0)) throw ConfigError(join(path, single_sigma), "sigma must be positive");
        x *= x;
      }
      return s;
    }
    const Json& v = require(node, single_g, path);
    return v.is_array() ? number_list(v, join(path, single_g))
                        : std::vector<double>{number(v, join(path, single_g))};
  };
  if (type == "constant" || type == "cycle") {
    const auto g = values_from("g", "sigma");
    for (double x : g)
      if (!(x > 0.0)) throw ConfigError(join(path, "g"), "dispersion must be positive");
    return DispersionSchedule::cycle(T, g);
  }
  if (type == "peeling") {
    const double g_max = number(node, "g_max", path);
    const auto base = number_list(require(node, "base", path), join(path, "base"));
    try {
      peeling = make_peeling_schedule(T, g_max, base);
    } catch (const Error& e) {
      throw ConfigError(path, e.what());
    }
    return peeling->schedule;
  }
  throw ConfigError(join(path, "type"), "unknown dispersion type '" + type +
                                            "' (expected constant, cycle or peeling)");
}

}  // namespace config_detail

/// Builds environment, adversary and policy for one replication. Throws
/// ConfigError for anything the document gets wrong.
inline ReplicationSetup build_replication(const ExperimentConfig& cfg, std::uint64_t seed) {
  using namespace config_detail;
  const Json& doc = cfg.doc;
  const Json& env_cfg = require(doc, "environment", "");
  if (!env_cfg.is_object()) throw ConfigError("environment", "expected an object");

  LinkKind link{};
  try {
    link = link_from_string(string(env_cfg, "link", "environment"));
  } catch (const UnsupportedLink& e) {
    throw ConfigError("environment.link", e.what());
  }
  const long d = integer(env_cfg, "d", "environment");
  if (d < 1) throw ConfigError("environment.d", "dimension must be at least 1");
  const double S = number(env_cfg, "S", "environment");
  if (!(S > 0.0)) throw ConfigError("environment.S", "S must be positive");
  const GlmModel model = constants_for(link, S);
  const long T = cfg.horizon;

  RandomStream setup_rng = RandomStream::derive(seed, {1});

  // Dispersion first: the peeling arm sets depend on the level map.
  std::optional<PeelingSchedule> peeling;
  DispersionSchedule dispersion =
      build_dispersion(require(env_cfg, "dispersion", "environment"), T, "environment.dispersion",
                       peeling);
  for (double g : dispersion.values()) {
    try {
      check_dispersion(model, g);
    } catch (const InvalidDispersion& e) {
      throw ConfigError("environment.dispersion",
                        std::string("dispersion incompatible with link: ") + e.what());
    }
  }

  const Json& arms_cfg = require(env_cfg, "arms", "environment");
  const std::string arms_type = string(arms_cfg, "type", "environment.arms");
  ArmGenerator arms;
  std::optional<Vector> cone_theta;
  try {
    if (arms_type == "sphere") {
      const long K = integer(arms_cfg, "K", "environment.arms");
      if (K < 1) throw ConfigError("environment.arms.K", "K must be at least 1");
      const bool per_round = arms_cfg.value("per_round", false);
      arms = make_uniform_sphere_arms(d, static_cast<std::size_t>(K), per_round, setup_rng);
    } else if (arms_type == "cone") {
      const double phi = number(arms_cfg, "phi", "environment.arms");
      auto list = cone_arm_list(d, phi);
      const long opt = arms_cfg.value("optimal_index", 0L);
      if (opt < 0 || opt >= static_cast<long>(list.size())) {
        throw ConfigError("environment.arms.optimal_index", "index outside the cone arm set");
      }
      cone_theta = S * list[static_cast<std::size_t>(opt)];
      arms = ArmGenerator::fixed(std::move(list));
    } else if (arms_type == "explicit") {
      const Json& vs = require(arms_cfg, "vectors", "environment.arms");
      if (!vs.is_array() || vs.empty()) {
        throw ConfigError("environment.arms.vectors", "expected a nonempty array of vectors");
      }
      std::vector<Vector> list;
      for (std::size_t i = 0; i < vs.size(); ++i) {
        list.push_back(vector_of(vs[i], "environment.arms.vectors[" + std::to_string(i) + "]"));
        if (list.back().size() != d) {
          throw ConfigError("environment.arms.vectors[" + std::to_string(i) + "]",
                            "arm dimension differs from d");
        }
      }
      arms = ArmGenerator::fixed(std::move(list));
    } else if (arms_type == "peeling") {
      if (!peeling) {
        throw ConfigError("environment.arms", "peeling arms need a peeling dispersion schedule");
      }
      const long per_level = integer(arms_cfg, "per_level", "environment.arms");
      if (per_level < 1) throw ConfigError("environment.arms.per_level", "must be at least 1");
      arms = make_peeling_arms(d, *peeling, static_cast<std::size_t>(per_level), setup_rng);
    } else {
      throw ConfigError("environment.arms.type",
                        "unknown arm type '" + arms_type + "' (expected sphere, cone, explicit or peeling)");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("environment.arms", e.what());
  }

  Vector theta_star;
  const Json theta_cfg = env_cfg.value("theta_star", Json("auto"));
  if (theta_cfg.is_string() && theta_cfg.get<std::string>() == "auto") {
    theta_star = cone_theta ? *cone_theta : sample_theta_star(d, S, setup_rng);
  } else {
    theta_star = vector_of(theta_cfg, "environment.theta_star");
    if (theta_star.size() != d) throw ConfigError("environment.theta_star", "dimension differs from d");
    if (theta_star.norm() > S + kDomainTolerance) {
      throw ConfigError("environment.theta_star", "norm exceeds S");
    }
  }

  ReplicationSetup setup{Environment{model, theta_star, std::move(arms), std::move(dispersion), T},
                         make_null_adversary(), {}};
  try {
    setup.env.validate();
  } catch (const Error& e) {
    throw ConfigError("environment", e.what());
  }

  // Adversary.
  const Json& adv_cfg = require(doc, "adversary", "");
  AdversaryKind adv_kind{};
  try {
    adv_kind = adversary_from_string(string(adv_cfg, "type", "adversary"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("adversary.type", e.what());
  }
  const double budget = number_or(adv_cfg, "budget", "adversary", 0.0);
  if (!(budget >= 0.0)) throw ConfigError("adversary.budget", "budget must be nonnegative");
  std::optional<Vector> target;
  if (adv_cfg.contains("target") &&
      !(adv_cfg["target"].is_string() && adv_cfg["target"].get<std::string>() == "optimal")) {
    target = vector_of(adv_cfg["target"], "adversary.target");
    if (target->size() != d) throw ConfigError("adversary.target", "dimension differs from d");
  }
  try {
    switch (adv_kind) {
      case AdversaryKind::Null: setup.adversary = make_null_adversary(); break;
      case AdversaryKind::Gap:
        setup.adversary = make_gap_adversary(target, number(adv_cfg, "delta", "adversary"), budget);
        break;
      case AdversaryKind::Flip:
        if (link != LinkKind::Logistic) {
          throw ConfigError("adversary.type", "flip adversary needs Bernoulli (logistic) rewards");
        }
        setup.adversary = make_bernoulli_flip_adversary(target, number(adv_cfg, "q", "adversary"), budget);
        break;
      case AdversaryKind::Thin:
        if (link != LinkKind::Poisson) {
          throw ConfigError("adversary.type", "thinning adversary needs Poisson rewards");
        }
        setup.adversary = make_poisson_thinning_adversary(target, number(adv_cfg, "q", "adversary"), budget);
        break;
      case AdversaryKind::Burst:
        setup.adversary = make_burst_adversary(number(adv_cfg, "c_per_round", "adversary"), budget);
        break;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("adversary", e.what());
  }

  // Policy.
  const Json& pol = require(doc, "policy", "");
  PolicyKind kind{};
  try {
    kind = policy_from_string(string(pol, "name", "policy"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("policy.name", e.what());
  }
  const double policy_S = number_or(pol, "S", "policy", S);
  if (!(policy_S > 0.0)) throw ConfigError("policy.S", "S must be positive");
  if (policy_S < theta_star.norm() - kDomainTolerance) {
    throw ConfigError("policy.S", "policy S is smaller than the norm of theta_star");
  }
  const double delta = number_or(pol, "delta", "policy", 0.05);
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("policy.delta", "delta must lie in (0, 1)");
  const double C = number_or(pol, "corruption_budget", "policy", budget);
  if (!(C >= 0.0)) throw ConfigError("policy.corruption_budget", "budget must be nonnegative");
  const double alpha_scale = number_or(pol, "alpha_scale", "policy", 1.0);
  if (!(alpha_scale > 0.0)) throw ConfigError("policy.alpha_scale", "must be positive");

  const GlmModel policy_model = constants_for(link, policy_S);
  HcwHyperparams hyper;
  hyper.S = policy_S;
  hyper.delta = delta;
  hyper.C_budget = C;
  hyper.alpha = auto_or_number(pol, "alpha", "policy")
                    .value_or(HcwHyperparams::default_alpha(d, C, alpha_scale));
  hyper.eta = auto_or_number(pol, "eta", "policy")
                  .value_or(HcwHyperparams::default_eta(policy_model, policy_S));
  hyper.lambda = auto_or_number(pol, "lambda", "policy")
                     .value_or(HcwHyperparams::default_lambda(policy_model, d, policy_S, hyper.eta,
                                                              hyper.alpha));
  if (!(hyper.alpha > 0.0)) throw ConfigError("policy.alpha", "alpha must be positive");
  if (!(hyper.eta > 0.0)) throw ConfigError("policy.eta", "eta must be positive");
  if (!(hyper.lambda > 0.0)) throw ConfigError("policy.lambda", "lambda must be positive");
  setup.policy = kind == PolicyKind::HcwGlbOmd ? make_hcw_glb_omd(hyper) : make_baseline_glb_omd(hyper);
  // Ablation switch: weights forced to 1 while the radius keeps its C term.
  if (pol.contains("confidence_weighting")) {
    if (!pol.at("confidence_weighting").is_boolean()) {
      throw ConfigError("policy.confidence_weighting", "expected a boolean");
    }
    if (!pol.at("confidence_weighting").get<bool>()) setup.policy.hyper.confidence_weighting = false;
  }
  return setup;
}

/// Parses and validates a config document.
inline ExperimentConfig parse_config(const Json& doc) {
  using namespace config_detail;
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  static const std::set<std::string> known{"environment", "adversary", "policy",     "horizon",
                                           "replications", "base_seed", "output", "log"};
  for (const auto& [key, _] : doc.items()) {
    if (!known.count(key)) throw ConfigError(key, "unknown top-level key");
  }
  ExperimentConfig cfg;
  cfg.doc = doc;
  cfg.horizon = integer(doc, "horizon", "");
  if (cfg.horizon < 1) throw ConfigError("horizon", "horizon must be at least 1");
  cfg.replications = doc.contains("replications") ? integer(doc, "replications", "") : 1;
  if (cfg.replications < 1) throw ConfigError("replications", "replications must be at least 1");
  if (doc.contains("base_seed")) {
    const Json& s = doc.at("base_seed");
    if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<long long>() < 0)) {
      throw ConfigError("base_seed", "expected a nonnegative integer");
    }
    cfg.base_seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) throw ConfigError("output", "expected a string");
    cfg.output = doc.at("output").get<std::string>();
  }
  if (doc.contains("log")) {
    const Json& log = doc.at("log");
    if (!log.is_object()) throw ConfigError("log", "expected an object");
    const std::string gran = log.value("granularity", std::string("checkpoints"));
    if (gran == "every_round") {
      cfg.log.every_round = true;
    } else if (gran != "checkpoints") {
      throw ConfigError("log.granularity", "expected every_round or checkpoints");
    }
    if (log.contains("checkpoints")) {
      const Json& cp = log.at("checkpoints");
      if (!cp.is_array()) throw ConfigError("log.checkpoints", "expected an array of rounds");
      for (const Json& c : cp) {
        if (!c.is_number_integer()) throw ConfigError("log.checkpoints", "expected integers");
        cfg.log.checkpoints.push_back(c.get<long>());
      }
    }
    if (log.contains("coverage")) {
      if (!log.at("coverage").is_boolean()) throw ConfigError("log.coverage", "expected a boolean");
      cfg.log.coverage = log.at("coverage").get<bool>();
    }
  }
  // Dry run of replication 0 surfaces every remaining field error.
  (void)build_replication(cfg, cfg.seed_for(0));
  return cfg;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Applies a dotted `key=value` override. The value is parsed as JSON when
/// possible and kept as a string otherwise (so `adversary.type=null` means
/// the null adversary, not JSON null).
inline void apply_override(Json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(std::string(assignment), "override must have the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded() || value.is_null()) value = raw;

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component in override");
    if (!node->is_object()) throw ConfigError(key, "override descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

/// One logged round.
struct RoundRecord {
  long t = 0;
  std::size_t arm_index = 0;
  double g_tau = 1.0;
  double w_t = 1.0;
  double r_true = 0.0;
  double c_t = 0.0;
  double r_obs = 0.0;
  double instant_regret = 0.0;
  double cumulative_regret = 0.0;
  double radius = 0.0;
  std::optional<bool> theta_in_confset;
};

inline std::string to_csv_row(const RoundRecord& r) {
  std::string row = std::to_string(r.t) + "," + std::to_string(r.arm_index) + "," +
                    format_real(r.g_tau) + "," + format_real(r.w_t) + "," + format_real(r.r_true) +
                    "," + format_real(r.c_t) + "," + format_real(r.r_obs) + "," +
                    format_real(r.instant_regret) + "," + format_real(r.cumulative_regret) + "," +
                    format_real(r.radius) + ",";
  if (r.theta_in_confset) row += *r.theta_in_confset ? "1" : "0";
  return row;
}

struct ReplicationResult {
  std::uint64_t seed = 0;
  double final_regret = 0.0;
  double budget_spent = 0.0;
  std::optional<bool> coverage_all_rounds;
  std::vector<RoundRecord> logged;  ///< rows written to the CSV
};

/// Runs one replication. `on_round` (optional) sees every RoundRecord and
/// the estimator state before the round's update.
template <typename RoundHook>
ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t r, RoundHook&& on_round) {
  const std::uint64_t seed = cfg.seed_for(r);
  ReplicationSetup setup = build_replication(cfg, seed);
  const Environment& env = setup.env;
  EstimatorState state(constants_for(env.model.link_kind, setup.policy.hyper.S), setup.policy.hyper,
                       env.dim());

  RandomStream arm_rng = RandomStream::derive(seed, {2});
  RandomStream reward_rng = RandomStream::derive(seed, {3});
  RandomStream adversary_rng = RandomStream::derive(seed, {4});

  const std::vector<long> checkpoints = cfg.log.rounds(cfg.horizon);
  std::size_t next_checkpoint = 0;

  ReplicationResult result;
  result.seed = seed;
  bool covered_all = true;
  RegretLedger ledger;

  for (long t = 1; t <= cfg.horizon; ++t) {
    const ArmSet set = env.arms.arms_for(t, arm_rng);
    RoundRecord rec;
    rec.t = t;
    if (cfg.log.coverage) {
      rec.theta_in_confset = in_confidence_set(state, env.theta_star);
      covered_all = covered_all && *rec.theta_in_confset;
    }
    on_round(rec, state);

    StepOutcome step;
    CorruptionEvent corruption;
    const PolicyRound pr = play_round(state, set, [&](std::size_t, const Vector& x) {
      step = env.step(t, set, x, reward_rng);
      const AdversaryContext ctx{&set[step.optimal_index]};
      corruption = setup.adversary.corrupt(t, x, step.true_reward, ctx, adversary_rng);
      return Observation{corruption.r_after, step.g_tau};
    });
    ledger.record(step.instant_regret, step.mu_dot_star);

    rec.arm_index = pr.arm_index;
    rec.g_tau = step.g_tau;
    rec.w_t = pr.weight;
    rec.r_true = step.true_reward;
    rec.c_t = corruption.c_t;
    rec.r_obs = corruption.r_after;
    rec.instant_regret = step.instant_regret;
    rec.cumulative_regret = ledger.cumulative();
    rec.radius = pr.radius;

    const bool at_checkpoint = next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == t;
    if (at_checkpoint) ++next_checkpoint;
    if (cfg.log.every_round || at_checkpoint) result.logged.push_back(rec);
  }
  result.final_regret = ledger.cumulative();
  result.budget_spent = setup.adversary.budget().spent();
  if (cfg.log.coverage) result.coverage_all_rounds = covered_all;
  return result;
}

inline ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t r) {
  return run_replication(cfg, r, [](const RoundRecord&, const EstimatorState&) {});
}

struct ExperimentSummary {
  std::string config_digest;
  std::vector<ReplicationResult> replications;
  double mean_final_regret = 0.0;
  double stderr_final_regret = 0.0;
  std::optional<double> coverage_fraction;
  std::filesystem::path summary_path;  ///< empty when nothing was written

  Json to_json() const {
    Json reps = Json::array();
    for (const auto& r : replications) {
      Json cov = r.coverage_all_rounds ? Json(*r.coverage_all_rounds) : Json(nullptr);
      reps.push_back({{"seed", r.seed},
                      {"final_regret", r.final_regret},
                      {"budget_spent", r.budget_spent},
                      {"coverage_all_rounds", cov}});
    }
    return Json{{"config_digest", config_digest},
                {"replications", reps},
                {"mean_final_regret", mean_final_regret},
                {"stderr_final_regret", stderr_final_regret},
                {"coverage_fraction", coverage_fraction ? Json(*coverage_fraction) : Json(nullptr)}};
  }
};

inline std::string trajectory_file_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trajectory_%04zu.csv", r);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

/// Runs all replications (up to `jobs` at once) and, when the config has an
/// output directory, writes one trajectory CSV per replication plus
/// summary.json. Output does not depend on `jobs`.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, int jobs = 1) {
  const auto R = static_cast<std::size_t>(cfg.replications);
  ExperimentSummary summary;
  summary.config_digest = cfg.digest();
  summary.replications.resize(R);

  const bool write = !cfg.output.empty();
  const std::filesystem::path dir(cfg.output);
  if (write) std::filesystem::create_directories(dir);

  std::mutex io_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= R) return;
      try {
        ReplicationResult res = run_replication(cfg, r);
        if (write) {
          std::string csv = std::string(kTrajectoryHeader) + "\n";
          for (const auto& rec : res.logged) csv += to_csv_row(rec) + "\n";
          std::lock_guard lock(io_mutex);
          write_text_file(dir / trajectory_file_name(r), csv);
        }
        summary.replications[r] = std::move(res);
      } catch (...) {
        std::lock_guard lock(io_mutex);
        if (!failure) failure = std::current_exception();
        next.store(R);
        return;
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(R));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  CompensatedSum total;
  long covered = 0;
  for (const auto& r : summary.replications) {
    total.add(r.final_regret);
    if (r.coverage_all_rounds && *r.coverage_all_rounds) ++covered;
  }
  const double n = static_cast<double>(R);
  summary.mean_final_regret = total.value() / n;
  if (R > 1) {
    CompensatedSum sq;
    for (const auto& r : summary.replications) {
      const double dv = r.final_regret - summary.mean_final_regret;
      sq.add(dv * dv);
    }
    summary.stderr_final_regret = std::sqrt(sq.value() / (n - 1.0) / n);
  }
  if (cfg.log.coverage) summary.coverage_fraction = static_cast<double>(covered) / n;

  if (write) {
    summary.summary_path = dir / "summary.json";
    write_text_file(summary.summary_path, summary.to_json().dump(2) + "\n");
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Scaling sweeps.

enum class SweepParameter { Horizon, CorruptionBudget, DispersionScale };

inline std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::Horizon: return "horizon";
    case SweepParameter::CorruptionBudget: return "corruption_budget";
    case SweepParameter::DispersionScale: return "dispersion_scale";
  }
  return "horizon";
}

inline SweepParameter sweep_parameter_from_string(std::string_view name) {
  if (name == "horizon") return SweepParameter::Horizon;
  if (name == "corruption_budget") return SweepParameter::CorruptionBudget;
  if (name == "dispersion_scale") return SweepParameter::DispersionScale;
  throw ConfigError("sweep.param", "unknown sweep parameter '" + std::string(name) +
                                       "' (expected horizon, corruption_budget or dispersion_scale)");
}

namespace sweep_detail {

/// JSON-pointer prefixes a sweep over `p` may change.
inline std::vector<std::string> allowed_paths(SweepParameter p) {
  std::vector<std::string> out{"/output"};
  switch (p) {
    case SweepParameter::Horizon:
      out.insert(out.end(), {"/horizon", "/log/checkpoints"});
      break;
    case SweepParameter::CorruptionBudget:
      out.insert(out.end(), {"/adversary/budget", "/policy/corruption_budget", "/policy/alpha"});
      break;
    case SweepParameter::DispersionScale:
      out.insert(out.end(), {"/environment/dispersion/g", "/environment/dispersion/sigma",
                             "/environment/dispersion/g_max", "/environment/dispersion/base"});
      break;
  }
  return out;
}

inline bool has_prefix(const std::string& path, const std::string& prefix) {
  return path == prefix || (path.size() > prefix.size() && path.compare(0, prefix.size(), prefix) == 0 &&
                            path[prefix.size()] == '/');
}

inline double first_number(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_array() && !v.empty() && v[0].is_number()) return v[0].get<double>();
  throw ConfigError("sweep", "swept field is not numeric");
}

inline double swept_value(const ExperimentConfig& cfg, SweepParameter p) {
  const Json& doc = cfg.doc;
  switch (p) {
    case SweepParameter::Horizon: return static_cast<double>(cfg.horizon);
    case SweepParameter::CorruptionBudget:
      return doc.at("adversary").value("budget", 0.0);
    case SweepParameter::DispersionScale: {
      const Json& disp = doc.at("environment").at("dispersion");
      if (disp.contains("sigma")) return first_number(disp.at("sigma"));
      if (disp.contains("g")) return first_number(disp.at("g"));
      if (disp.contains("g_max")) return first_number(disp.at("g_max"));
      throw ConfigError("environment.dispersion", "no dispersion scale to sweep");
    }
  }
  return 0.0;
}

}  // namespace sweep_detail

struct SweepRow {
  double value = 0.0;
  double mean_final_regret = 0.0;
  double stderr_final_regret = 0.0;
  ExperimentSummary summary;
};

/// Throws ConfigError when two configs differ outside the swept field.
inline void check_sweep_homogeneous(const std::vector<ExperimentConfig>& configs, SweepParameter p) {
  if (configs.empty()) throw ConfigError("sweep", "no configurations to sweep");
  const auto allowed = sweep_detail::allowed_paths(p);
  for (std::size_t i = 1; i < configs.size(); ++i) {
    const Json patch = Json::diff(configs[0].doc, configs[i].doc);
    for (const Json& op : patch) {
      const std::string path = op.at("path").get<std::string>();
      const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                  [&](const std::string& a) { return sweep_detail::has_prefix(path, a); });
      if (!ok) {
        throw ConfigError("sweep", "config " + std::to_string(i) + " differs from config 0 at '" + path +
                                       "', outside the swept parameter " + std::string(to_string(p)));
      }
    }
  }
}

/// Runs each config and tabulates (swept value, mean final regret, std error).
inline std::vector<SweepRow> scaling_sweep(const std::vector<ExperimentConfig>& configs,
                                           SweepParameter p, int jobs = 1) {
  check_sweep_homogeneous(configs, p);
  std::vector<SweepRow> rows;
  for (const auto& cfg : configs) {
    SweepRow row;
    row.value = sweep_detail::swept_value(cfg, p);
    row.summary = run_experiment(cfg, jobs);
    row.mean_final_regret = row.summary.mean_final_regret;
    row.stderr_final_regret = row.summary.stderr_final_regret;
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Config copies of `base` with the swept field set to each value. Each gets
/// its own output subdirectory when `base` has one.
inline std::vector<ExperimentConfig> make_sweep_configs(const ExperimentConfig& base, SweepParameter p,
                                                        const std::vector<double>& values) {
  std::vector<ExperimentConfig> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Json doc = base.doc;
    const double v = values[i];
    switch (p) {
      case SweepParameter::Horizon:
        doc["horizon"] = static_cast<long>(std::llround(v));
        break;
      case SweepParameter::CorruptionBudget:
        doc["adversary"]["budget"] = v;
        if (doc["policy"].contains("corruption_budget")) doc["policy"]["corruption_budget"] = v;
        break;
      case SweepParameter::DispersionScale: {
        Json& disp = doc["environment"]["dispersion"];
        if (disp.contains("sigma")) disp["sigma"] = v;
        else if (disp.contains("g")) disp["g"] = v;
        else throw ConfigError("environment.dispersion", "dispersion_scale sweeps need a g or sigma field");
        break;
      }
    }
    if (!base.output.empty()) {
      doc["output"] = (std::filesystem::path(base.output) / ("sweep_" + std::to_string(i))).string();
    }
    out.push_back(parse_config(doc));
  }
  return out;
}

/// Sweep table as CSV: value,mean_final_regret,stderr_final_regret.
inline std::string sweep_table_csv(const std::vector<SweepRow>& rows) {
  std::string out = "value,mean_final_regret,stderr_final_regret\n";
  for (const auto& r : rows) {
    out += format_real(r.value) + "," + format_real(r.mean_final_regret) + "," +
           format_real(r.stderr_final_regret) + "\n";
  }
  return out;
}

inline Json sweep_table_json(const std::vector<SweepRow>& rows, SweepParameter p) {
  Json table = Json::array();
  for (const auto& r : rows) {
    table.push_back({{"value", r.value},
                     {"mean_final_regret", r.mean_final_regret},
                     {"stderr_final_regret", r.stderr_final_regret},
                     {"summary", r.summary.summary_path.string()}});
  }
  return Json{{"parameter", std::string(to_string(p))}, {"rows", table}};
}

}  // namespace hcw
