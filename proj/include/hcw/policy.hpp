#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hcw/omd_estimator.hpp"

namespace hcw {

/// Finite arm set offered at one round; every arm lies in the unit ball.
struct ArmSet {
  std::vector<Vector> arms;
  long round = 0;

  std::size_t size() const { return arms.size(); }
  const Vector& operator[](std::size_t i) const { return arms[i]; }

  void validate(Eigen::Index dim) const {
    if (arms.empty()) throw EmptyArmSet("arm set is empty");
    for (const Vector& x : arms) {
      detail::check_dim(dim, x.size(), "ArmSet");
      if (!(x.norm() <= 1.0 + kDomainTolerance)) throw DomainError("ArmSet: arm outside unit ball");
    }
  }
};

struct PolicyDecision {
  std::size_t chosen_index = 0;
  std::vector<double> ucb_values;
  double radius_used = 0.0;
};

/// Optimistic choice over the ellipsoid {theta : ||theta - theta_t||_H <= radius}.
/// Its support function gives the index <x, theta_t> + radius ||x||_{H^{-1}};
/// because mu is nondecreasing this also maximizes the optimistic mean.
/// Ties go to the lowest index.
inline PolicyDecision select_arm(const EstimatorState& state, const ArmSet& arms, double radius) {
  if (arms.arms.empty()) throw EmptyArmSet("select_arm: arm set is empty");
  PolicyDecision decision;
  decision.radius_used = radius;
  decision.ucb_values.reserve(arms.size());
  for (const Vector& x : arms.arms) {
    detail::check_dim(state.dim(), x.size(), "select_arm");
    decision.ucb_values.push_back(x.dot(state.theta) + radius * mahalanobis_norm(state.hessian, x, true));
  }
  for (std::size_t i = 1; i < decision.ucb_values.size(); ++i) {
    if (decision.ucb_values[i] > decision.ucb_values[decision.chosen_index]) {
      decision.chosen_index = i;
    }
  }
  return decision;
}

inline PolicyDecision select_arm(const EstimatorState& state, const ArmSet& arms) {
  return select_arm(state, arms, confidence_radius(state));
}

/// What the learner gets to see after pulling an arm: the (possibly
/// corrupted) reward and the dispersion g(tau_t). Nothing else.
struct Observation {
  double r_obs = 0.0;
  double g_tau = 1.0;
};

/// Learner-side view of one completed round.
struct PolicyRound {
  long t = 0;
  std::size_t arm_index = 0;
  Vector arm;
  double radius = 0.0;
  double weight = 1.0;
  double g_tau = 1.0;
  double r_obs = 0.0;
};

/// Select, observe, update. `observe(index, arm)` returns the Observation for
/// the pulled arm.
template <typename ObserveFn>
PolicyRound play_round(EstimatorState& state, const ArmSet& arms, ObserveFn&& observe) {
  const PolicyDecision decision = select_arm(state, arms);
  const Vector& x = arms[decision.chosen_index];
  const Observation obs = std::forward<ObserveFn>(observe)(decision.chosen_index, x);

  PolicyRound round;
  round.t = state.round;
  round.arm_index = decision.chosen_index;
  round.arm = x;
  round.radius = decision.radius_used;
  round.g_tau = obs.g_tau;
  round.r_obs = obs.r_obs;
  round.weight = omd_update(state, x, obs.r_obs, obs.g_tau).weight;
  return round;
}

enum class PolicyKind { HcwGlbOmd, GlbOmd };

inline std::string_view to_string(PolicyKind kind) {
  return kind == PolicyKind::HcwGlbOmd ? "hcw-glb-omd" : "glb-omd";
}

inline PolicyKind policy_from_string(std::string_view name) {
  if (name == "hcw-glb-omd") return PolicyKind::HcwGlbOmd;
  if (name == "glb-omd") return PolicyKind::GlbOmd;
  throw Error("unknown policy '" + std::string(name) + "' (expected hcw-glb-omd or glb-omd)");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::HcwGlbOmd;
  HcwHyperparams hyper;
};

inline PolicyConfig make_hcw_glb_omd(HcwHyperparams hyper) {
  hyper.confidence_weighting = true;
  return {PolicyKind::HcwGlbOmd, hyper};
}

/// Unweighted GLB-OMD: every weight is 1 and the radius drops the 2 eta alpha C
/// term. eta and lambda are kept as given.
inline PolicyConfig make_baseline_glb_omd(HcwHyperparams hyper) {
  hyper.confidence_weighting = false;
  hyper.C_budget = 0.0;
  return {PolicyKind::GlbOmd, hyper};
}

}  // namespace hcw
