#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "hcw/glm_family.hpp"
#include "hcw/omd_estimator.hpp"
#include "hcw/policy.hpp"
#include "hcw/random.hpp"

namespace hcw {

/// Uniform draw from the unit sphere in R^d.
inline Vector random_unit_vector(Eigen::Index d, RandomStream& rng) {
  Vector v(d);
  double n = 0.0;
  do {
    for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
    n = v.norm();
  } while (n < 1e-12);
  return v / n;
}

/// Generic experiments draw theta_star uniformly on the sphere of radius 0.9 S.
inline Vector sample_theta_star(Eigen::Index d, double S, RandomStream& rng) {
  return 0.9 * S * random_unit_vector(d, rng);
}

/// Oblivious dispersion sequence g(tau_1), ..., g(tau_T), fixed before the run.
class DispersionSchedule {
 public:
  DispersionSchedule() = default;
  explicit DispersionSchedule(std::vector<double> values) : values_(std::move(values)) {
    for (double g : values_) {
      if (!(g > 0.0)) {
        std::ostringstream msg;
        msg << "dispersion values must be positive, got " << g;
        throw InvalidDispersion(msg.str());
      }
    }
  }

  static DispersionSchedule constant(long horizon, double g) {
    return DispersionSchedule(std::vector<double>(static_cast<std::size_t>(horizon), g));
  }

  /// `pattern` repeated to length `horizon`.
  static DispersionSchedule cycle(long horizon, const std::vector<double>& pattern) {
    if (pattern.empty()) throw InvalidDispersion("dispersion pattern is empty");
    std::vector<double> v(static_cast<std::size_t>(horizon));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = pattern[i % pattern.size()];
    return DispersionSchedule(std::move(v));
  }

  /// g(tau_t) for 1-based t.
  double at(long t) const { return values_.at(static_cast<std::size_t>(t - 1)); }
  long horizon() const { return static_cast<long>(values_.size()); }
  const std::vector<double>& values() const { return values_; }

  double sum() const {
    CompensatedSum s;
    for (double g : values_) s.add(g);
    return s.value();
  }
  double max() const {
    double m = 0.0;
    for (double g : values_) m = std::max(m, g);
    return m;
  }

 private:
  std::vector<double> values_;
};

/// Dyadic partition of [T] by dispersion level.
struct PeelingSchedule {
  DispersionSchedule schedule;
  std::vector<int> level;  ///< level(t) for t = 1..T, stored at index t-1
  int top_level = 0;       ///< L = ceil(log2 T) - 1
  double g_max = 1.0;
  long horizon = 0;

  int level_at(long t) const { return level.at(static_cast<std::size_t>(t - 1)); }

  /// g^(l) = 2^l g_max / T.
  double level_dispersion(int l) const {
    return std::ldexp(g_max, l) / static_cast<double>(horizon);
  }
};

/// Assigns each round to level 0 when g_t <= g_max / T, else to the smallest l
/// with 2^(l-1) g_max / T < g_t <= 2^l g_max / T. Rounds above the top band
/// 2^L g_max / T are kept in level L so the partition stays exhaustive.
inline PeelingSchedule make_peeling_schedule(long T, double g_max,
                                                      const std::vector<double>& base_dispersions) {
  if (T < 2) throw InvalidDispersion("peeling schedule needs T >= 2");
  if (!(g_max > 0.0)) throw InvalidDispersion("peeling schedule needs g_max > 0");
  for (double g : base_dispersions) {
    if (!(g > 0.0) || g > g_max) {
      std::ostringstream msg;
      msg << "base dispersion " << g << " outside (0, g_max = " << g_max << "]";
      throw InvalidDispersion(msg.str());
    }
  }
  PeelingSchedule out;
  out.schedule = DispersionSchedule::cycle(T, base_dispersions);
  out.top_level = static_cast<int>(std::ceil(std::log2(static_cast<double>(T)))) - 1;
  out.g_max = g_max;
  out.horizon = T;
  out.level.resize(static_cast<std::size_t>(T));
  const double Td = static_cast<double>(T);
  for (long t = 1; t <= T; ++t) {
    const double scaled = out.schedule.at(t) * Td;  // compare g T <= 2^l g_max
    int l = 0;
    while (l < out.top_level && scaled > std::ldexp(g_max, l)) ++l;
    out.level[static_cast<std::size_t>(t - 1)] = l;
  }
  return out;
}

/// Produces the arm set of each round.
class ArmGenerator {
 public:
  enum class Kind { Fixed, SpherePerRound, Peeling };

  static ArmGenerator fixed(std::vector<Vector> arms) {
    ArmGenerator g;
    g.kind_ = Kind::Fixed;
    if (arms.empty()) throw EmptyArmSet("fixed arm set is empty");
    g.dim_ = arms.front().size();
    g.fixed_ = std::move(arms);
    ArmSet{g.fixed_, 0}.validate(g.dim_);
    return g;
  }

  static ArmGenerator sphere_per_round(Eigen::Index dim, std::size_t K) {
    ArmGenerator g;
    g.kind_ = Kind::SpherePerRound;
    g.dim_ = dim;
    g.count_ = K;
    return g;
  }

  /// Round t is offered the arm list of level(t).
  static ArmGenerator peeling(std::vector<std::vector<Vector>> level_arms, std::vector<int> level) {
    ArmGenerator g;
    g.kind_ = Kind::Peeling;
    g.dim_ = level_arms.front().front().size();
    g.levels_ = std::move(level_arms);
    g.level_of_round_ = std::move(level);
    return g;
  }

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }

  /// Arm set for 1-based round t. Only per-round sphere arms consume `rng`.
  ArmSet arms_for(long t, RandomStream& rng) const {
    switch (kind_) {
      case Kind::Fixed: return ArmSet{fixed_, t};
      case Kind::SpherePerRound: {
        ArmSet set{{}, t};
        set.arms.reserve(count_);
        for (std::size_t k = 0; k < count_; ++k) set.arms.push_back(random_unit_vector(dim_, rng));
        return set;
      }
      case Kind::Peeling:
        return ArmSet{levels_.at(static_cast<std::size_t>(
                          level_of_round_.at(static_cast<std::size_t>(t - 1)))),
                      t};
    }
    return {};
  }

 private:
  Kind kind_ = Kind::Fixed;
  Eigen::Index dim_ = 0;
  std::vector<Vector> fixed_;
  std::size_t count_ = 0;
  std::vector<std::vector<Vector>> levels_;
  std::vector<int> level_of_round_;
};

/// K i.i.d. uniform unit vectors, drawn once now (fixed) or afresh each round.
inline ArmGenerator make_uniform_sphere_arms(Eigen::Index d, std::size_t K, bool per_round,
                                             RandomStream& rng) {
  if (d < 1 || K < 1) throw ShapeError("sphere arms need d >= 1 and K >= 1");
  if (per_round) return ArmGenerator::sphere_per_round(d, K);
  std::vector<Vector> arms;
  arms.reserve(K);
  for (std::size_t k = 0; k < K; ++k) arms.push_back(random_unit_vector(d, rng));
  return ArmGenerator::fixed(std::move(arms));
}

/// d-1 unit arms x_i = e_1 cos(phi) + e_{i+1} sin(phi); <x_i, x_j> = cos^2(phi).
inline std::vector<Vector> cone_arm_list(Eigen::Index d, double phi) {
  if (d < 2) throw ShapeError("cone instance needs d >= 2");
  if (!(phi > 0.0 && phi < std::numbers::pi / 2.0)) {
    std::ostringstream msg;
    msg << "cone angle must lie in (0, pi/2), got " << phi;
    throw InvalidAngle(msg.str());
  }
  std::vector<Vector> arms;
  for (Eigen::Index i = 0; i + 1 < d; ++i) {
    Vector x = Vector::Zero(d);
    x[0] = std::cos(phi);
    x[i + 1] = std::sin(phi);
    arms.push_back(std::move(x));
  }
  return arms;
}

inline ArmGenerator make_cone_arms(Eigen::Index d, double phi) {
  return ArmGenerator::fixed(cone_arm_list(d, phi));
}

/// Suboptimal-arm gap on the cone instance with theta = S x_i:
/// mu(S) - mu(S cos^2 phi).
inline double cone_gap(const GlmModel& model, double S, double phi) {
  const double c = std::cos(phi);
  return mu(model, S) - mu(model, S * c * c);
}

/// Block-embedded arm sets: level l gets coordinates [l d', (l+1) d') with
/// d' = d / (L+1), filled with `per_level` unit vectors of that subspace.
inline ArmGenerator make_peeling_arms(Eigen::Index d, const PeelingSchedule& peeling,
                                      std::size_t per_level, RandomStream& rng) {
  const int blocks = peeling.top_level + 1;
  if (d % blocks != 0) {
    std::ostringstream msg;
    msg << "peeling instance needs d divisible by L+1 = " << blocks << ", got d = " << d;
    throw ShapeError(msg.str());
  }
  if (per_level < 1) throw ShapeError("peeling instance needs at least one arm per level");
  const Eigen::Index sub = d / blocks;
  std::vector<std::vector<Vector>> levels(static_cast<std::size_t>(blocks));
  for (int l = 0; l < blocks; ++l) {
    for (std::size_t k = 0; k < per_level; ++k) {
      Vector x = Vector::Zero(d);
      x.segment(l * sub, sub) = random_unit_vector(sub, rng);
      levels[static_cast<std::size_t>(l)].push_back(std::move(x));
    }
  }
  return ArmGenerator::peeling(std::move(levels), peeling.level);
}

/// Outcome of pulling one arm, seen by the harness (never by the learner).
struct StepOutcome {
  double true_reward = 0.0;
  double g_tau = 1.0;
  double instant_regret = 0.0;
  double mu_dot_star = 0.0;
  std::size_t optimal_index = 0;
};

struct Environment {
  GlmModel model;
  Vector theta_star;
  ArmGenerator arms;
  DispersionSchedule dispersion;
  long horizon = 0;

  Eigen::Index dim() const { return theta_star.size(); }

  void validate() const {
    if (horizon < 1) throw Error("environment horizon must be at least 1");
    if (dispersion.horizon() < horizon) throw InvalidDispersion("dispersion schedule shorter than horizon");
    if (arms.dim() != dim()) throw ShapeError("arm dimension differs from theta_star dimension");
    if (!(theta_star.norm() <= model.domain_bound + kDomainTolerance)) {
      throw DomainError("theta_star outside the parameter ball");
    }
    for (double g : dispersion.values()) check_dispersion(model, g);
  }

  /// Index of argmax_x <x, theta_star> (lowest index on ties).
  std::size_t optimal_index(const ArmSet& set) const {
    std::size_t best = 0;
    double best_z = set[0].dot(theta_star);
    for (std::size_t i = 1; i < set.size(); ++i) {
      const double z = set[i].dot(theta_star);
      if (z > best_z) {
        best_z = z;
        best = i;
      }
    }
    return best;
  }

  /// Samples the reward of `chosen` at round t and accounts its pseudo-regret.
  StepOutcome step(long t, const ArmSet& set, const Vector& chosen, RandomStream& rng) const {
    if (t < 1 || t > horizon) {
      std::ostringstream msg;
      msg << "round " << t << " outside [1, " << horizon << "]";
      throw ProtocolViolation(msg.str());
    }
    bool member = false;
    for (const Vector& x : set.arms) {
      if (x.size() == chosen.size() && (x - chosen).cwiseAbs().maxCoeff() <= 1e-12) {
        member = true;
        break;
      }
    }
    if (!member) throw ProtocolViolation("chosen arm is not in the round's arm set");

    StepOutcome out;
    out.g_tau = dispersion.at(t);
    const double z = chosen.dot(theta_star);
    out.true_reward = sample_reward(model, z, out.g_tau, rng).raw_sample;
    out.optimal_index = optimal_index(set);
    const double z_star = set[out.optimal_index].dot(theta_star);
    out.instant_regret = mu(model, z_star) - mu(model, z);
    out.mu_dot_star = mu_dot(model, z_star);
    return out;
  }
};

/// Linear link with g(tau_t) = sigma_t^2 (sigmas cycled to the horizon).
inline Environment make_heteroskedastic_linear_env(Eigen::Index d, double S,
                                                   const std::vector<double>& sigma_schedule,
                                                   ArmGenerator arms, Vector theta_star,
                                                   long horizon) {
  std::vector<double> g;
  g.reserve(sigma_schedule.size());
  for (double s : sigma_schedule) {
    if (!(s > 0.0)) throw InvalidDispersion("sigma must be positive");
    g.push_back(s * s);
  }
  Environment env{constants_for(LinkKind::Linear, S), std::move(theta_star), std::move(arms),
                  DispersionSchedule::cycle(horizon, g), horizon};
  detail::check_dim(d, env.dim(), "make_heteroskedastic_linear_env");
  env.validate();
  return env;
}

/// Per-round pseudo-regret with a compensated running total.
class RegretLedger {
 public:
  void record(double instant_regret, double mu_dot_star) {
    per_round_.push_back(instant_regret);
    slopes_.push_back(mu_dot_star);
    total_.add(instant_regret);
  }
  double cumulative() const { return total_.value(); }
  const std::vector<double>& per_round_regret() const { return per_round_; }
  const std::vector<double>& mu_star_slopes() const { return slopes_; }

 private:
  std::vector<double> per_round_;
  std::vector<double> slopes_;
  CompensatedSum total_;
};

}  // namespace hcw
