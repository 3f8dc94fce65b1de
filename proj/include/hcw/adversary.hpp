#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "hcw/psd_geometry.hpp"
#include "hcw/random.hpp"

namespace hcw {

/// Ledger for the total corruption sum_t |c_t| <= C.
class CorruptionBudget {
 public:
  static constexpr double kTolerance = 1e-12;

  explicit CorruptionBudget(double C = 0.0) : total_(C) {
    if (!(C >= 0.0)) throw InvalidCoefficient("corruption budget must be nonnegative");
  }

  double total() const { return total_; }
  double spent() const { return spent_; }
  double remaining() const { return total_ - spent_; }

  bool can_spend(double amount) const { return spent_ + std::abs(amount) <= total_ + kTolerance; }

  /// Charges |amount| if it fits; returns whether it was charged.
  bool try_spend(double amount) {
    if (!can_spend(amount)) return false;
    spent_ += std::abs(amount);
    return true;
  }

 private:
  double total_;
  double spent_ = 0.0;
};

struct CorruptionEvent {
  long t = 0;
  double c_t = 0.0;
  double r_before = 0.0;
  double r_after = 0.0;
};

/// What the adversary may inspect besides (x_t, r_t): the round's optimal arm.
struct AdversaryContext {
  const Vector* optimal_arm = nullptr;
};

enum class AdversaryKind { Null, Gap, Flip, Thin, Burst };

inline std::string_view to_string(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::Null: return "null";
    case AdversaryKind::Gap: return "gap";
    case AdversaryKind::Flip: return "flip";
    case AdversaryKind::Thin: return "thin";
    case AdversaryKind::Burst: return "burst";
  }
  return "null";
}

inline AdversaryKind adversary_from_string(std::string_view name) {
  if (name == "null") return AdversaryKind::Null;
  if (name == "gap") return AdversaryKind::Gap;
  if (name == "flip") return AdversaryKind::Flip;
  if (name == "thin") return AdversaryKind::Thin;
  if (name == "burst") return AdversaryKind::Burst;
  throw Error("unknown adversary '" + std::string(name) + "'");
}

/// Adaptive, budgeted reward corruption. It sees the pulled arm and the
/// realized reward before choosing c_t; the learner only ever sees r_t + c_t.
///
/// A strategy whose desired corruption no longer fits in the remaining
/// budget emits c_t = 0 for that round.
class Adversary {
 public:
  AdversaryKind kind() const { return kind_; }
  const CorruptionBudget& budget() const { return budget_; }
  double gap() const { return gap_; }
  double q() const { return q_; }
  long corrupted_rounds() const { return corrupted_rounds_; }

  /// Returns (r_obs, c_t).
  CorruptionEvent corrupt(long t, const Vector& chosen, double r_true, const AdversaryContext& ctx,
                          RandomStream& rng) {
    CorruptionEvent ev{t, 0.0, r_true, r_true};
    switch (kind_) {
      case AdversaryKind::Null: break;
      case AdversaryKind::Gap:
        if (is_target(chosen, ctx) && budget_.try_spend(gap_)) ev.c_t = -gap_;
        break;
      case AdversaryKind::Flip:
        if (is_target(chosen, ctx) && r_true == 1.0) {
          // The coin is tossed before the budget check so the stream advances
          // identically whether or not the budget is exhausted.
          const bool flip = rng.bernoulli(q_);
          if (flip && budget_.try_spend(1.0)) ev.c_t = -1.0;
        }
        break;
      case AdversaryKind::Thin:
        if (is_target(chosen, ctx)) {
          if (r_true < 0.0 || r_true != std::floor(r_true)) {
            throw Error("thinning adversary needs nonnegative integer (Poisson) rewards");
          }
          const auto kept = rng.binomial(static_cast<std::int64_t>(r_true), 1.0 - q_);
          const double cost = r_true - static_cast<double>(kept);
          if (cost > 0.0 && budget_.try_spend(cost)) ev.c_t = -cost;
        }
        break;
      case AdversaryKind::Burst:
        if (budget_.try_spend(burst_)) ev.c_t = burst_;
        break;
    }
    ev.r_after = r_true + ev.c_t;
    if (ev.c_t != 0.0) ++corrupted_rounds_;
    return ev;
  }

  friend Adversary make_null_adversary();
  friend Adversary make_gap_adversary(std::optional<Vector> target, double Delta, double budget);
  friend Adversary make_bernoulli_flip_adversary(std::optional<Vector> target, double q,
                                                 double budget);
  friend Adversary make_poisson_thinning_adversary(std::optional<Vector> target, double q,
                                                   double budget);
  friend Adversary make_burst_adversary(double c_per_round, double budget);

 private:
  Adversary(AdversaryKind kind, double budget) : kind_(kind), budget_(budget) {}

  bool is_target(const Vector& chosen, const AdversaryContext& ctx) const {
    const Vector* target = target_ ? &*target_ : ctx.optimal_arm;
    if (target == nullptr || target->size() != chosen.size()) return false;
    return (*target - chosen).cwiseAbs().maxCoeff() <= 1e-12;
  }

  AdversaryKind kind_;
  CorruptionBudget budget_;
  std::optional<Vector> target_;  ///< empty: the round's optimal arm
  double gap_ = 0.0;
  double q_ = 0.0;
  double burst_ = 0.0;
  long corrupted_rounds_ = 0;
};

namespace detail {
inline void check_probability(double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    std::ostringstream msg;
    msg << "corruption probability must lie in [0, 1], got " << q;
    throw InvalidProbability(msg.str());
  }
}
}  // namespace detail

inline Adversary make_null_adversary() { return Adversary(AdversaryKind::Null, 0.0); }

/// Subtracts Delta from every pull of the target arm while the budget lasts,
/// i.e. for floor(C / Delta) pulls.
inline Adversary make_gap_adversary(std::optional<Vector> target, double Delta, double budget) {
  if (!(Delta > 0.0)) throw InvalidCoefficient("gap adversary needs Delta > 0");
  Adversary a(AdversaryKind::Gap, budget);
  a.target_ = std::move(target);
  a.gap_ = Delta;
  return a;
}

/// On target pulls with r_t = 1, reveals 0 with probability q (cost 1). The
/// target's observed stream becomes Bernoulli((1 - q) mu).
inline Adversary make_bernoulli_flip_adversary(std::optional<Vector> target, double q,
                                               double budget) {
  detail::check_probability(q);
  Adversary a(AdversaryKind::Flip, budget);
  a.target_ = std::move(target);
  a.q_ = q;
  return a;
}

/// On target pulls, reveals Binomial(r_t, 1 - q) (cost r_t minus the kept
/// count). Thinning a Poisson(lambda) stream gives Poisson((1 - q) lambda).
inline Adversary make_poisson_thinning_adversary(std::optional<Vector> target, double q,
                                                 double budget) {
  detail::check_probability(q);
  Adversary a(AdversaryKind::Thin, budget);
  a.target_ = std::move(target);
  a.q_ = q;
  return a;
}

/// Adds c_per_round to every observation for the first floor(C / c) rounds.
inline Adversary make_burst_adversary(double c_per_round, double budget) {
  if (!(c_per_round > 0.0)) throw InvalidCoefficient("burst adversary needs c_per_round > 0");
  Adversary a(AdversaryKind::Burst, budget);
  a.burst_ = c_per_round;
  return a;
}

}  // namespace hcw
