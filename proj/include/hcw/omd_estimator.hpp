#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "hcw/glm_family.hpp"
#include "hcw/psd_geometry.hpp"

namespace hcw {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct HcwHyperparams {
  double eta = 1.0;
  double lambda = 1.0;
  double alpha = 1.0;
  double S = 1.0;
  double delta = 0.05;
  double C_budget = 0.0;
  /// false gives the unweighted GLB-OMD baseline (every w_t = 1).
  bool confidence_weighting = true;

  /// eta = 1 + R_s S and lambda = max{14 d eta R_s^2, 36 eta^2 alpha^2 R_s^2 S^2 L_mu^2, d/(4S^2)}.
  static HcwHyperparams defaults(const GlmModel& model, Eigen::Index dim, double S,
                                        double delta, double C_budget, double alpha) {
    HcwHyperparams h;
    h.S = S;
    h.delta = delta;
    h.C_budget = C_budget;
    h.alpha = alpha;
    h.eta = default_eta(model, S);
    h.lambda = default_lambda(model, dim, S, h.eta, alpha);
    return h;
  }

  static double default_eta(const GlmModel& model, double S) { return 1.0 + model.r_s * S; }

  static double default_lambda(const GlmModel& model, Eigen::Index dim, double S, double eta,
                               double alpha) {
    const double d = static_cast<double>(dim);
    const double rs2 = model.r_s * model.r_s;
    return std::max({14.0 * d * eta * rs2,
                     36.0 * eta * eta * alpha * alpha * rs2 * S * S * model.l_mu * model.l_mu,
                     d / (4.0 * S * S)});
  }

  /// alpha = scale * sqrt(d) / max(C, 1).
  static double default_alpha(Eigen::Index dim, double C_budget, double scale = 1.0) {
    return scale * std::sqrt(static_cast<double>(dim)) / std::max(C_budget, 1.0);
  }

  void validate() const {
    if (!(eta > 0.0)) throw InvalidCoefficient("eta must be positive");
    if (!(lambda > 0.0)) throw InvalidCoefficient("lambda must be positive");
    if (!(alpha > 0.0)) throw InvalidCoefficient("alpha must be positive");
    if (!(S > 0.0)) throw InvalidCoefficient("S must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidCoefficient("delta must lie in (0, 1)");
    if (!(C_budget >= 0.0)) throw InvalidCoefficient("corruption budget must be nonnegative");
  }
};

/// Online estimator state: theta_t, H_t and the dispersion sum behind beta_t.
struct EstimatorState {
  EstimatorState(const GlmModel& model_, const HcwHyperparams& hyper_, Eigen::Index dim)
      : theta(Vector::Zero(dim)), hessian(dim, hyper_.lambda), hyper(hyper_), model(model_) {
    hyper.validate();
  }

  Vector theta;
  HessianState hessian;
  HcwHyperparams hyper;
  GlmModel model;
  CompensatedSum dispersion_log_sum;  ///< sum_s L_mu / (lambda g(tau_s)) over completed rounds
  long round = 1;                     ///< t; the next update consumes round t

  Eigen::Index dim() const { return theta.size(); }
};

/// w = min(1, alpha g / ||x||_{H^{-1}}); 1 for x = 0.
inline double confidence_weight(const EstimatorState& state, const Vector& x, double g_tau) {
  if (!(g_tau > 0.0)) {
    std::ostringstream msg;
    msg << "confidence_weight: g(tau) must be positive, got " << g_tau;
    throw InvalidDispersion(msg.str());
  }
  const double norm = mahalanobis_norm(state.hessian, x, /*inverse=*/true);
  if (norm == 0.0) return 1.0;
  return std::min(1.0, state.hyper.alpha * g_tau / norm);
}

/// Weighted negative log-likelihood w (m(<x,theta>) - r <x,theta>) / g.
inline double weighted_loss(const GlmModel& model, const Vector& x, double r_obs, double g_tau,
                            double w, const Vector& at) {
  const double z = x.dot(at);
  return w * (m(model, z) - r_obs * z) / g_tau;
}

/// Gradient (w/g)(mu(<x,at>) - r) x of the weighted loss.
inline Vector weighted_loss_gradient(const EstimatorState& state, const Vector& x, double r_obs,
                                     double g_tau, double w, const Vector& at) {
  detail::check_dim(state.dim(), x.size(), "weighted_loss_gradient");
  detail::check_dim(state.dim(), at.size(), "weighted_loss_gradient");
  if (!(at.norm() <= state.hyper.S + kDomainTolerance)) {
    throw DomainError("weighted_loss_gradient: evaluation point outside the parameter ball");
  }
  const double z = x.dot(at);
  return (w / g_tau) * (mu(state.model, z) - r_obs) * x;
}

/// Everything the update computed, for logging and property checks.
struct UpdateTrace {
  double weight = 1.0;
  Vector theta_before;
  Vector gradient;            ///< gradient of the loss at theta_t
  Matrix curvature;           ///< A = (w/g) mu'(<x,theta_t>) x x^T
  Matrix metric;              ///< M = A + H_t / eta
  Matrix hessian_before;      ///< H_t
  double hessian_coefficient = 0.0;  ///< (w/g) mu'(<x,theta_{t+1}>)
};

/// One mirror-descent step on the weighted loss, then the Hessian update.
///
/// The curvature term of the step is evaluated at theta_t while the Hessian
/// accumulation uses the slope at the new iterate theta_{t+1}.
inline UpdateTrace omd_update(EstimatorState& state, const Vector& x, double r_obs, double g_tau) {
  detail::check_dim(state.dim(), x.size(), "omd_update");
  if (!(x.norm() <= 1.0 + kDomainTolerance)) throw DomainError("omd_update: arm outside unit ball");
  const HcwHyperparams& hyper = state.hyper;

  if (!(g_tau > 0.0)) throw InvalidDispersion("omd_update: g(tau) must be positive");

  UpdateTrace trace;
  trace.weight = hyper.confidence_weighting ? confidence_weight(state, x, g_tau) : 1.0;
  const double scale = trace.weight / g_tau;

  trace.theta_before = state.theta;
  trace.hessian_before = state.hessian.H();
  const double z_t = x.dot(state.theta);
  trace.gradient = weighted_loss_gradient(state, x, r_obs, g_tau, trace.weight, state.theta);
  trace.curvature = (scale * mu_dot(state.model, z_t)) * (x * x.transpose());
  trace.metric = trace.curvature + state.hessian.H() / hyper.eta;

  Eigen::LLT<Matrix> llt(trace.metric);
  if (llt.info() != Eigen::Success) throw SingularMetric("omd_update: step metric is not PD");
  const Vector center = state.theta - llt.solve(trace.gradient);
  state.theta = project_to_ball(trace.metric, center, hyper.S);

  trace.hessian_coefficient = scale * mu_dot(state.model, x.dot(state.theta));
  state.hessian.rank_one_update(x, trace.hessian_coefficient);
  state.dispersion_log_sum.add(state.model.l_mu / (hyper.lambda * g_tau));
  ++state.round;
  return trace;
}

/// beta_t(delta) alone, without the corruption term.
inline double beta(const EstimatorState& state) {
  const HcwHyperparams& h = state.hyper;
  const double d = static_cast<double>(state.dim());
  const double sq = 2.0 * h.eta * std::log(1.0 / h.delta) +
                    d * (6.0 * h.eta * h.eta + h.eta) * std::log1p(state.dispersion_log_sum.value()) +
                    4.0 * h.lambda * h.S * h.S;
  return std::sqrt(sq);
}

/// beta_t(delta) + 2 eta alpha C; the baseline carries C = 0.
inline double confidence_radius(const EstimatorState& state) {
  const HcwHyperparams& h = state.hyper;
  return beta(state) + 2.0 * h.eta * h.alpha * h.C_budget;
}

/// theta_query in the ball B(S) and within H-distance `radius` of theta_t
/// (boundary included).
inline bool in_confidence_set(const EstimatorState& state, const Vector& theta_query, double radius) {
  detail::check_dim(state.dim(), theta_query.size(), "in_confidence_set");
  if (theta_query.norm() > state.hyper.S + kDomainTolerance) return false;
  const Vector diff = theta_query - state.theta;
  return mahalanobis_norm(state.hessian, diff, /*inverse=*/false) <= radius;
}

inline bool in_confidence_set(const EstimatorState& state, const Vector& theta_query) {
  return in_confidence_set(state, theta_query, confidence_radius(state));
}

}  // namespace hcw
