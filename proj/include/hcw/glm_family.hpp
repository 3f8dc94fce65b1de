#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <string_view>

#include "hcw/errors.hpp"
#include "hcw/random.hpp"

namespace hcw {

enum class LinkKind { Linear, Logistic, Poisson };

/// Slack on |z| <= domain_bound; inner products accumulate rounding error.
inline constexpr double kDomainTolerance = 1e-9;

inline std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::Linear: return "linear";
    case LinkKind::Logistic: return "logistic";
    case LinkKind::Poisson: return "poisson";
  }
  throw UnsupportedLink("unknown link kind");
}

/// Parses the lowercase config name. Gamma and inverse-Gaussian families are
/// not self-concordant on a bounded domain and are rejected like any other
/// unknown name.
inline LinkKind link_from_string(std::string_view name) {
  if (name == "linear") return LinkKind::Linear;
  if (name == "logistic") return LinkKind::Logistic;
  if (name == "poisson") return LinkKind::Poisson;
  throw UnsupportedLink("unsupported link '" + std::string(name) +
                        "' (expected linear, logistic or poisson)");
}

/// Reward family with its link calculus and the constants that hold on
/// z in [-domain_bound, domain_bound].
struct GlmModel {
  LinkKind link_kind = LinkKind::Linear;
  double domain_bound = 1.0;
  double r_s = 0.0;   ///< self-concordance constant: |mu''| <= r_s * mu'
  double l_mu = 1.0;  ///< max mu' on the domain
  double kappa = 1.0; ///< 1 / min mu' on the domain
};

namespace detail {

inline void check_domain(const GlmModel& model, double z, const char* op) {
  if (!(std::abs(z) <= model.domain_bound + kDomainTolerance)) {
    std::ostringstream msg;
    msg << op << ": argument " << z << " outside [-" << model.domain_bound << ", "
        << model.domain_bound << "]";
    throw DomainError(msg.str());
  }
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

/// Log-partition function.
inline double m(const GlmModel& model, double z) {
  detail::check_domain(model, z, "m");
  switch (model.link_kind) {
    case LinkKind::Linear: return 0.5 * z * z;
    case LinkKind::Logistic:
      return z <= 0.0 ? std::log1p(std::exp(z)) : z + std::log1p(std::exp(-z));
    case LinkKind::Poisson: return std::exp(z);
  }
  throw UnsupportedLink("unknown link kind");
}

/// Inverse link, mu = m'.
inline double mu(const GlmModel& model, double z) {
  detail::check_domain(model, z, "mu");
  switch (model.link_kind) {
    case LinkKind::Linear: return z;
    case LinkKind::Logistic: return detail::sigmoid(z);
    case LinkKind::Poisson: return std::exp(z);
  }
  throw UnsupportedLink("unknown link kind");
}

inline double mu_dot(const GlmModel& model, double z) {
  detail::check_domain(model, z, "mu_dot");
  switch (model.link_kind) {
    case LinkKind::Linear: return 1.0;
    case LinkKind::Logistic: {
      const double s = detail::sigmoid(z);
      return s * (1.0 - s);
    }
    case LinkKind::Poisson: return std::exp(z);
  }
  throw UnsupportedLink("unknown link kind");
}

inline double mu_ddot(const GlmModel& model, double z) {
  detail::check_domain(model, z, "mu_ddot");
  switch (model.link_kind) {
    case LinkKind::Linear: return 0.0;
    case LinkKind::Logistic: {
      const double s = detail::sigmoid(z);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case LinkKind::Poisson: return std::exp(z);
  }
  throw UnsupportedLink("unknown link kind");
}

/// Model with tight constants over z in [-S, S].
inline GlmModel constants_for(LinkKind kind, double S) {
  if (!(S > 0.0)) throw DomainError("constants_for: S must be positive");
  GlmModel model;
  model.link_kind = kind;
  model.domain_bound = S;
  switch (kind) {
    case LinkKind::Linear:
      model.r_s = 0.0;
      model.l_mu = 1.0;
      model.kappa = 1.0;
      return model;
    case LinkKind::Logistic:
      // mu' is even and peaks at 0, so the extremes sit at 0 and at |z| = S.
      model.r_s = 1.0;
      model.l_mu = 0.25;
      model.kappa = 1.0 / mu_dot(model, S);
      return model;
    case LinkKind::Poisson:
      model.r_s = 1.0;
      model.l_mu = std::exp(S);
      model.kappa = std::exp(S);
      return model;
  }
  throw UnsupportedLink("unknown link kind");
}

struct DispersionedReward {
  double mean = 0.0;      ///< mu(z)
  double variance = 0.0;  ///< g * mu'(z)
  double raw_sample = 0.0;
};

inline void check_dispersion(const GlmModel& model, double g_tau) {
  if (!(g_tau > 0.0)) {
    std::ostringstream msg;
    msg << "dispersion g(tau) must be positive, got " << g_tau;
    throw InvalidDispersion(msg.str());
  }
  if (model.link_kind != LinkKind::Linear && std::abs(g_tau - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << to_string(model.link_kind) << " rewards require g(tau) = 1, got " << g_tau;
    throw InvalidDispersion(msg.str());
  }
}

/// Draws one reward at natural parameter z: Gaussian(z, g) for the linear
/// link, Bernoulli(mu(z)) for logistic, Poisson(e^z) for Poisson.
inline DispersionedReward sample_reward(const GlmModel& model, double z, double g_tau,
                                        RandomStream& rng) {
  check_dispersion(model, g_tau);
  DispersionedReward out;
  out.mean = mu(model, z);
  out.variance = g_tau * mu_dot(model, z);
  switch (model.link_kind) {
    case LinkKind::Linear: out.raw_sample = z + std::sqrt(g_tau) * rng.normal(); break;
    case LinkKind::Logistic: out.raw_sample = rng.bernoulli(out.mean) ? 1.0 : 0.0; break;
    case LinkKind::Poisson: out.raw_sample = static_cast<double>(rng.poisson(out.mean)); break;
  }
  return out;
}

}  // namespace hcw
