#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hcw/errors.hpp"

namespace hcw {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace detail {

inline void check_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    std::ostringstream msg;
    msg << what << ": expected dimension " << expected << ", got " << got;
    throw ShapeError(msg.str());
  }
}

inline void symmetrize(Matrix& a) {
  a = 0.5 * (a + a.transpose()).eval();
}

}  // namespace detail

/// Running sum of squared weighted-feature norms for the elliptical potential
/// bound: sum_t ||z_t||^2_{V_t^{-1}} <= 2d(1 + X^2) log(1 + t X^2 / (d lambda)).
struct EllipticalPotential {
  double sum = 0.0;
  double max_sq_norm = 0.0;  ///< X^2, largest ||z_t||^2 seen so far
  long rounds = 0;

  /// The (1 + X^2) factor needs lambda >= 1; below that it is replaced by
  /// (1 + X^2 / lambda), which is what log(1+u) >= u / (1 + X^2/lambda) gives.
  double bound(Eigen::Index dim, double lambda) const {
    if (rounds == 0) return 0.0;
    const double d = static_cast<double>(dim);
    const double lead = 1.0 + max_sq_norm / std::min(lambda, 1.0);
    return 2.0 * d * lead *
           std::log1p(static_cast<double>(rounds) * max_sq_norm / (d * lambda));
  }
};

/// Regularized weighted design matrix H = lambda I + sum_s c_s x_s x_s^T with
/// a maintained inverse.
///
/// The inverse is carried by Sherman-Morrison updates and rebuilt from a
/// Cholesky factorization every `kRefactorCadence` updates, or sooner when a
/// probe of H * H_inv against the identity drifts past `kDriftTolerance`.
class HessianState {
 public:
  static constexpr int kRefactorCadence = 1000;
  static constexpr double kDriftTolerance = 1e-7;

  HessianState(Eigen::Index dim, double lambda)
      : lambda_(lambda),
        h_(Matrix::Identity(dim, dim) * lambda),
        h_inv_(Matrix::Identity(dim, dim) / lambda) {
    if (dim < 1) throw ShapeError("HessianState: dimension must be at least 1");
    if (!(lambda > 0.0)) throw InvalidCoefficient("HessianState: lambda must be positive");
  }

  Eigen::Index dim() const { return h_.rows(); }
  double lambda() const { return lambda_; }
  const Matrix& H() const { return h_; }
  const Matrix& H_inv() const { return h_inv_; }
  int updates_since_refactor() const { return updates_since_refactor_; }
  const EllipticalPotential& potential() const { return potential_; }

  /// H <- H + c x x^T.
  void rank_one_update(const Vector& x, double c) {
    detail::check_dim(dim(), x.size(), "rank_one_update");
    if (!(c >= 0.0)) {
      std::ostringstream msg;
      msg << "rank_one_update: coefficient must be nonnegative, got " << c;
      throw InvalidCoefficient(msg.str());
    }
    if (c == 0.0) return;

    const Vector hx = h_inv_ * x;
    const double quad = x.dot(hx);
    potential_.sum += c * quad;
    potential_.max_sq_norm = std::max(potential_.max_sq_norm, c * x.squaredNorm());
    ++potential_.rounds;
    assert(potential_.sum <= potential_.bound(dim(), lambda_) + 1e-9);

    h_inv_.noalias() -= (c / (1.0 + c * quad)) * hx * hx.transpose();
    h_.noalias() += c * x * x.transpose();
    detail::symmetrize(h_inv_);
    detail::symmetrize(h_);

    ++updates_since_refactor_;
    if (updates_since_refactor_ >= kRefactorCadence || probe_drift(x) > kDriftTolerance) {
      refactor();
    }
  }

  /// Rebuilds H_inv from a Cholesky factorization of H.
  void refactor() {
    Eigen::LLT<Matrix> llt(h_);
    if (llt.info() != Eigen::Success) throw SingularMetric("HessianState: H lost definiteness");
    h_inv_ = llt.solve(Matrix::Identity(dim(), dim()));
    detail::symmetrize(h_inv_);
    updates_since_refactor_ = 0;
  }

  /// max-entry norm of H * H_inv - I.
  double identity_residual() const {
    return (h_ * h_inv_ - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }

 private:
  double probe_drift(const Vector& x) const {
    const double n = x.norm();
    if (n == 0.0) return 0.0;
    const Vector v = x / n;
    return (h_ * (h_inv_ * v) - v).cwiseAbs().maxCoeff();
  }

  double lambda_;
  Matrix h_;
  Matrix h_inv_;
  int updates_since_refactor_ = 0;
  EllipticalPotential potential_;
};

/// sqrt(v^T H v), or sqrt(v^T H^{-1} v) when `inverse` is set.
inline double mahalanobis_norm(const HessianState& state, const Vector& v, bool inverse) {
  detail::check_dim(state.dim(), v.size(), "mahalanobis_norm");
  const Matrix& a = inverse ? state.H_inv() : state.H();
  return std::sqrt(std::max(0.0, v.dot(a * v)));
}

/// argmin over ||theta||_2 <= S of (theta - center)^T M (theta - center).
///
/// Interior centers are returned unchanged. Otherwise the KKT point
/// theta(nu) = (M + nu I)^{-1} M center is located by bisection on
/// ||theta(nu)||_2 = S; the norm is monotone decreasing in nu.
inline Vector project_to_ball(const Matrix& M, const Vector& center, double S) {
  const Eigen::Index d = center.size();
  if (M.rows() != d || M.cols() != d) {
    std::ostringstream msg;
    msg << "project_to_ball: metric is " << M.rows() << "x" << M.cols() << ", center has "
        << d << " entries";
    throw ShapeError(msg.str());
  }
  if (!(S > 0.0)) throw DomainError("project_to_ball: radius must be positive");
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw SingularMetric("project_to_ball: metric is not PD");

  if (center.norm() <= S) return center;

  const Vector m_center = M * center;
  const Matrix eye = Matrix::Identity(d, d);
  auto theta_at = [&](double nu) -> Vector {
    Eigen::LLT<Matrix> shifted(M + nu * eye);
    return shifted.solve(m_center);
  };

  constexpr double kNormTolerance = 1e-10;
  double lo = 0.0;
  double hi = std::max(M.cwiseAbs().maxCoeff() * static_cast<double>(d), 1e-12);
  Vector theta_hi = theta_at(hi);
  for (int i = 0; i < 200 && theta_hi.norm() >= S; ++i) {
    lo = hi;
    hi *= 2.0;
    theta_hi = theta_at(hi);
  }

  Vector best = theta_hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    Vector theta_mid = theta_at(mid);
    const double norm = theta_mid.norm();
    if (norm > S) {
      lo = mid;
    } else {
      hi = mid;
      best = std::move(theta_mid);
    }
    if (std::abs(norm - S) <= kNormTolerance || hi - lo <= 1e-15 * hi) {
      if (norm <= S) break;
      best = std::move(theta_mid);
      break;
    }
  }
  const double norm = best.norm();
  if (norm > S) best *= S / norm;
  return best;
}

}  // namespace hcw
