#pragma once

// Slow, independent reference computations the tests compare against.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double quad(const Mat& M, const Vec& theta, const Vec& center) {
  const Vec d = theta - center;
  return d.dot(M * d);
}

struct GridResult {
  Vec theta;
  double value = std::numeric_limits<double>::infinity();
};

/// Best feasible point of a plain 2-d grid with spacing `step` over [-S, S]^2,
/// restricted to a window around `focus` of half-width `radius`.
inline GridResult grid_window(const Mat& M, const Vec& center, double S, const Vec& focus,
                              double radius, double step) {
  GridResult best;
  best.theta = Vec::Zero(2);
  const double x0 = std::max(-S, focus[0] - radius), x1 = std::min(S, focus[0] + radius);
  const double y0 = std::max(-S, focus[1] - radius), y1 = std::min(S, focus[1] + radius);
  const long nx = static_cast<long>(std::floor((x1 - x0) / step));
  const long ny = static_cast<long>(std::floor((y1 - y0) / step));
  Vec p(2);
  for (long i = 0; i <= nx; ++i) {
    p[0] = x0 + static_cast<double>(i) * step;
    for (long j = 0; j <= ny; ++j) {
      p[1] = y0 + static_cast<double>(j) * step;
      if (p.squaredNorm() > S * S) continue;
      const double v = quad(M, p, center);
      if (v < best.value) {
        best.value = v;
        best.theta = p;
      }
    }
  }
  return best;
}

/// Best point of an angular grid on the circle of radius S, angles in
/// [a0, a1] with spacing `step`.
inline GridResult circle_window(const Mat& M, const Vec& center, double S, double a0, double a1,
                                double step) {
  GridResult best;
  best.theta = Vec::Zero(2);
  const long n = static_cast<long>(std::ceil((a1 - a0) / step));
  Vec p(2);
  for (long i = 0; i <= n; ++i) {
    const double a = a0 + static_cast<double>(i) * step;
    p << S * std::cos(a), S * std::sin(a);
    const double v = quad(M, p, center);
    if (v < best.value) {
      best.value = v;
      best.theta = p;
    }
  }
  return best;
}

/// Grid search for min ||theta - c||_M^2 over ||theta|| <= S in 2-d.
///
/// `coarse` is the best point of a uniform 1e-4 grid of the disk (found by
/// zooming a 1e-2 grid in on the minimizer, which is safe for a convex
/// objective) together with a 1e-4-spaced scan of the boundary circle.
/// `refined` keeps zooming both searches down to 1e-9.
struct ProjectionOracle {
  GridResult coarse;
  GridResult refined;
};

inline ProjectionOracle grid_projection(const Mat& M, const Vec& center, double S) {
  ProjectionOracle out;
  auto zoom_disk = [&](double final_step) {
    GridResult g = grid_window(M, center, S, Vec::Zero(2), S, 1e-2);
    for (double step = 1e-3; step >= final_step * 0.999; step /= 10.0) {
      g = grid_window(M, center, S, g.theta, 20.0 * step, step);
    }
    return g;
  };
  auto zoom_circle = [&](double final_step) {
    double step = 1e-2 / S;
    GridResult g = circle_window(M, center, S, 0.0, 2.0 * std::numbers::pi, step);
    double angle = std::atan2(g.theta[1], g.theta[0]);
    while (step > final_step / S * 1.001) {
      step /= 10.0;
      g = circle_window(M, center, S, angle - 20.0 * step, angle + 20.0 * step, step);
      angle = std::atan2(g.theta[1], g.theta[0]);
    }
    return g;
  };
  const GridResult d4 = zoom_disk(1e-4), c4 = zoom_circle(1e-4);
  out.coarse = d4.value <= c4.value ? d4 : c4;
  const GridResult d9 = zoom_disk(1e-9), c9 = zoom_circle(1e-9);
  out.refined = d9.value <= c9.value ? d9 : c9;
  return out;
}

/// Slack of the one-step mirror-descent inequality measured in the H metric:
///   2 eta <grad f(theta'), u - theta'> + ||theta - u||_H^2 - ||theta - theta'||_H^2
///   - ||theta' - u||_H^2,
/// where f(v) = <g, v - theta> + 1/2 ||v - theta||_A^2 is the quadratic
/// model of the loss at theta. Nonnegative whenever theta' minimizes
/// f + ||. - theta||_H^2 / (2 eta) over a convex set containing u.
inline double mirror_descent_slack(const Mat& H, const Mat& A, const Vec& g, double eta,
                                   const Vec& theta, const Vec& theta_next, const Vec& u) {
  auto sq = [&](const Vec& v) { return v.dot(H * v); };
  const Vec grad_f = g + A * (theta_next - theta);
  return 2.0 * eta * grad_f.dot(u - theta_next) + sq(theta - u) - sq(theta - theta_next) -
         sq(theta_next - u);
}

/// Two-sample Kolmogorov-Smirnov statistic for {0,1} samples given as counts
/// of ones: the ECDFs only differ on [0, 1).
inline double ks_binary(long ones_a, long n_a, long ones_b, long n_b) {
  const double fa = 1.0 - static_cast<double>(ones_a) / static_cast<double>(n_a);
  const double fb = 1.0 - static_cast<double>(ones_b) / static_cast<double>(n_b);
  return std::abs(fa - fb);
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
inline double ks_critical_1pct(long n_a, long n_b) {
  const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
  return 1.628 * std::sqrt((na + nb) / (na * nb));
}

// Textbook formulas for the GLM links, written independently of the library.
inline double logistic_mu(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double logistic_m(double z) { return std::log(1.0 + std::exp(z)); }

/// Central difference derivative of f at z.
template <typename F>
double derivative(F&& f, double z, double h = 1e-5) {
  return (f(z + h) - f(z - h)) / (2.0 * h);
}

/// Composite Simpson integral of f over [a, b] with n (even) panels.
template <typename F>
double simpson(F&& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
