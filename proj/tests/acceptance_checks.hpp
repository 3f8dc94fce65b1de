#pragma once

// Numerical acceptance checks: projection, inverse maintenance, corruption
// couplings, the mirror-descent step inequality and output determinism.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "hcw/acceptance.hpp"
#include "oracles.hpp"

namespace checks {

using hcw::accept::CriterionResult;
using hcw::accept::fmt;

inline CriterionResult projection_matches_grid(int cases = 200, std::uint64_t seed = 5) {
  hcw::RandomStream rng(seed);
  double worst_gap = 0.0;      // f_impl - f_refined
  double worst_vs_grid = 0.0;  // f_impl - f_grid (1e-4 grid); must stay <= 1e-6
  double worst_violation = 0.0;
  for (int k = 0; k < cases; ++k) {
    hcw::Matrix A(2, 2);
    for (int i = 0; i < 4; ++i) A(i / 2, i % 2) = 2.0 * rng.uniform() - 1.0;
    const hcw::Matrix M = A.transpose() * A + 0.1 * hcw::Matrix::Identity(2, 2);
    hcw::Vector c(2);
    c << 6.0 * rng.uniform() - 3.0, 6.0 * rng.uniform() - 3.0;
    const double S = 0.5 + 1.5 * rng.uniform();

    const hcw::Vector theta = hcw::project_to_ball(M, c, S);
    const auto grid = oracle::grid_projection(M, c, S);
    const double f = oracle::quad(M, theta, c);
    worst_gap = std::max(worst_gap, std::abs(f - grid.refined.value));
    worst_vs_grid = std::max(worst_vs_grid, f - grid.coarse.value);
    worst_violation = std::max(worst_violation, theta.norm() - S);
  }
  const bool pass = worst_gap <= 1e-6 && worst_vs_grid <= 1e-6 && worst_violation <= 1e-9;
  return {"AC-5 projection oracle", pass,
          std::to_string(cases) + " cases, max |f - f_grid| " + fmt(worst_gap) +
              ", max f - f_grid(1e-4) " + fmt(worst_vs_grid) + ", max violation " +
              fmt(worst_violation)};
}

inline CriterionResult inverse_stays_accurate(int updates = 10000, std::uint64_t seed = 6) {
  hcw::RandomStream rng(seed);
  constexpr int d = 10;
  hcw::HessianState state(d, 1.0);
  double worst_residual = 0.0;
  double worst_direct = 0.0;
  for (int k = 1; k <= updates; ++k) {
    hcw::Vector x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    x /= std::max(1.0, x.norm());
    state.rank_one_update(x, 2.0 * rng.uniform());
    worst_residual = std::max(worst_residual, state.identity_residual());
    if (k % 500 == 0) {
      const hcw::Matrix direct = state.H().fullPivLu().inverse();
      worst_direct = std::max(worst_direct, (direct - state.H_inv()).cwiseAbs().maxCoeff());
    }
  }
  return {"AC-6 inverse drift", worst_residual <= 1e-6 && worst_direct <= 1e-8,
          std::to_string(updates) + " updates, max |H H_inv - I| " + fmt(worst_residual) +
              ", max |H_inv - inv(H)| " + fmt(worst_direct)};
}

/// The flip adversary turns the optimal cone arm into a stream that matches a
/// suboptimal arm in law, and thinning a Poisson stream gives Poisson((1-q) mean).
inline CriterionResult couplings_indistinguishable(long n = 100000, std::uint64_t seed = 7) {
  using namespace hcw;
  constexpr double S = 1.0;
  const double phi = std::numbers::pi / 4.0;
  const GlmModel logistic = constants_for(LinkKind::Logistic, S);
  const auto arms = cone_arm_list(5, phi);
  const Vector theta_star = S * arms[0];
  const double q = cone_gap(logistic, S, phi) / mu(logistic, S);

  RandomStream reward_rng = RandomStream::derive(seed, {1});
  RandomStream adv_rng = RandomStream::derive(seed, {2});
  Adversary flip = make_bernoulli_flip_adversary(std::nullopt, q, 1e18);
  const AdversaryContext ctx{&arms[0]};
  long ones_corrupted = 0, ones_sub = 0;
  for (long i = 0; i < n; ++i) {
    const double r = sample_reward(logistic, arms[0].dot(theta_star), 1.0, reward_rng).raw_sample;
    if (flip.corrupt(i + 1, arms[0], r, ctx, adv_rng).r_after == 1.0) ++ones_corrupted;
    if (sample_reward(logistic, arms[1].dot(theta_star), 1.0, reward_rng).raw_sample == 1.0) ++ones_sub;
  }
  const double ks = oracle::ks_binary(ones_corrupted, n, ones_sub, n);
  const double crit = oracle::ks_critical_1pct(n, n);

  const GlmModel poisson = constants_for(LinkKind::Poisson, S);
  const double lam = mu(poisson, S);
  const double q_thin = 0.3;
  Adversary thin = make_poisson_thinning_adversary(std::nullopt, q_thin, 1e18);
  const AdversaryContext thin_ctx{&arms[0]};
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    const double r = sample_reward(poisson, S, 1.0, reward_rng).raw_sample;
    const double kept = thin.corrupt(i + 1, arms[0], r, thin_ctx, adv_rng).r_after;
    sum += kept;
    sum_sq += kept * kept;
  }
  const double nn = static_cast<double>(n);
  const double target = (1.0 - q_thin) * lam;
  const double mean = sum / nn;
  const double var = (sum_sq - nn * mean * mean) / (nn - 1.0);
  const double se_mean = std::sqrt(target / nn);
  const double se_var = std::sqrt((target + 2.0 * target * target) / nn);
  const double z_mean = std::abs(mean - target) / se_mean;
  const double z_var = std::abs(var - target) / se_var;

  const bool pass = ks < crit && z_mean <= 4.0 && z_var <= 4.0;
  return {"AC-7 coupling indistinguishability", pass,
          "flip KS " + fmt(ks) + " vs 1% critical " + fmt(crit) + "; thinning mean " + fmt(mean) +
              " var " + fmt(var) + " target " + fmt(target) + " (|z| " + fmt(z_mean) + ", " +
              fmt(z_var) + ")"};
}

/// One random round through the estimator; returns the worst slack of the
/// step inequality over several comparison points u in the ball.
inline double random_round_slack(hcw::LinkKind link, hcw::RandomStream& rng) {
  using namespace hcw;
  const long d = 2 + static_cast<long>(rng.uniform() * 5.0);
  const double S = 0.5 + 1.5 * rng.uniform();
  const GlmModel model = constants_for(link, S);
  HcwHyperparams h;
  h.S = S;
  h.eta = 0.5 + 2.0 * rng.uniform();
  h.lambda = 0.1 + 5.0 * rng.uniform();
  h.alpha = 0.05 + 2.0 * rng.uniform();
  h.C_budget = 10.0 * rng.uniform();
  EstimatorState state(model, h, d);

  auto random_ball = [&](double radius) -> Vector {
    Vector v(d);
    for (long i = 0; i < d; ++i) v[i] = rng.normal();
    return (radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / v.norm()) * v;
  };
  auto random_reward = [&](const Vector& x) {
    const double z = x.dot(state.theta);
    if (link == LinkKind::Linear) return z + 3.0 * rng.normal();
    if (link == LinkKind::Logistic) return rng.bernoulli(0.5) ? 1.0 : 0.0;
    return static_cast<double>(rng.poisson(std::exp(z)));
  };
  auto random_g = [&] { return link == LinkKind::Linear ? 0.05 + 2.0 * rng.uniform() : 1.0; };

  const int warmup = static_cast<int>(rng.uniform() * 20.0);
  for (int i = 0; i < warmup; ++i) {
    const Vector x = random_ball(1.0);
    omd_update(state, x, random_reward(x), random_g());
  }
  const Vector x = random_ball(1.0);
  const UpdateTrace tr = omd_update(state, x, random_reward(x), random_g());

  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    Vector u = random_ball(S);
    if (k < 2) u *= S / u.norm();  // boundary points
    worst = std::min(worst, oracle::mirror_descent_slack(tr.hessian_before, tr.curvature, tr.gradient,
                                                         h.eta, tr.theta_before, state.theta, u));
  }
  return worst;
}

inline CriterionResult step_inequality_holds(int rounds = 500, std::uint64_t seed = 8) {
  hcw::RandomStream rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  const hcw::LinkKind links[] = {hcw::LinkKind::Linear, hcw::LinkKind::Logistic, hcw::LinkKind::Poisson};
  for (int i = 0; i < rounds; ++i) worst = std::min(worst, random_round_slack(links[i % 3], rng));
  return {"AC-8 update inequality", worst >= -1e-8,
          std::to_string(rounds) + " rounds over linear/logistic/poisson, min slack " + fmt(worst)};
}

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Byte comparison of every regular file under two output trees.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, long& files,
                      std::string& first_mismatch) {
  namespace fs = std::filesystem;
  files = 0;
  std::vector<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel_a.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.push_back(fs::relative(e.path(), b));
  std::sort(rel_a.begin(), rel_a.end());
  std::sort(rel_b.begin(), rel_b.end());
  if (rel_a != rel_b) {
    first_mismatch = "file lists differ";
    return false;
  }
  for (const auto& r : rel_a) {
    ++files;
    if (read_bytes(a / r) != read_bytes(b / r)) {
      first_mismatch = r.string();
      return false;
    }
  }
  return true;
}

/// Reruns a built-in suite into two fresh directories, the second with more
/// worker threads, and compares the outputs byte for byte.
inline CriterionResult rerun_is_identical(const std::filesystem::path& work_dir,
                                          hcw::accept::Suite suite = hcw::accept::Suite::Coverage) {
  namespace fs = std::filesystem;
  std::ostringstream sink;
  hcw::accept::SuiteOptions a, b;
  a.work_dir = work_dir / "rerun_a";
  b.work_dir = work_dir / "rerun_b";
  b.jobs = 3;
  fs::remove_all(a.work_dir);
  fs::remove_all(b.work_dir);
  hcw::accept::run_suite(suite, a, sink);
  hcw::accept::run_suite(suite, b, sink);
  long files = 0;
  std::string mismatch;
  const bool same = same_tree(a.work_dir, b.work_dir, files, mismatch);
  return {"AC-9 determinism", same && files > 0,
          same ? std::string(hcw::accept::to_string(suite)) + " suite rerun: " + std::to_string(files) +
                     " files byte-identical"
               : "outputs differ: " + mismatch};
}

}  // namespace checks
