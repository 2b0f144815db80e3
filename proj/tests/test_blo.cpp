#include <cmath>

#include "blno/blo.hpp"
#include "blno/error.hpp"
#include "blno/quadratic_oracle.hpp"
#include "blno/rng.hpp"
#include "doctest.h"

using blno::BilevelProblem;
using blno::BloConfig;
using blno::IhvpConfig;
using blno::MatrixXd;
using blno::QuadraticOracle;
using blno::Rng;
using blno::VectorXd;

namespace {

VectorXd random_vector(int n, Rng& rng) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("problem callbacks satisfy symmetry and strong convexity probes") {
  const QuadraticOracle oracle = QuadraticOracle::preset(20);
  const BilevelProblem p = oracle.problem();
  Rng rng(1);
  const VectorXd x = random_vector(p.outer_dim, rng);
  const VectorXd y = random_vector(p.inner_dim, rng);
  const auto h = p.hess_yy_g(x, y);
  for (int trial = 0; trial < 10; ++trial) {
    const VectorXd u = random_vector(p.inner_dim, rng);
    const VectorXd v = random_vector(p.inner_dim, rng);
    CHECK(std::abs(u.dot(h->apply(v)) - v.dot(h->apply(u))) <=
          1e-8 * (1.0 + u.norm() * v.norm() * p.lip));
    CHECK(v.dot(h->apply(v)) >= p.mu * v.squaredNorm() - 1e-8);
  }
}

TEST_CASE("inner_descent closed forms") {
  const QuadraticOracle oracle = QuadraticOracle::preset(20);
  const BilevelProblem p = oracle.problem();
  Rng rng(2);
  const VectorXd x = random_vector(p.outer_dim, rng);

  // Stationary start stays put.
  const VectorXd y_opt = oracle.y_star(x);
  auto [y_same, g_same] = blno::inner_descent(p, x, y_opt, 5, 1.0 / p.lip);
  CHECK((y_same - y_opt).norm() <= 1e-10);

  // One exact step on g = 1/2 ||y||^2.
  BilevelProblem iso;
  iso.outer_dim = 1;
  iso.inner_dim = 3;
  iso.grad_y_g = [](const VectorXd&, const VectorXd& y) -> VectorXd {
    return y;
  };
  VectorXd y0(3);
  y0 << 1, -2, 3;
  auto [y1, g1] = blno::inner_descent(iso, VectorXd::Zero(1), y0, 1, 1.0);
  CHECK(y1.norm() == 0.0);
  CHECK(g1 == 0.0);

  // Contraction rate (1 - lr * mu)^D toward the closed-form minimizer.
  const VectorXd y_start = random_vector(p.inner_dim, rng);
  const int steps = 25;
  const double lr = 1.0 / p.lip;
  auto [y_end, g_end] = blno::inner_descent(p, x, y_start, steps, lr);
  const double bound = std::pow(1.0 - lr * p.mu, steps) *
                           (y_start - y_opt).norm() +
                       1e-9;
  CHECK((y_end - y_opt).norm() <= bound);
}

TEST_CASE("hypergradient with zero inner coupling reduces to the direct term") {
  QuadraticOracle oracle = QuadraticOracle::preset(5);
  oracle.b.setZero();  // f no longer depends on x through y*
  const BilevelProblem p = oracle.problem();
  Rng rng(3);
  const VectorXd x = random_vector(p.outer_dim, rng);
  const VectorXd y = oracle.y_star(x);
  auto [hg, report] = blno::hypergradient(p, x, y, IhvpConfig::exact(0.0), rng);
  CHECK((hg - p.grad_x_f(x, y)).norm() == 0.0);
}

TEST_CASE("hypergradient matches the analytic gradient and finite differences") {
  for (const int kappa : {5, 50}) {
    const QuadraticOracle oracle = QuadraticOracle::preset(kappa);
    const BilevelProblem p = oracle.problem();
    Rng rng(100 + kappa);
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd x = random_vector(p.outer_dim, rng);
      const VectorXd y = oracle.y_star(x);
      auto [hg, report] =
          blno::hypergradient(p, x, y, IhvpConfig::exact(0.0), rng);

      const VectorXd analytic = oracle.hypergrad(x);
      CHECK((hg - analytic).norm() <= 1e-8 * (1.0 + analytic.norm()));

      // Central differences of Phi(x) = f(x, y*(x)).
      const double h = 1e-5;
      for (int i = 0; i < p.outer_dim; ++i) {
        VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (oracle.phi(xp) - oracle.phi(xm)) / (2.0 * h);
        CHECK(std::abs(fd - hg[i]) <= 1e-4 * (1.0 + std::abs(fd)));
      }
    }
  }
}

TEST_CASE("full-rank sketch reproduces the exact regularized hypergradient") {
  const QuadraticOracle oracle = QuadraticOracle::preset(20);
  const BilevelProblem p = oracle.problem();
  Rng rng(4);
  const VectorXd x = random_vector(p.outer_dim, rng);
  const VectorXd y = oracle.y_star(x) + 0.1 * random_vector(p.inner_dim, rng);
  for (const double rho : {0.01, 1.0, 50.0}) {
    Rng r1(7), r2(7);
    auto [hg_exact, rep_e] =
        blno::hypergradient(p, x, y, IhvpConfig::exact(rho), r1);
    auto [hg_nys, rep_n] = blno::hypergradient(
        p, x, y, IhvpConfig::nystrom(p.inner_dim, rho), r2);
    CHECK((hg_exact - hg_nys).norm() <= 1e-8 * (1.0 + hg_exact.norm()));
  }
}

TEST_CASE("solve with zero outer step leaves x unchanged") {
  const QuadraticOracle oracle = QuadraticOracle::preset(5);
  BloConfig config;
  config.outer_lr = 0.0;
  config.inner_lr = 1.0 / oracle.lip;
  config.outer_iters = 1;
  config.inner_iters = 3;
  config.ihvp = IhvpConfig::exact(0.0);
  Rng rng(5);
  const VectorXd x0 = VectorXd::Constant(8, 0.3);
  const auto record = blno::solve(oracle.problem(), config, x0,
                                  VectorXd::Zero(16), rng);
  CHECK((record.x_final - x0).norm() == 0.0);
  CHECK(record.rows.size() == 1);

  config.inner_iters = 0;
  CHECK_THROWS_AS(blno::solve(oracle.problem(), config, x0,
                              VectorXd::Zero(16), rng),
                  blno::NumericError);
}

TEST_CASE("solve converges on the oracle with the exact solver") {
  const QuadraticOracle oracle = QuadraticOracle::preset(50);
  BloConfig config;
  config.outer_lr = 0.5;
  config.inner_lr = 1.0 / oracle.lip;
  config.outer_iters = 500;
  config.inner_iters = 60;
  config.warm_start = true;
  config.ihvp = IhvpConfig::exact(0.0);
  config.target_eps = 1e-6;
  Rng rng(6);
  const VectorXd x0 = VectorXd::Constant(8, 1.0);
  const auto record =
      blno::solve(oracle.problem(), config, x0, VectorXd::Zero(16), rng);
  CHECK_FALSE(record.aborted);
  CHECK(record.rows.back().hypergrad_norm_sq <= 1e-6);
  CHECK(record.stationary);
}

TEST_CASE("auto schedule run descends and the sketch solver tracks exact") {
  const QuadraticOracle oracle = QuadraticOracle::preset(20);
  const auto sched =
      blno::recommended_schedule(oracle.lip, oracle.mu, 0.0, 0.0, 0.01);
  BloConfig config;
  config.outer_lr = sched.outer_lr;
  config.inner_lr = sched.inner_lr;
  config.inner_iters = sched.inner_iters;
  config.outer_iters = 800;
  config.ihvp = IhvpConfig::exact(0.01);
  Rng rng(7);
  const VectorXd x0 = blno::preset_x0(oracle, 0.01);
  const auto exact_run =
      blno::solve(oracle.problem(), config, x0, VectorXd::Zero(16), rng);
  CHECK_FALSE(exact_run.aborted);

  // Phi decreases on at least 95% of iterations under the theory schedule.
  int descents = 0;
  for (std::size_t k = 1; k < exact_run.f_values.size(); ++k) {
    if (exact_run.f_values[k] <= exact_run.f_values[k - 1] + 1e-9) ++descents;
  }
  CHECK(descents >= static_cast<int>(0.95 * (exact_run.f_values.size() - 1)));

  config.ihvp = IhvpConfig::nystrom(8, 0.01);
  Rng rng2(7);
  const auto nys_run =
      blno::solve(oracle.problem(), config, x0, VectorXd::Zero(16), rng2);
  CHECK_FALSE(nys_run.aborted);

  // Slack from the sketch error estimate.
  const auto eig = blno::sym_eig(oracle.a);
  const double lambda_next = eig.eigenvalues[8];
  double grad_bound = 0.0;
  for (const auto& row : nys_run.rows) grad_bound = std::max(grad_bound, 1.0);
  const double psi =
      blno::nystrom_error_bound(grad_bound, 0.01, lambda_next, 0.0, 16, 1.0);
  const double slack = 10.0 * oracle.lip * oracle.lip * psi * psi;
  CHECK(nys_run.mean_hypergrad_norm_sq <=
        exact_run.mean_hypergrad_norm_sq + slack);
}

TEST_CASE("warm starts never lose to cold starts on inner work") {
  const QuadraticOracle oracle = QuadraticOracle::preset(20);
  BloConfig config;
  config.outer_lr = 0.2;
  config.inner_lr = 1.0 / oracle.lip;
  config.outer_iters = 400;
  config.inner_iters = 3;
  config.ihvp = IhvpConfig::exact(0.0);
  const VectorXd x0 = VectorXd::Constant(8, 0.5);
  const double threshold = 1e-8;

  auto first_below = [&](bool warm) {
    BloConfig c = config;
    c.warm_start = warm;
    Rng rng(8);
    const auto record =
        blno::solve(oracle.problem(), c, x0, VectorXd::Zero(16), rng);
    for (const auto& row : record.rows) {
      if (row.hypergrad_norm_sq <= threshold) return row.k;
    }
    return config.outer_iters + 1;
  };
  const int warm_iters = first_below(true);
  const int cold_iters = first_below(false);
  CHECK(warm_iters <= cold_iters);
}

TEST_CASE("lemma-style warm start ratio is bounded by kappa") {
  const QuadraticOracle oracle = QuadraticOracle::preset(20);
  Rng rng(9);
  const double ratio = blno::warm_start_max_ratio(oracle, 100, rng);
  CHECK(ratio <= oracle.lip / oracle.mu + 1e-9);

  QuadraticOracle uncoupled = oracle;
  uncoupled.b.setZero();
  Rng rng2(10);
  CHECK(blno::warm_start_max_ratio(uncoupled, 10, rng2) == 0.0);

  // Closed form: the ratio is the operator norm of A^{-1} B^T.
  const MatrixXd sens = oracle.b * blno::dense_inverse(oracle.a);
  const auto eig = blno::sym_eig(sens * sens.transpose());
  const double op_norm = std::sqrt(std::max(0.0, eig.eigenvalues[0]));
  CHECK(op_norm <= oracle.lip / oracle.mu + 1e-9);
}

TEST_CASE("recommended_schedule frozen values") {
  const auto s = blno::recommended_schedule(1.0, 1.0, 0.0, 0.0, 0.0);
  CHECK(s.l_phi == doctest::Approx(4.0));
  CHECK(s.outer_lr == doctest::Approx(1.0 / 32.0));
  CHECK(s.inner_lr == doctest::Approx(1.0));
  CHECK(s.inner_iters == 2);

  const auto s10 = blno::recommended_schedule(1.0, 0.1, 0.0, 0.0, 0.0);
  CHECK(s10.inner_iters == 14);

  // L_phi is monotone in the Lipschitz constant.
  const auto s2 = blno::recommended_schedule(2.0, 1.0, 0.3, 0.7, 0.0);
  const auto s1 = blno::recommended_schedule(1.0, 1.0, 0.3, 0.7, 0.0);
  CHECK(s2.l_phi >= 2.0 * s1.l_phi - 1e-12);
}

TEST_CASE("regularized exact and full-rank sketch agree for every rho") {
  const QuadraticOracle oracle = QuadraticOracle::preset(5);
  const BilevelProblem p = oracle.problem();
  Rng rng(11);
  const VectorXd x = random_vector(p.outer_dim, rng);
  const VectorXd y = random_vector(p.inner_dim, rng);
  for (const double rho : {1e-3, 0.1, 10.0, 1000.0}) {
    Rng r1(12), r2(12);
    auto [a, ra] = blno::hypergradient(p, x, y, IhvpConfig::exact(rho), r1);
    auto [b, rb] =
        blno::hypergradient(p, x, y, IhvpConfig::nystrom(16, rho), r2);
    CHECK((a - b).norm() <= 1e-8 * (1.0 + a.norm()));
  }
}
