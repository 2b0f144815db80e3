#include "blno/verify.hpp"

#include <cmath>

#include "blno/blo.hpp"
#include "blno/csv.hpp"
#include "blno/quadratic_oracle.hpp"
#include "blno/rng.hpp"
#include "blno/tabular.hpp"

namespace blno {
namespace {

SoftmaxPolicy draw_policy(int actions, int dim, Rng& rng, double scale = 0.7) {
  SoftmaxPolicy policy = SoftmaxPolicy::zeros(actions, dim);
  for (Eigen::Index i = 0; i < policy.theta.size(); ++i) {
    policy.theta[i] = scale * rng.normal();
  }
  return policy;
}

VectorXd draw_vector(int dim, Rng& rng) {
  VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

std::vector<VerifyCheck> run_verification(double bound_override) {
  std::vector<VerifyCheck> checks;
  auto add = [&](const std::string& name, double max_error, double bound) {
    if (bound_override > 0.0) bound = bound_override;
    checks.push_back({name, max_error, bound, max_error <= bound});
  };

  const TabularMdp chain = TabularMdp::chain3();
  const FeatureMap features(FeatureMap::Kind::kOneHot, 3);

  // Policy evaluation against the value-iteration oracle.
  {
    Rng rng(101);
    double max_err = 0.0;
    for (int draw = 0; draw < 5; ++draw) {
      const SoftmaxPolicy policy = draw_policy(2, 3, rng);
      const MatrixXd pi = policy_matrix(chain, policy, features);
      const VectorXd v = exact_policy_eval(chain, pi);
      const VectorXd v_iter = policy_eval_sweeps(chain, pi, 10000);
      max_err = std::max(max_err, (v - v_iter).cwiseAbs().maxCoeff());
    }
    add("policy_eval_vs_value_iteration", max_err, 1e-8);
  }

  // Occupancy sums to one and reduces to the start distribution at gamma 0.
  {
    Rng rng(102);
    double max_err = 0.0;
    for (int draw = 0; draw < 5; ++draw) {
      const SoftmaxPolicy policy = draw_policy(2, 3, rng);
      const MatrixXd pi = policy_matrix(chain, policy, features);
      max_err = std::max(max_err,
                         std::abs(exact_occupancy(chain, pi).sum() - 1.0));
      TabularMdp myopic = chain;
      myopic.gamma = 0.0;
      max_err = std::max(max_err,
                         (exact_occupancy(myopic, pi) - chain.initial_dist)
                             .cwiseAbs()
                             .maxCoeff());
    }
    add("occupancy_normalization", max_err, 1e-10);
  }

  // Actor-direction critic gradient vs finite differences of the
  // detached-weighting fit error, 10 random draws.
  {
    Rng rng(103);
    double max_rel = 0.0;
    for (int draw = 0; draw < 10; ++draw) {
      const SoftmaxPolicy policy = draw_policy(2, 3, rng);
      const VectorXd omega = draw_vector(3, rng);
      const VectorXd grad =
          thm4_gradient_exact(chain, policy, omega, features);
      const MatrixXd pi_center = policy_matrix(chain, policy, features);
      const double h = 1e-6;
      for (Eigen::Index i = 0; i < policy.theta.size(); ++i) {
        SoftmaxPolicy probe = policy;
        probe.theta[i] += h;
        const double lp = exact_critic_loss(
            chain, pi_center, policy_matrix(chain, probe, features), omega,
            features);
        probe.theta[i] -= 2 * h;
        const double lm = exact_critic_loss(
            chain, pi_center, policy_matrix(chain, probe, features), omega,
            features);
        const double fd = (lp - lm) / (2 * h);
        max_rel = std::max(max_rel,
                           std::abs(fd - grad[i]) / (1.0 + std::abs(fd)));
      }
    }
    add("critic_grad_vs_finite_differences", max_rel, 1e-5);
  }

  // Advantage-estimator form of the same gradient.
  {
    Rng rng(104);
    double max_err = 0.0;
    for (int draw = 0; draw < 5; ++draw) {
      const SoftmaxPolicy policy = draw_policy(2, 3, rng);
      const VectorXd omega = draw_vector(3, rng);
      const VectorXd snapshot = draw_vector(3, rng);
      const VectorXd exact =
          thm4_gradient_exact(chain, policy, omega, features);
      const VectorXd est = thm4_gradient_estimator_form(
          chain, policy, omega, snapshot, features);
      max_err = std::max(
          max_err, (exact - est).norm() / (1.0 + exact.norm()));
    }
    add("critic_grad_estimator_consistency", max_err, 1e-8);
  }

  // Feature-difference Gram vs its finite-difference Hessian, plus strong
  // convexity of the TD loss under full-rank features.
  {
    Rng rng(105);
    const SoftmaxPolicy policy = draw_policy(2, 3, rng);
    const MatrixXd pi = policy_matrix(chain, policy, features);
    const auto thm5 = thm5_hessian_exact(chain, pi, features);
    const VectorXd omega = draw_vector(3, rng);
    const double h = 1e-4;
    double max_err = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        auto loss_at = [&](double di, double dj) {
          VectorXd probe = omega;
          probe[i] += di;
          probe[j] += dj;
          return td_loss(chain, pi, probe, features);
        };
        const double fd = (loss_at(h, h) - loss_at(h, -h) - loss_at(-h, h) +
                           loss_at(-h, -h)) /
                          (4 * h * h);
        max_err = std::max(max_err, std::abs(fd - thm5.hessian(i, j)));
      }
    }
    add("td_hessian_vs_finite_differences", max_err, 1e-6);
    add("td_hessian_strong_convexity",
        thm5.positive_definite ? 0.0 : 1.0, 0.5);
  }

  // Warm-start sensitivity bound on the quadratic family at kappa 20.
  {
    const QuadraticOracle oracle = QuadraticOracle::preset(20);
    Rng rng(106);
    const double ratio = warm_start_max_ratio(oracle, 100, rng);
    add("warm_start_ratio", ratio, oracle.lip / oracle.mu + 1e-9);
  }

  // Frozen schedule values.
  {
    const Schedule s = recommended_schedule(1.0, 1.0, 0.0, 0.0, 0.0);
    double err = std::abs(s.l_phi - 4.0) + std::abs(s.outer_lr - 1.0 / 32.0) +
                 std::abs(s.inner_lr - 1.0) + std::abs(s.inner_iters - 2.0);
    const Schedule s10 = recommended_schedule(1.0, 0.1, 0.0, 0.0, 0.0);
    err += std::abs(s10.inner_iters - 14.0);
    add("schedule_frozen_values", err, 1e-12);
  }

  return checks;
}

bool write_verification_csv(const std::string& path,
                            const std::vector<VerifyCheck>& checks) {
  CsvWriter csv(path, {"check_name", "max_error", "bound", "pass"});
  bool all_pass = true;
  for (const auto& check : checks) {
    csv.cell(check.name)
        .cell(check.max_error)
        .cell(check.bound)
        .cell(check.pass ? 1 : 0);
    csv.end_row();
    all_pass = all_pass && check.pass;
  }
  return all_pass;
}

}  // namespace blno
