#include "blno/tabular.hpp"

#include <cmath>

#include "blno/error.hpp"

namespace blno {
namespace {

MatrixXd policy_transition(const TabularMdp& mdp, const MatrixXd& pi) {
  MatrixXd p_pi = MatrixXd::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a) {
    p_pi += pi.col(a).asDiagonal() * mdp.transition[a];
  }
  return p_pi;
}

VectorXd policy_reward(const TabularMdp& mdp, const MatrixXd& pi) {
  return (pi.array() * mdp.reward.array()).rowwise().sum();
}

VectorXd one_hot_state(int s) {
  VectorXd v(1);
  v[0] = s;
  return v;
}

}  // namespace

void TabularMdp::validate() const {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw NumericError("tabular mdp: gamma must lie in [0, 1)");
  }
  for (int a = 0; a < n_actions; ++a) {
    for (int s = 0; s < n_states; ++s) {
      if (std::abs(transition[a].row(s).sum() - 1.0) > 1e-12) {
        throw NumericError("tabular mdp: transition row not stochastic");
      }
    }
  }
  if (std::abs(initial_dist.sum() - 1.0) > 1e-12) {
    throw NumericError("tabular mdp: initial distribution not normalized");
  }
}

TabularMdp TabularMdp::chain3(double slip, double gamma) {
  TabularMdp mdp;
  mdp.n_states = 3;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.initial_dist = VectorXd::Constant(3, 1.0 / 3.0);
  mdp.transition.assign(2, MatrixXd::Zero(3, 3));
  for (int s = 0; s < 3; ++s) {
    const int left = std::max(s - 1, 0);
    const int right = std::min(s + 1, 2);
    mdp.transition[0](s, left) += 1.0 - slip;
    mdp.transition[0](s, s) += slip;
    mdp.transition[1](s, right) += 1.0 - slip;
    mdp.transition[1](s, s) += slip;
  }
  mdp.reward = MatrixXd::Zero(3, 2);
  mdp.reward.row(2).setOnes();
  mdp.validate();
  return mdp;
}

TabularMdp TabularMdp::symmetric2(double gamma) {
  TabularMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.initial_dist = VectorXd::Constant(2, 0.5);
  mdp.transition.assign(2, MatrixXd::Zero(2, 2));
  // action 0 holds, action 1 toggles; both states identical up to swap
  mdp.transition[0].setIdentity();
  mdp.transition[1] << 0, 1, 1, 0;
  mdp.reward = MatrixXd::Constant(2, 2, 0.5);
  mdp.validate();
  return mdp;
}

MatrixXd policy_matrix(const TabularMdp& mdp, const SoftmaxPolicy& policy,
                       const FeatureMap& features) {
  MatrixXd pi(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    pi.row(s) = policy.probs(features(one_hot_state(s))).transpose();
  }
  return pi;
}

VectorXd exact_policy_eval(const TabularMdp& mdp, const MatrixXd& pi) {
  const MatrixXd a =
      MatrixXd::Identity(mdp.n_states, mdp.n_states) -
      mdp.gamma * policy_transition(mdp, pi);
  const VectorXd r = policy_reward(mdp, pi);
  const VectorXd v = a.partialPivLu().solve(r);
  if ((a * v - r).norm() > 1e-10 * (1.0 + r.norm())) {
    throw NumericError("exact_policy_eval: solve residual above tolerance");
  }
  return v;
}

MatrixXd exact_q(const TabularMdp& mdp, const MatrixXd& pi) {
  const VectorXd v = exact_policy_eval(mdp, pi);
  MatrixXd q(mdp.n_states, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a) {
    q.col(a) = mdp.reward.col(a) + mdp.gamma * mdp.transition[a] * v;
  }
  return q;
}

namespace {

VectorXd occupancy_from_dist(const TabularMdp& mdp, const MatrixXd& pi,
                             const VectorXd& start) {
  const MatrixXd a =
      MatrixXd::Identity(mdp.n_states, mdp.n_states) -
      mdp.gamma * policy_transition(mdp, pi).transpose();
  const VectorXd d = a.partialPivLu().solve(start);
  return (1.0 - mdp.gamma) * d;
}

}  // namespace

VectorXd exact_occupancy(const TabularMdp& mdp, const MatrixXd& pi) {
  return occupancy_from_dist(mdp, pi, mdp.initial_dist);
}

VectorXd exact_occupancy_from(const TabularMdp& mdp, const MatrixXd& pi,
                              int start_state) {
  VectorXd start = VectorXd::Zero(mdp.n_states);
  start[start_state] = 1.0;
  return occupancy_from_dist(mdp, pi, start);
}

VectorXd policy_eval_sweeps(const TabularMdp& mdp, const MatrixXd& pi,
                            int sweeps) {
  const MatrixXd p_pi = policy_transition(mdp, pi);
  const VectorXd r = policy_reward(mdp, pi);
  VectorXd v = VectorXd::Zero(mdp.n_states);
  for (int i = 0; i < sweeps; ++i) v = r + mdp.gamma * p_pi * v;
  return v;
}

MatrixXd exact_value_gradients(const TabularMdp& mdp,
                               const SoftmaxPolicy& policy,
                               const FeatureMap& features) {
  const MatrixXd pi = policy_matrix(mdp, policy, features);
  const MatrixXd q = exact_q(mdp, pi);

  // Score-weighted Q at each state: g(s') = sum_a pi(a|s') grad log pi Q.
  MatrixXd score_q(policy.theta.size(), mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    VectorXd acc = VectorXd::Zero(policy.theta.size());
    const VectorXd phi = features(one_hot_state(s));
    for (int a = 0; a < mdp.n_actions; ++a) {
      acc += pi(s, a) * policy.grad_log_prob(phi, a) * q(s, a);
    }
    score_q.col(s) = acc;
  }

  MatrixXd grads(policy.theta.size(), mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    const VectorXd occ = exact_occupancy_from(mdp, pi, s);
    grads.col(s) = score_q * occ / (1.0 - mdp.gamma);
  }
  return grads;
}

double exact_critic_loss(const TabularMdp& mdp, const MatrixXd& pi_weight,
                         const MatrixXd& pi_value, const VectorXd& omega,
                         const FeatureMap& features) {
  const VectorXd d = exact_occupancy(mdp, pi_weight);
  const VectorXd v = exact_policy_eval(mdp, pi_value);
  double loss = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    const double err = v[s] - omega.dot(features(one_hot_state(s)));
    loss += 0.5 * d[s] * err * err;
  }
  return loss;
}

double exact_critic_loss(const TabularMdp& mdp, const MatrixXd& pi,
                         const VectorXd& omega, const FeatureMap& features) {
  return exact_critic_loss(mdp, pi, pi, omega, features);
}

VectorXd thm4_gradient_exact(const TabularMdp& mdp,
                             const SoftmaxPolicy& policy,
                             const VectorXd& omega,
                             const FeatureMap& features) {
  const MatrixXd pi = policy_matrix(mdp, policy, features);
  const VectorXd d = exact_occupancy(mdp, pi);
  const VectorXd v = exact_policy_eval(mdp, pi);
  const MatrixXd value_grads = exact_value_gradients(mdp, policy, features);

  VectorXd grad = VectorXd::Zero(policy.theta.size());
  for (int s = 0; s < mdp.n_states; ++s) {
    const double err = v[s] - omega.dot(features(one_hot_state(s)));
    grad += d[s] * err * value_grads.col(s);
  }
  return grad;
}

VectorXd thm4_gradient_estimator_form(const TabularMdp& mdp,
                                      const SoftmaxPolicy& policy,
                                      const VectorXd& omega,
                                      const VectorXd& omega_snapshot,
                                      const FeatureMap& features) {
  const MatrixXd pi = policy_matrix(mdp, policy, features);
  const MatrixXd q = exact_q(mdp, pi);
  const VectorXd d = exact_occupancy(mdp, pi);

  // Advantage against the snapshot critic and targets V_k + A.
  MatrixXd adv(mdp.n_states, mdp.n_actions);
  VectorXd v_snap(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    v_snap[s] = omega_snapshot.dot(features(one_hot_state(s)));
    for (int a = 0; a < mdp.n_actions; ++a) adv(s, a) = q(s, a) - v_snap[s];
  }

  // Inner expectation per start state, with grad log pi weighted by the
  // advantage instead of Q.
  MatrixXd score_adv(policy.theta.size(), mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    VectorXd acc = VectorXd::Zero(policy.theta.size());
    const VectorXd phi = features(one_hot_state(s));
    for (int a = 0; a < mdp.n_actions; ++a) {
      acc += pi(s, a) * policy.grad_log_prob(phi, a) * adv(s, a);
    }
    score_adv.col(s) = acc;
  }

  VectorXd grad = VectorXd::Zero(policy.theta.size());
  for (int s = 0; s < mdp.n_states; ++s) {
    const VectorXd occ = exact_occupancy_from(mdp, pi, s);
    const VectorXd inner = score_adv * occ / (1.0 - mdp.gamma);
    double outer = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      outer += pi(s, a) * (v_snap[s] + adv(s, a) -
                           omega.dot(features(one_hot_state(s))));
    }
    grad += d[s] * outer * inner;
  }
  return grad;
}

Thm5Result thm5_hessian_exact(const TabularMdp& mdp, const MatrixXd& pi,
                              const FeatureMap& features) {
  const VectorXd d = exact_occupancy(mdp, pi);
  const int dim = features.dim();
  MatrixXd gram = MatrixXd::Zero(dim, dim);
  for (int s = 0; s < mdp.n_states; ++s) {
    const VectorXd phi_s = features(one_hot_state(s));
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double w = d[s] * pi(s, a) * mdp.transition[a](s, s2);
        if (w == 0.0) continue;
        const VectorXd delta =
            phi_s - mdp.gamma * features(one_hot_state(s2));
        gram += w * delta * delta.transpose();
      }
    }
  }
  Thm5Result result;
  result.hessian = gram;
  const auto eig = sym_eig(gram);
  result.mu = eig.eigenvalues[eig.eigenvalues.size() - 1];
  result.positive_definite = result.mu > 1e-10;
  return result;
}

double td_loss(const TabularMdp& mdp, const MatrixXd& pi,
               const VectorXd& omega, const FeatureMap& features) {
  const VectorXd d = exact_occupancy(mdp, pi);
  double loss = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    const VectorXd phi_s = features(one_hot_state(s));
    for (int a = 0; a < mdp.n_actions; ++a) {
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double w = d[s] * pi(s, a) * mdp.transition[a](s, s2);
        if (w == 0.0) continue;
        const VectorXd delta =
            phi_s - mdp.gamma * features(one_hot_state(s2));
        const double err = omega.dot(delta) - mdp.reward(s, a);
        loss += 0.5 * w * err * err;
      }
    }
  }
  return loss;
}

}  // namespace blno
