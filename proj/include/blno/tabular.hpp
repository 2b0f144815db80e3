#ifndef BLNO_TABULAR_HPP_
#define BLNO_TABULAR_HPP_

#include <vector>

#include "blno/linalg.hpp"
#include "blno/policy.hpp"

namespace blno {

// Enumerable MDP: transition[a](s, s') is the probability of s -> s' under
// action a, reward(s, a) the immediate reward, initial_dist the start-state
// distribution. All occupancies below use the (1 - gamma)-normalized
// convention, so they sum to one.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<MatrixXd> transition;
  MatrixXd reward;  // n_states x n_actions
  double gamma = 0.0;
  VectorXd initial_dist;

  void validate() const;  // row-stochastic rows, gamma in [0,1)

  // 3-state, 2-action chain with slip probability `slip`: action 1 moves
  // right, action 0 moves left (clamped at the ends), the move succeeds
  // with probability 1-slip, and being in the last state pays reward 1.
  static TabularMdp chain3(double slip = 0.1, double gamma = 0.9);

  // Two states mirroring each other, for symmetry checks: each action
  // toggles or holds, identical rewards.
  static TabularMdp symmetric2(double gamma = 0.8);
};

// pi(s, a) rows from a softmax policy over one-hot state features.
MatrixXd policy_matrix(const TabularMdp& mdp, const SoftmaxPolicy& policy,
                       const FeatureMap& features);

// V^pi from the linear system (I - gamma P_pi) V = r_pi.
VectorXd exact_policy_eval(const TabularMdp& mdp, const MatrixXd& pi);

// Q^pi(s, a) = r(s, a) + gamma sum_s' P(s'|s,a) V(s').
MatrixXd exact_q(const TabularMdp& mdp, const MatrixXd& pi);

// Normalized discounted occupancy d^pi = (1-gamma) rho0^T (I - gamma P_pi)^{-1}.
VectorXd exact_occupancy(const TabularMdp& mdp, const MatrixXd& pi);

// Same with a deterministic start state.
VectorXd exact_occupancy_from(const TabularMdp& mdp, const MatrixXd& pi,
                              int start_state);

// Value-iteration policy evaluation, a second oracle for exact_policy_eval.
VectorXd policy_eval_sweeps(const TabularMdp& mdp, const MatrixXd& pi,
                            int sweeps);

// d log pi / d theta-weighted value gradients: column s holds
//   grad_theta V^pi(s) = 1/(1-gamma) * E_{s' ~ d^pi_s, a ~ pi}
//                        [grad log pi(a|s') Q^pi(s', a)].
MatrixXd exact_value_gradients(const TabularMdp& mdp,
                               const SoftmaxPolicy& policy,
                               const FeatureMap& features);

// Critic fit error 1/2 sum_s d^pi_w(s) (V^pi_v(s) - omega.phi(s))^2 with the
// state weighting taken from pi_weight and the value from pi_value. The
// single-policy form weights by the value policy's own occupancy.
double exact_critic_loss(const TabularMdp& mdp, const MatrixXd& pi_weight,
                         const MatrixXd& pi_value, const VectorXd& omega,
                         const FeatureMap& features);
double exact_critic_loss(const TabularMdp& mdp, const MatrixXd& pi,
                         const VectorXd& omega, const FeatureMap& features);

// Exact actor-direction gradient of the critic fit error with the state
// weighting detached:
//   sum_s d^pi(s) (V^pi(s) - omega.phi(s)) grad_theta V^pi(s).
VectorXd thm4_gradient_exact(const TabularMdp& mdp,
                             const SoftmaxPolicy& policy,
                             const VectorXd& omega,
                             const FeatureMap& features);

// Advantage-and-target form of the same quantity against a snapshot critic:
// identical in exact expectation whenever the advantages are exact.
VectorXd thm4_gradient_estimator_form(const TabularMdp& mdp,
                                      const SoftmaxPolicy& policy,
                                      const VectorXd& omega,
                                      const VectorXd& omega_snapshot,
                                      const FeatureMap& features);

// Feature-difference Gram of the TD loss 1/2 E (omega.phiDelta - r)^2:
//   E_{s ~ d^pi, a ~ pi, s' ~ P}[phiDelta phiDelta^T],
// with phiDelta = phi(s) - gamma phi(s'). mu is its smallest eigenvalue.
struct Thm5Result {
  MatrixXd hessian;
  double mu = 0.0;
  bool positive_definite = false;
};
Thm5Result thm5_hessian_exact(const TabularMdp& mdp, const MatrixXd& pi,
                              const FeatureMap& features);

// The TD loss itself, for finite-difference checks of the Gram above.
double td_loss(const TabularMdp& mdp, const MatrixXd& pi,
               const VectorXd& omega, const FeatureMap& features);

}  // namespace blno

#endif  // BLNO_TABULAR_HPP_
