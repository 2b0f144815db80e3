#ifndef BLNO_ROLLOUT_HPP_
#define BLNO_ROLLOUT_HPP_

#include <cstdint>
#include <vector>

#include "blno/env.hpp"
#include "blno/policy.hpp"

namespace blno {

// Rollout storage across num_envs parallel streams of `steps` transitions,
// column index e * steps + t (trajectories contiguous). Value and log-prob
// snapshots are taken at collection time with the collecting parameters.
struct TrajectoryBatch {
  int num_envs = 0;
  int steps = 0;

  MatrixXd features;            // phi_dim x (num_envs * steps)
  std::vector<int> actions;
  VectorXd rewards;
  VectorXd log_probs;
  VectorXd values;
  std::vector<std::uint8_t> dones;  // 1 if the episode ended after this step
  MatrixXd bootstrap_features;      // phi_dim x num_envs (state after step T)
  VectorXd bootstrap_values;

  // Filled by gae_advantages:
  VectorXd advantages;
  VectorXd targets;       // value snapshot + advantage
  MatrixXd advantage_grads;  // phi_dim x (num_envs * steps), dA_t / domega

  int size() const { return num_envs * steps; }
  int index(int env, int t) const { return env * steps + t; }
};

// Persistent per-stream collection state (environments continue across
// rollout rounds; each stream owns an rng substream).
struct EnvStreams {
  std::vector<VectorXd> states;        // raw, unnormalized
  std::vector<int> episode_steps;
  std::vector<double> episode_returns;
  std::vector<Rng> rngs;
  std::vector<double> completed_returns;  // appended as episodes finish

  static EnvStreams start(const Environment& env, int num_envs,
                          const Rng& base);
};

// Runs `steps` transitions in each stream. Observations pass through the
// normalizer (which keeps updating its running statistics), actions are
// sampled from the policy, and episodes are cut at the environment horizon.
TrajectoryBatch collect_rollouts(const Environment& env,
                                 const SoftmaxPolicy& policy,
                                 const LinearCritic& critic,
                                 const FeatureMap& features,
                                 ObsNormalizer& normalizer, EnvStreams& streams,
                                 int steps);

// Standard generalized-advantage recursion with resets at done flags, plus
// targets = values + advantages and the advantage gradients with respect to
// the critic weights (the value terms are linear in omega, so dA/domega is
// the same recursion over feature residuals gamma*phi' - phi).
void gae_advantages(TrajectoryBatch& batch, double gamma, double lambda);

// Empirical feature-difference Gram sum phiDelta phiDelta^T / count over the
// batch transitions (phiDelta = phi_t - gamma phi_{t+1}, with the next-state
// term dropped on episode ends) and its smallest eigenvalue.
struct EmpiricalGram {
  MatrixXd gram;
  double mu = 0.0;
};
EmpiricalGram batch_feature_gram(const TrajectoryBatch& batch, double gamma);

}  // namespace blno

#endif  // BLNO_ROLLOUT_HPP_
