#include "blno/rollout.hpp"

#include "blno/error.hpp"
#include "blno/linalg.hpp"

namespace blno {

EnvStreams EnvStreams::start(const Environment& env, int num_envs,
                             const Rng& base) {
  EnvStreams streams;
  streams.states.reserve(num_envs);
  streams.episode_steps.assign(num_envs, 0);
  streams.episode_returns.assign(num_envs, 0.0);
  for (int e = 0; e < num_envs; ++e) {
    streams.rngs.push_back(base.substream(e + 1));
    streams.states.push_back(env.reset(streams.rngs.back()));
  }
  return streams;
}

TrajectoryBatch collect_rollouts(const Environment& env,
                                 const SoftmaxPolicy& policy,
                                 const LinearCritic& critic,
                                 const FeatureMap& features,
                                 ObsNormalizer& normalizer, EnvStreams& streams,
                                 int steps) {
  const int num_envs = static_cast<int>(streams.states.size());
  TrajectoryBatch batch;
  batch.num_envs = num_envs;
  batch.steps = steps;
  const int total = num_envs * steps;
  batch.features.resize(features.dim(), total);
  batch.actions.resize(total);
  batch.rewards.resize(total);
  batch.log_probs.resize(total);
  batch.values.resize(total);
  batch.dones.assign(total, 0);
  batch.bootstrap_features.resize(features.dim(), num_envs);
  batch.bootstrap_values.resize(num_envs);

  for (int e = 0; e < num_envs; ++e) {
    Rng& rng = streams.rngs[e];
    for (int t = 0; t < steps; ++t) {
      const int idx = batch.index(e, t);
      normalizer.observe(streams.states[e]);
      const VectorXd phi = features(normalizer.normalize(streams.states[e]));
      const int action = policy.sample(phi, rng);
      batch.features.col(idx) = phi;
      batch.actions[idx] = action;
      batch.log_probs[idx] = policy.log_prob(phi, action);
      batch.values[idx] = critic.value(phi);

      StepResult result = env.step(streams.states[e], action, rng);
      streams.episode_returns[e] += result.reward;
      streams.episode_steps[e] += 1;
      const bool horizon_cut = streams.episode_steps[e] >= env.horizon();
      batch.rewards[idx] = result.reward;
      if (result.done || horizon_cut) {
        batch.dones[idx] = 1;
        streams.completed_returns.push_back(streams.episode_returns[e]);
        streams.episode_returns[e] = 0.0;
        streams.episode_steps[e] = 0;
        streams.states[e] = env.reset(rng);
      } else {
        streams.states[e] = result.state;
      }
    }
    const VectorXd phi_tail =
        features(normalizer.normalize(streams.states[e]));
    batch.bootstrap_features.col(e) = phi_tail;
    batch.bootstrap_values[e] = critic.value(phi_tail);
  }
  return batch;
}

void gae_advantages(TrajectoryBatch& batch, double gamma, double lambda) {
  const int dim = static_cast<int>(batch.features.rows());
  batch.advantages.resize(batch.size());
  batch.targets.resize(batch.size());
  batch.advantage_grads.resize(dim, batch.size());

  for (int e = 0; e < batch.num_envs; ++e) {
    double carry = 0.0;
    VectorXd carry_grad = VectorXd::Zero(dim);
    for (int t = batch.steps - 1; t >= 0; --t) {
      const int idx = batch.index(e, t);
      const bool done = batch.dones[idx] != 0;
      const double next_value =
          done ? 0.0
               : (t + 1 < batch.steps ? batch.values[batch.index(e, t + 1)]
                                      : batch.bootstrap_values[e]);
      const double delta =
          batch.rewards[idx] + gamma * next_value - batch.values[idx];
      carry = delta + gamma * lambda * (done ? 0.0 : carry);
      batch.advantages[idx] = carry;

      VectorXd next_phi = VectorXd::Zero(dim);
      if (!done) {
        next_phi = t + 1 < batch.steps
                       ? batch.features.col(batch.index(e, t + 1))
                       : batch.bootstrap_features.col(e);
      }
      VectorXd delta_grad = gamma * next_phi - batch.features.col(idx);
      carry_grad = done ? delta_grad
                        : (delta_grad + gamma * lambda * carry_grad).eval();
      batch.advantage_grads.col(idx) = carry_grad;

      batch.targets[idx] = batch.values[idx] + batch.advantages[idx];
    }
  }
}

EmpiricalGram batch_feature_gram(const TrajectoryBatch& batch, double gamma) {
  const int dim = static_cast<int>(batch.features.rows());
  MatrixXd gram = MatrixXd::Zero(dim, dim);
  for (int e = 0; e < batch.num_envs; ++e) {
    for (int t = 0; t < batch.steps; ++t) {
      const int idx = batch.index(e, t);
      VectorXd delta = batch.features.col(idx);
      if (batch.dones[idx] == 0) {
        const VectorXd next_phi =
            t + 1 < batch.steps ? batch.features.col(batch.index(e, t + 1))
                                : batch.bootstrap_features.col(e);
        delta -= gamma * next_phi;
      }
      gram += delta * delta.transpose();
    }
  }
  gram /= batch.size();
  EmpiricalGram out;
  out.gram = gram;
  const auto eig = sym_eig(gram);
  out.mu = eig.eigenvalues[eig.eigenvalues.size() - 1];
  return out;
}

}  // namespace blno
