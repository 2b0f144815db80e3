#include "blno/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blno/error.hpp"
#include "blno/toy.hpp"

namespace blno {
namespace {

double mean_recent(const std::deque<double>& returns) {
  if (returns.empty()) return 0.0;
  double sum = 0.0;
  for (const double r : returns) sum += r;
  return sum / returns.size();
}

// One step of the critic regression toward the frozen targets,
// 1/2 mean (target - omega.phi)^2 over the minibatch.
void critic_regression_step(const TrajectoryBatch& batch,
                            const std::vector<int>& idx, LinearCritic& critic,
                            Adam& adam, double lr) {
  VectorXd grad = VectorXd::Zero(critic.omega.size());
  for (const int t : idx) {
    const double residual =
        critic.omega.dot(batch.features.col(t)) - batch.targets[t];
    grad += residual * batch.features.col(t);
  }
  critic.omega += adam.step(-grad / idx.size(), lr);
}

std::vector<std::vector<int>> minibatch_split(int total, int num_minibatches,
                                              Rng& rng) {
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  for (int i = total - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_int(i + 1)]);
  }
  std::vector<std::vector<int>> out(num_minibatches);
  const int size = total / num_minibatches;
  for (int m = 0; m < num_minibatches; ++m) {
    out[m].assign(order.begin() + m * size,
                  m + 1 == num_minibatches ? order.end()
                                           : order.begin() + (m + 1) * size);
  }
  return out;
}

}  // namespace

VectorXd Adam::step(const Eigen::Ref<const VectorXd>& grad, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++t_;
  m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
  v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
  const double m_scale = 1.0 / (1.0 - std::pow(kBeta1, t_));
  const double v_scale = 1.0 / (1.0 - std::pow(kBeta2, t_));
  return lr * (m_scale * m_.array() /
               ((v_scale * v_.array()).sqrt() + kEps))
                  .matrix();
}

TrainerState TrainerState::init(const SoftmaxPolicy& policy,
                                const LinearCritic& critic,
                                std::uint64_t rng_seed) {
  TrainerState state;
  state.policy = policy;
  state.critic = critic;
  state.actor_adam = Adam(static_cast<int>(policy.theta.size()));
  state.critic_adam = Adam(static_cast<int>(critic.omega.size()));
  state.update_rng = Rng(rng_seed);
  return state;
}

const char* algo_name(Algo algo) {
  switch (algo) {
    case Algo::kBlpoNystrom:
      return "blpo-nystrom";
    case Algo::kBlpoCg:
      return "blpo-cg";
    case Algo::kNestedNoHyper:
      return "nested";
    case Algo::kSimultaneousAc:
      return "simul";
    case Algo::kTtsaAc:
      return "ttsa";
    case Algo::kPpo:
      return "ppo";
  }
  return "unknown";
}

bool parse_algo(const std::string& name, Algo* out) {
  for (const Algo algo :
       {Algo::kBlpoNystrom, Algo::kBlpoCg, Algo::kNestedNoHyper,
        Algo::kSimultaneousAc, Algo::kTtsaAc, Algo::kPpo}) {
    if (name == algo_name(algo)) {
      *out = algo;
      return true;
    }
  }
  return false;
}

VectorXd actor_direct_grad(const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const SoftmaxPolicy& policy,
                           const VectorXd& weights) {
  VectorXd grad = VectorXd::Zero(policy.theta.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int t = idx[i];
    grad += weights[i] *
            policy.grad_log_prob(batch.features.col(t), batch.actions[t]);
  }
  return grad / idx.size();
}

VectorXd normalized_advantages(const TrajectoryBatch& batch,
                               const std::vector<int>& idx) {
  VectorXd out(idx.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) mean += batch.advantages[idx[i]];
  mean /= idx.size();
  double var = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double centered = batch.advantages[idx[i]] - mean;
    out[i] = centered;
    var += centered * centered;
  }
  const double std_dev = std::sqrt(var / idx.size());
  return out / (std_dev + 1e-8);
}

MatrixXd suffix_score_vectors(const TrajectoryBatch& batch,
                              const SoftmaxPolicy& policy, double clip_f) {
  const int total = batch.size();
  MatrixXd scores(policy.theta.size(), total);
  VectorXd summand(total);
  for (int t = 0; t < total; ++t) {
    const double log_pi =
        policy.log_prob(batch.features.col(t), batch.actions[t]);
    summand[t] = log_pi * batch.advantages[t];
    scores.col(t) =
        policy.grad_log_prob(batch.features.col(t), batch.actions[t]) *
        batch.advantages[t];
  }

  std::vector<std::uint8_t> keep(total, 1);
  if (clip_f > 0.0) {
    // Threshold at clip_f standard deviations of |log pi * A|: terms past
    // the clamp contribute no gradient, mirroring the clipped surrogate.
    double mean_abs = 0.0;
    for (int t = 0; t < total; ++t) mean_abs += std::abs(summand[t]);
    mean_abs /= total;
    double var = 0.0;
    for (int t = 0; t < total; ++t) {
      const double centered = std::abs(summand[t]) - mean_abs;
      var += centered * centered;
    }
    const double threshold = clip_f * std::sqrt(var / total);
    for (int t = 0; t < total; ++t) {
      keep[t] = std::abs(summand[t]) <= threshold ? 1 : 0;
    }
  }

  MatrixXd suffix(policy.theta.size(), total);
  for (int e = 0; e < batch.num_envs; ++e) {
    VectorXd acc = VectorXd::Zero(policy.theta.size());
    int seg_len = 0;
    for (int t = batch.steps - 1; t >= 0; --t) {
      const int id = batch.index(e, t);
      if (batch.dones[id] != 0) {
        acc.setZero();
        seg_len = 0;
      }
      if (keep[id]) acc += scores.col(id);
      ++seg_len;
      suffix.col(id) = acc / seg_len;
    }
  }
  return suffix;
}

VectorXd critic_cross_grad(const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const MatrixXd& suffix_vectors,
                           const LinearCritic& critic) {
  VectorXd grad = VectorXd::Zero(suffix_vectors.rows());
  for (const int t : idx) {
    const double residual =
        batch.targets[t] - critic.omega.dot(batch.features.col(t));
    grad += residual * suffix_vectors.col(t);
  }
  return grad / idx.size();
}

VectorXd mixed_partial_jvp(const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const MatrixXd& suffix_vectors, const VectorXd& v) {
  VectorXd out = VectorXd::Zero(suffix_vectors.rows());
  for (const int t : idx) {
    out -= batch.features.col(t).dot(v) * suffix_vectors.col(t);
  }
  return out / idx.size();
}

VectorXd grad_omega_surrogate(const TrajectoryBatch& batch,
                              const std::vector<int>& idx,
                              const SoftmaxPolicy& policy) {
  VectorXd grad = VectorXd::Zero(batch.advantage_grads.rows());
  for (const int t : idx) {
    const double log_pi =
        policy.log_prob(batch.features.col(t), batch.actions[t]);
    grad += log_pi * batch.advantage_grads.col(t);
  }
  return grad / idx.size();
}

CriticGramOperator::CriticGramOperator(const TrajectoryBatch& batch,
                                       std::vector<int> idx)
    : batch_(&batch), idx_(std::move(idx)) {}

VectorXd CriticGramOperator::apply(const Eigen::Ref<const VectorXd>& v) const {
  VectorXd out = VectorXd::Zero(v.size());
  for (const int t : idx_) {
    out += batch_->features.col(t).dot(v) * batch_->features.col(t);
  }
  return out / idx_.size();
}

VectorXd CriticGramOperator::diagonal() const {
  VectorXd d = VectorXd::Zero(batch_->features.rows());
  for (const int t : idx_) {
    d += batch_->features.col(t).cwiseAbs2();
  }
  return d / idx_.size();
}

namespace {

UpdateStats blpo_minibatch(Algo algo, TrainerState& state,
                           const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const TrainConfig& config) {
  // Nested critic regression, warm-started across minibatches and rounds.
  for (int d = 0; d < config.nested_updates; ++d) {
    critic_regression_step(batch, idx, state.critic, state.critic_adam,
                           config.critic_lr);
  }

  UpdateStats stats;
  const VectorXd direct = actor_direct_grad(
      batch, idx, state.policy, normalized_advantages(batch, idx));
  stats.direct_norm = direct.norm();

  VectorXd implicit = VectorXd::Zero(state.policy.theta.size());
  if (algo != Algo::kNestedNoHyper) {
    const MatrixXd suffix =
        suffix_score_vectors(batch, state.policy, config.clip_f);
    const VectorXd rhs = grad_omega_surrogate(batch, idx, state.policy);
    const CriticGramOperator gram(batch, idx);
    VectorXd ihvp;
    if (algo == Algo::kBlpoNystrom) {
      const NystromSketch sketch =
          sample_columns(gram, config.nystrom_rank, ColumnSampling::kUniform,
                         state.update_rng);
      const IhvpReport report = nystrom_ihvp(sketch, config.nystrom_rho, rhs);
      ihvp = report.solution;
      stats.ihvp_iterations = report.iterations;
    } else {
      const IhvpReport report = cg_ihvp(gram, rhs, config.lambda_reg,
                                        config.max_cg_iter, 1e-10);
      ihvp = report.solution;
      stats.ihvp_iterations = report.iterations;
    }
    implicit = mixed_partial_jvp(batch, idx, suffix, ihvp);
  }
  stats.implicit_norm_raw = implicit.norm();

  // Bound the implicit term relative to the direct gradient.
  const double limit = config.ihvp_bound * stats.direct_norm;
  if (implicit.norm() > limit) {
    implicit *= implicit.norm() > 0 ? limit / implicit.norm() : 0.0;
  }
  stats.implicit_norm = implicit.norm();

  state.policy.theta +=
      state.actor_adam.step(direct - implicit, config.actor_lr);
  if (!state.policy.theta.allFinite() || !state.critic.omega.allFinite()) {
    throw NumericError("blpo update produced non-finite parameters");
  }
  return stats;
}

UpdateStats ppo_minibatch(TrainerState& state, const TrajectoryBatch& batch,
                          const std::vector<int>& idx,
                          const TrainConfig& config) {
  const VectorXd advantages = normalized_advantages(batch, idx);
  VectorXd actor_grad = VectorXd::Zero(state.policy.theta.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int t = idx[i];
    const double log_pi =
        state.policy.log_prob(batch.features.col(t), batch.actions[t]);
    const double ratio = std::exp(log_pi - batch.log_probs[t]);
    // min(ratio * A, clip(ratio) * A): the gradient dies only on the
    // favorably-clipped side, keeping the restoring pull when the ratio
    // has overshot against the advantage sign.
    const double clipped =
        std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
    if (ratio * advantages[i] <= clipped * advantages[i]) {
      actor_grad +=
          ratio * advantages[i] *
          state.policy.grad_log_prob(batch.features.col(t), batch.actions[t]);
    }
  }
  actor_grad /= idx.size();

  UpdateStats stats;
  stats.direct_norm = actor_grad.norm();
  state.policy.theta += state.actor_adam.step(actor_grad, config.actor_lr);
  critic_regression_step(batch, idx, state.critic, state.critic_adam,
                         config.critic_lr);
  return stats;
}

UpdateStats ac_minibatch(Algo algo, TrainerState& state,
                         const TrajectoryBatch& batch,
                         const std::vector<int>& idx,
                         const TrainConfig& config) {
  // Simultaneous update: both gradients at the current parameters, raw
  // advantages.
  VectorXd weights(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    weights[i] = batch.advantages[idx[i]];
  }
  const VectorXd actor_grad =
      actor_direct_grad(batch, idx, state.policy, weights);
  const double critic_lr =
      algo == Algo::kTtsaAc ? config.critic_lr : config.actor_lr;

  UpdateStats stats;
  stats.direct_norm = actor_grad.norm();
  state.policy.theta += state.actor_adam.step(actor_grad, config.actor_lr);
  critic_regression_step(batch, idx, state.critic, state.critic_adam,
                         critic_lr);
  return stats;
}

}  // namespace

UpdateStats apply_update(Algo algo, TrainerState& state,
                         const TrajectoryBatch& batch,
                         const TrainConfig& config) {
  UpdateStats stats;
  for (int epoch = 0; epoch < config.update_epochs; ++epoch) {
    const auto minibatches = minibatch_split(
        batch.size(), config.num_minibatches, state.update_rng);
    for (const auto& idx : minibatches) {
      switch (algo) {
        case Algo::kBlpoNystrom:
        case Algo::kBlpoCg:
        case Algo::kNestedNoHyper:
          stats = blpo_minibatch(algo, state, batch, idx, config);
          break;
        case Algo::kPpo:
          stats = ppo_minibatch(state, batch, idx, config);
          break;
        case Algo::kSimultaneousAc:
        case Algo::kTtsaAc:
          stats = ac_minibatch(algo, state, batch, idx, config);
          break;
      }
    }
  }
  return stats;
}

namespace {

// The single-step game at trainer scale: the simultaneous family follows
// the toy dynamics directly; the nested family runs inner critic descent
// plus the bounded hypergradient step, with the inverse curvature taken
// through the configured solver on the 1x1 critic Hessian.
TrainResult train_toy(Algo algo, const TrainConfig& config,
                      std::uint64_t seed) {
  ToyParams params;
  params.lr = 5e-2;
  params.inner_steps = config.nested_updates;
  params.exact_inner = false;
  const double rho = 0.3;  // the toy's regularizer scale

  ToyState state{0.5, 0.5};
  Rng rng(seed);
  TrainResult result;
  const long steps = std::min<long>(config.total_timesteps, 20000);

  for (long k = 0; k < steps; ++k) {
    switch (algo) {
      case Algo::kSimultaneousAc:
        state = toy_step(state, ToyDynamics::kSimultaneous, params);
        break;
      case Algo::kTtsaAc:
        state = toy_step(state, ToyDynamics::kTtsaSimultaneous, params);
        break;
      case Algo::kBlpoNystrom:
      case Algo::kBlpoCg:
      case Algo::kNestedNoHyper: {
        // inner descent
        double omega = state.omega;
        for (int d = 0; d < params.inner_steps; ++d) {
          omega -= params.lr * 2.0 *
                   (omega * state.theta + state.theta * state.theta / 5.0) *
                   state.theta;
          omega = std::clamp(omega, -1.0, 1.0);
        }
        // hypergradient with the configured inverse
        const double hess = 2.0 * state.theta * state.theta;
        const double cross =
            4.0 * state.theta * omega + 1.2 * state.theta * state.theta;
        double implicit = 0.0;
        if (algo == Algo::kBlpoNystrom) {
          const DenseOperator op(MatrixXd::Constant(1, 1, hess));
          const NystromSketch sketch =
              sample_columns(op, 1, ColumnSampling::kUniform, rng);
          implicit =
              cross *
              nystrom_ihvp(sketch, rho, VectorXd::Constant(1, state.theta))
                  .solution[0];
        } else if (algo == Algo::kBlpoCg) {
          const DenseOperator op(MatrixXd::Constant(1, 1, hess));
          implicit = cross * cg_ihvp(op, VectorXd::Constant(1, state.theta),
                                     config.lambda_reg, config.max_cg_iter,
                                     1e-10)
                                 .solution[0];
        }
        const double direct = omega;
        const double limit = config.ihvp_bound * std::abs(direct);
        implicit = std::clamp(implicit, -limit, limit);
        state.theta =
            std::clamp(state.theta + params.lr * (direct - implicit), -1.0,
                       1.0);
        state.omega = omega;
        break;
      }
      case Algo::kPpo:
        throw NumericError("train: ppo is not defined on the toy game");
    }
    if ((k + 1) % 100 == 0 || k + 1 == steps) {
      result.rows.push_back(
          {k + 1, -state.theta * state.theta / 5.0});
    }
  }
  result.theta_final = VectorXd::Constant(1, state.theta);
  result.omega_final = VectorXd::Constant(1, state.omega);
  return result;
}

}  // namespace

TrainResult train(Algo algo, const std::string& env_name,
                  const TrainConfig& config, std::uint64_t seed) {
  if (config.ent_coef != 0.0) {
    throw NumericError("train: entropy bonus is not supported (ent_coef 0)");
  }
  if (config.nested_updates < 1) {
    throw NumericError("train: nested_updates must be >= 1");
  }
  if (env_name == "toy") return train_toy(algo, config, seed);

  const auto env = make_env(env_name);
  const FeatureMap features(env_name == "chain"
                                ? FeatureMap::Kind::kOneHot
                                : FeatureMap::Kind::kQuadratic,
                            env_name == "chain" ? 3 : env->state_dim());

  TrainerState state = TrainerState::init(
      SoftmaxPolicy::zeros(env->action_count(), features.dim()),
      LinearCritic::zeros(features.dim()), 0);
  state.normalizer = ObsNormalizer(
      env->state_dim(),
      config.normalize_obs && features.kind() == FeatureMap::Kind::kQuadratic);
  const Rng master(seed);
  state.streams = EnvStreams::start(*env, config.num_envs, master);
  state.update_rng = master.substream(0);

  TrainResult result;
  const long steps_per_round =
      static_cast<long>(config.num_envs) * config.rollout_len;
  const long rounds = config.total_timesteps / steps_per_round;

  for (long round = 0; round < rounds; ++round) {
    TrajectoryBatch batch =
        collect_rollouts(*env, state.policy, state.critic, features,
                         state.normalizer, state.streams, config.rollout_len);
    gae_advantages(batch, config.gamma, config.gae_lambda);
    try {
      apply_update(algo, state, batch, config);
    } catch (const NumericError&) {
      result.aborted = true;
      break;
    }
    for (const double ret : state.streams.completed_returns) {
      state.recent_returns.push_back(ret);
      if (state.recent_returns.size() > 20) state.recent_returns.pop_front();
    }
    state.streams.completed_returns.clear();
    state.env_steps += steps_per_round;
    result.rows.push_back({state.env_steps, mean_recent(state.recent_returns)});
  }
  result.theta_final = state.policy.theta;
  result.omega_final = state.critic.omega;
  return result;
}

}  // namespace blno
