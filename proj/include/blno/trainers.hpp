#ifndef BLNO_TRAINERS_HPP_
#define BLNO_TRAINERS_HPP_

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "blno/ihvp.hpp"
#include "blno/rollout.hpp"

namespace blno {

enum class Algo {
  kBlpoNystrom,
  kBlpoCg,
  kNestedNoHyper,
  kSimultaneousAc,
  kTtsaAc,
  kPpo,
};

const char* algo_name(Algo algo);
bool parse_algo(const std::string& name, Algo* out);

// Keys mirror the hyperparameter table (lowercased).
struct TrainConfig {
  int num_envs = 4;
  int rollout_len = 128;
  long total_timesteps = 500000;
  int num_minibatches = 4;
  int update_epochs = 4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double ent_coef = 0.0;  // accepted for config compatibility; must stay 0
  double actor_lr = 2.5e-4;
  double critic_lr = 1e-3;
  int nested_updates = 10;
  double ihvp_bound = 1.0;
  double clip_f = 0.5;
  double lambda_reg = 0.0;
  int max_cg_iter = 20;
  int nystrom_rank = 5;
  double nystrom_rho = 50.0;
  bool normalize_obs = true;
  std::uint64_t seed = 0;
};

// Adam accumulator; the learning rates in the hyperparameter table are
// Adam step sizes (the baselines the table derives from train with Adam).
class Adam {
 public:
  Adam() = default;
  explicit Adam(int dim)
      : m_(VectorXd::Zero(dim)), v_(VectorXd::Zero(dim)) {}

  // Returns the update to add to the parameters for an ascent step of size
  // lr along grad (negate grad for descent).
  VectorXd step(const Eigen::Ref<const VectorXd>& grad, double lr);

 private:
  VectorXd m_;
  VectorXd v_;
  long t_ = 0;
};

struct TrainerState {
  SoftmaxPolicy policy;
  LinearCritic critic;
  Adam actor_adam;
  Adam critic_adam;
  ObsNormalizer normalizer;
  EnvStreams streams;
  Rng update_rng{0};
  long env_steps = 0;
  std::deque<double> recent_returns;  // last 20 completed episodes

  static TrainerState init(const SoftmaxPolicy& policy,
                           const LinearCritic& critic, std::uint64_t rng_seed);
};

struct CurveRow {
  long env_steps = 0;
  double mean_return = 0.0;
};

struct TrainResult {
  std::vector<CurveRow> rows;
  VectorXd theta_final;
  VectorXd omega_final;
  bool aborted = false;
};

// --- gradient estimators (exposed for tests) ---

// (1 / |idx|) sum grad log pi(a_t | s_t) * weight_t at the current policy.
VectorXd actor_direct_grad(const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const SoftmaxPolicy& policy,
                           const VectorXd& weights);

// Per-minibatch standardization (mean 0, std 1) of the advantages at idx.
VectorXd normalized_advantages(const TrajectoryBatch& batch,
                               const std::vector<int>& idx);

// Per-step averaged suffix score-advantage vectors
//   u_t = 1/L_t * sum_{k=t..seg_end} m_k grad log pi(a_k|s_k) A_k
// over episode segments, where the mask m_k drops terms whose surrogate
// summand log pi * A exceeds clip_f standard deviations of |log pi * A|
// over the batch (no clipping when clip_f <= 0). Columns follow the batch.
MatrixXd suffix_score_vectors(const TrajectoryBatch& batch,
                              const SoftmaxPolicy& policy, double clip_f);

// (1 / |idx|) sum (target_t - omega . phi_t) u_t.
VectorXd critic_cross_grad(const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const MatrixXd& suffix_vectors,
                           const LinearCritic& critic);

// d/domega of the cross gradient applied to v:
//   -(1 / |idx|) sum (phi_t . v) u_t.
VectorXd mixed_partial_jvp(const TrajectoryBatch& batch,
                           const std::vector<int>& idx,
                           const MatrixXd& suffix_vectors, const VectorXd& v);

// Critic-direction partial of the actor surrogate (1/n) sum log pi * A(omega),
// using the advantage gradients prepared by gae_advantages.
VectorXd grad_omega_surrogate(const TrajectoryBatch& batch,
                              const std::vector<int>& idx,
                              const SoftmaxPolicy& policy);

// Feature Gram (1 / |idx|) sum phi_t phi_t^T as a matrix-free operator.
class CriticGramOperator final : public HessianOperator {
 public:
  CriticGramOperator(const TrajectoryBatch& batch, std::vector<int> idx);
  Eigen::Index dim() const override { return batch_->features.rows(); }
  VectorXd apply(const Eigen::Ref<const VectorXd>& v) const override;
  VectorXd diagonal() const override;

 private:
  const TrajectoryBatch* batch_;
  std::vector<int> idx_;
};

// One full update round (update_epochs x num_minibatches) for the given
// algorithm. Returns per-minibatch diagnostics of the last minibatch.
struct UpdateStats {
  double direct_norm = 0.0;
  double implicit_norm = 0.0;      // after the bound
  double implicit_norm_raw = 0.0;  // before the bound
  int ihvp_iterations = 0;
};
UpdateStats apply_update(Algo algo, TrainerState& state,
                         const TrajectoryBatch& batch,
                         const TrainConfig& config);

// Full training run; rows are written per update round. `env` selects
// cartpole (quadratic features), chain (one-hot features), or toy (the
// single-step game, where the simultaneous/ttsa algorithms follow the toy
// dynamics and the nested ones run the hypergradient update at toy scale).
TrainResult train(Algo algo, const std::string& env, const TrainConfig& config,
                  std::uint64_t seed);

}  // namespace blno

#endif  // BLNO_TRAINERS_HPP_
