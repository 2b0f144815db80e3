#ifndef BLNO_ENV_HPP_
#define BLNO_ENV_HPP_

#include <memory>
#include <string>

#include "blno/linalg.hpp"
#include "blno/rng.hpp"
#include "blno/tabular.hpp"

namespace blno {

struct StepResult {
  VectorXd state;
  double reward = 0.0;
  bool done = false;
};

// Stateless environment interface: the rollout collector owns the state and
// the per-episode step counter (episodes are cut at horizon()).
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int state_dim() const = 0;
  virtual int action_count() const = 0;
  virtual int horizon() const = 0;
  virtual VectorXd reset(Rng& rng) const = 0;
  virtual StepResult step(const Eigen::Ref<const VectorXd>& state, int action,
                          Rng& rng) const = 0;
};

// Cart-pole balancing with the standard published constants: gravity 9.8,
// cart mass 1.0, pole mass 0.1, pole half-length 0.5, force 10, Euler
// integration at dt 0.02, termination at |x| > 2.4 or |angle| > 12 degrees,
// horizon 500, reward 1 per step.
class CartPole final : public Environment {
 public:
  int state_dim() const override { return 4; }
  int action_count() const override { return 2; }
  int horizon() const override { return 500; }
  VectorXd reset(Rng& rng) const override;
  StepResult step(const Eigen::Ref<const VectorXd>& state, int action,
                  Rng& rng) const override;
};

// Sampling wrapper over a TabularMdp; the state vector carries the index.
class TabularEnv final : public Environment {
 public:
  TabularEnv(TabularMdp mdp, int horizon);
  int state_dim() const override { return 1; }
  int action_count() const override { return mdp_.n_actions; }
  int horizon() const override { return horizon_; }
  VectorXd reset(Rng& rng) const override;
  StepResult step(const Eigen::Ref<const VectorXd>& state, int action,
                  Rng& rng) const override;

  const TabularMdp& mdp() const { return mdp_; }

 private:
  TabularMdp mdp_;
  int horizon_;
};

std::unique_ptr<Environment> make_env(const std::string& name);

}  // namespace blno

#endif  // BLNO_ENV_HPP_
