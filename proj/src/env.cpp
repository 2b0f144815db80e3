#include "blno/env.hpp"

#include <cmath>

#include "blno/error.hpp"

namespace blno {
namespace {

constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kHalfLength = 0.5;
constexpr double kPoleMassLength = kMassPole * kHalfLength;
constexpr double kForce = 10.0;
constexpr double kDt = 0.02;
constexpr double kXLimit = 2.4;
constexpr double kAngleLimit = 12.0 * 3.14159265358979323846 / 180.0;

}  // namespace

VectorXd CartPole::reset(Rng& rng) const {
  VectorXd s(4);
  for (int i = 0; i < 4; ++i) s[i] = rng.uniform(-0.05, 0.05);
  return s;
}

StepResult CartPole::step(const Eigen::Ref<const VectorXd>& state, int action,
                          Rng&) const {
  const double x = state[0];
  const double x_dot = state[1];
  const double angle = state[2];
  const double angle_dot = state[3];
  const double force = action == 1 ? kForce : -kForce;

  const double cos_a = std::cos(angle);
  const double sin_a = std::sin(angle);
  const double temp =
      (force + kPoleMassLength * angle_dot * angle_dot * sin_a) / kTotalMass;
  const double angle_acc =
      (kGravity * sin_a - cos_a * temp) /
      (kHalfLength * (4.0 / 3.0 - kMassPole * cos_a * cos_a / kTotalMass));
  const double x_acc = temp - kPoleMassLength * angle_acc * cos_a / kTotalMass;

  StepResult out;
  out.state.resize(4);
  out.state[0] = x + kDt * x_dot;
  out.state[1] = x_dot + kDt * x_acc;
  out.state[2] = angle + kDt * angle_dot;
  out.state[3] = angle_dot + kDt * angle_acc;
  out.reward = 1.0;
  out.done = std::abs(out.state[0]) > kXLimit ||
             std::abs(out.state[2]) > kAngleLimit;
  return out;
}

TabularEnv::TabularEnv(TabularMdp mdp, int horizon)
    : mdp_(std::move(mdp)), horizon_(horizon) {
  mdp_.validate();
}

VectorXd TabularEnv::reset(Rng& rng) const {
  double u = rng.uniform();
  VectorXd s(1);
  for (int i = 0; i < mdp_.n_states; ++i) {
    u -= mdp_.initial_dist[i];
    if (u <= 0.0) {
      s[0] = i;
      return s;
    }
  }
  s[0] = mdp_.n_states - 1;
  return s;
}

StepResult TabularEnv::step(const Eigen::Ref<const VectorXd>& state,
                            int action, Rng& rng) const {
  const int s = static_cast<int>(state[0]);
  StepResult out;
  out.reward = mdp_.reward(s, action);
  out.done = false;  // continuing task; the collector cuts at the horizon
  double u = rng.uniform();
  int next = mdp_.n_states - 1;
  for (int s2 = 0; s2 < mdp_.n_states; ++s2) {
    u -= mdp_.transition[action](s, s2);
    if (u <= 0.0) {
      next = s2;
      break;
    }
  }
  out.state.resize(1);
  out.state[0] = next;
  return out;
}

std::unique_ptr<Environment> make_env(const std::string& name) {
  if (name == "cartpole") return std::make_unique<CartPole>();
  if (name == "chain") {
    return std::make_unique<TabularEnv>(TabularMdp::chain3(), 64);
  }
  throw NumericError("make_env: unknown environment " + name);
}

}  // namespace blno
