#ifndef BLNO_TOY_HPP_
#define BLNO_TOY_HPP_

#include <string>
#include <vector>

namespace blno {

// Single-step actor-critic game on the square [-1,1]^2. The actor's
// objective is J(theta, omega) = omega * theta; the critic fits the reward
// r = -theta^2/5 with V_omega(theta) = omega * theta, giving the loss
// g = (omega*theta + theta^2/5)^2. The exact inner minimizer is
// omega*(theta) = -theta/5 and the Stackelberg update direction is
// dJ/dtheta = -2 theta / 5.
struct ToyState {
  double theta = 0.0;
  double omega = 0.0;

  double norm() const;
};

enum class ToyDynamics {
  kSimultaneous,
  kTtsaSimultaneous,
  kStackelberg,
  kRegularizedStackelberg,
};

struct ToyParams {
  double lr = 5e-2;
  double ttsa_multiple = 4.0;   // critic speed-up in the two-timescale mode
  double reg = 0.3;             // shift added to the inner Hessian
  bool exact_inner = true;      // Stackelberg: analytic argmin vs D descent steps
  int inner_steps = 10;
};

ToyState toy_step(const ToyState& state, ToyDynamics dynamics,
                  const ToyParams& params);

// Deterministic trajectory including the initial state (steps + 1 entries).
// Throws for steps < 1.
std::vector<ToyState> toy_run(ToyDynamics dynamics, ToyState init, int steps,
                              const ToyParams& params);

const char* toy_dynamics_name(ToyDynamics dynamics);
bool parse_toy_dynamics(const std::string& name, ToyDynamics* out);

}  // namespace blno

#endif  // BLNO_TOY_HPP_
