#include "blno/toy.hpp"

#include <algorithm>
#include <cmath>

#include "blno/error.hpp"

namespace blno {
namespace {

double clamp_box(double v) { return std::clamp(v, -1.0, 1.0); }

double critic_grad(double theta, double omega) {
  return 2.0 * (omega * theta + theta * theta / 5.0) * theta;
}

}  // namespace

double ToyState::norm() const { return std::hypot(theta, omega); }

ToyState toy_step(const ToyState& state, ToyDynamics dynamics,
                  const ToyParams& params) {
  const double theta = state.theta;
  const double omega = state.omega;
  ToyState next;

  switch (dynamics) {
    case ToyDynamics::kSimultaneous:
    case ToyDynamics::kTtsaSimultaneous: {
      const double critic_lr =
          dynamics == ToyDynamics::kTtsaSimultaneous
              ? params.lr * params.ttsa_multiple
              : params.lr;
      next.theta = clamp_box(theta + params.lr * omega);  // ascent, dJ/dtheta = omega
      next.omega = clamp_box(omega - critic_lr * critic_grad(theta, omega));
      break;
    }
    case ToyDynamics::kStackelberg:
    case ToyDynamics::kRegularizedStackelberg: {
      const double reg =
          dynamics == ToyDynamics::kRegularizedStackelberg ? params.reg : 0.0;
      // Inner solve at the current theta.
      double omega_in;
      if (params.exact_inner || theta == 0.0) {
        omega_in = theta == 0.0 ? 0.0 : -theta / 5.0;
      } else {
        omega_in = omega;
        for (int d = 0; d < params.inner_steps; ++d) {
          omega_in = clamp_box(omega_in - params.lr * critic_grad(theta, omega_in));
        }
      }
      // Hypergradient of J through the inner response, with the inverse
      // Hessian shifted by reg:
      //   dJ/dtheta = omega - (d2g/dtheta domega) (d2g/domega2 + reg)^{-1} theta.
      const double hess = 2.0 * theta * theta;
      const double cross = 4.0 * theta * omega_in + 1.2 * theta * theta;
      const double denom = hess + reg;
      const double implicit = denom > 0.0 ? cross * theta / denom : 0.0;
      const double hypergrad = omega_in - implicit;
      next.theta = clamp_box(theta + params.lr * hypergrad);
      next.omega = clamp_box(omega_in);
      break;
    }
  }
  return next;
}

std::vector<ToyState> toy_run(ToyDynamics dynamics, ToyState init, int steps,
                              const ToyParams& params) {
  if (steps < 1) {
    throw NumericError("toy_run: steps must be >= 1");
  }
  std::vector<ToyState> trajectory;
  trajectory.reserve(steps + 1);
  trajectory.push_back(init);
  ToyState state = init;
  for (int t = 0; t < steps; ++t) {
    state = toy_step(state, dynamics, params);
    trajectory.push_back(state);
  }
  return trajectory;
}

const char* toy_dynamics_name(ToyDynamics dynamics) {
  switch (dynamics) {
    case ToyDynamics::kSimultaneous:
      return "simultaneous";
    case ToyDynamics::kTtsaSimultaneous:
      return "ttsa";
    case ToyDynamics::kStackelberg:
      return "stackelberg";
    case ToyDynamics::kRegularizedStackelberg:
      return "regularized";
  }
  return "unknown";
}

bool parse_toy_dynamics(const std::string& name, ToyDynamics* out) {
  if (name == "simultaneous") {
    *out = ToyDynamics::kSimultaneous;
  } else if (name == "ttsa") {
    *out = ToyDynamics::kTtsaSimultaneous;
  } else if (name == "stackelberg") {
    *out = ToyDynamics::kStackelberg;
  } else if (name == "regularized") {
    *out = ToyDynamics::kRegularizedStackelberg;
  } else {
    return false;
  }
  return true;
}

}  // namespace blno
