#include <cmath>

#include "blno/error.hpp"
#include "blno/toy.hpp"
#include "doctest.h"

using blno::ToyDynamics;
using blno::ToyParams;
using blno::ToyState;

namespace {

const ToyDynamics kAll[] = {
    ToyDynamics::kSimultaneous,
    ToyDynamics::kTtsaSimultaneous,
    ToyDynamics::kStackelberg,
    ToyDynamics::kRegularizedStackelberg,
};

}  // namespace

TEST_CASE("origin is a fixed point for every dynamics") {
  const ToyParams params;
  for (const auto dyn : kAll) {
    const ToyState next = blno::toy_step(ToyState{0.0, 0.0}, dyn, params);
    CHECK(next.theta == 0.0);
    CHECK(next.omega == 0.0);
  }
}

TEST_CASE("exact inner solve zeroes the critic gradient") {
  for (double theta = 1e-6; theta <= 1.0; theta *= 10.0) {
    const double omega_star = -theta / 5.0;
    const double grad =
        2.0 * (omega_star * theta + theta * theta / 5.0) * theta;
    CHECK(std::abs(grad) <= 1e-12);
  }
}

TEST_CASE("stackelberg contracts theta by 1 - 2 lr / 5 each step") {
  ToyParams params;
  ToyState state{0.5, 0.37};
  const double factor = 1.0 - 2.0 * params.lr / 5.0;
  for (int t = 0; t < 50; ++t) {
    const ToyState next =
        blno::toy_step(state, ToyDynamics::kStackelberg, params);
    CHECK(std::abs(next.theta) ==
          doctest::Approx(std::abs(state.theta) * factor).epsilon(1e-12));
    CHECK(std::abs(next.theta) < std::abs(state.theta));
    state = next;
  }
}

TEST_CASE("stackelberg distance to the origin is monotone") {
  ToyParams params;
  for (const bool exact : {true, false}) {
    params.exact_inner = exact;
    const auto traj = blno::toy_run(ToyDynamics::kStackelberg,
                                    ToyState{0.5, 0.5}, 300, params);
    for (std::size_t t = 2; t < traj.size(); ++t) {
      CHECK(traj[t].norm() <= traj[t - 1].norm() + 1e-12);
    }
  }
}

TEST_CASE("convergence and non-convergence contrast") {
  const ToyParams params;
  const ToyState init{0.5, 0.5};

  const auto stack =
      blno::toy_run(ToyDynamics::kStackelberg, init, 2000, params);
  CHECK(stack.back().norm() <= 1e-3);

  const auto reg =
      blno::toy_run(ToyDynamics::kRegularizedStackelberg, init, 5000, params);
  CHECK(reg.back().norm() <= 1e-2);

  // The simultaneous-family runs keep oscillating: over the last 1000 steps
  // they still swing well above the level both Stackelberg runs settle at.
  auto tail_max = [](const std::vector<ToyState>& traj) {
    double peak = 0.0;
    for (std::size_t t = traj.size() - 1000; t < traj.size(); ++t) {
      peak = std::max(peak, traj[t].norm());
    }
    return peak;
  };
  const auto simul =
      blno::toy_run(ToyDynamics::kSimultaneous, init, 5000, params);
  CHECK(tail_max(simul) > 1e-2);

  const auto ttsa =
      blno::toy_run(ToyDynamics::kTtsaSimultaneous, init, 5000, params);
  CHECK(tail_max(ttsa) > 1e-2);
}

TEST_CASE("iterates stay inside the box even with large steps") {
  ToyParams params;
  params.lr = 5.0;
  for (const auto dyn : kAll) {
    ToyState state{0.9, -0.7};
    for (int t = 0; t < 100; ++t) {
      state = blno::toy_step(state, dyn, params);
      CHECK(std::abs(state.theta) <= 1.0);
      CHECK(std::abs(state.omega) <= 1.0);
    }
  }
}

TEST_CASE("toy_run validates the step count and includes the start") {
  CHECK_THROWS_AS(
      blno::toy_run(ToyDynamics::kStackelberg, ToyState{0.1, 0.1}, 0, {}),
      blno::NumericError);
  const auto traj =
      blno::toy_run(ToyDynamics::kSimultaneous, ToyState{0.1, 0.1}, 7, {});
  CHECK(traj.size() == 8);
  CHECK(traj.front().theta == 0.1);
}

TEST_CASE("dynamics names round-trip") {
  for (const auto dyn : kAll) {
    ToyDynamics parsed;
    REQUIRE(blno::parse_toy_dynamics(blno::toy_dynamics_name(dyn), &parsed));
    CHECK(parsed == dyn);
  }
  ToyDynamics unused;
  CHECK_FALSE(blno::parse_toy_dynamics("bogus", &unused));
}
