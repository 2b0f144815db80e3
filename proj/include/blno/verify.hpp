#ifndef BLNO_VERIFY_HPP_
#define BLNO_VERIFY_HPP_

#include <string>
#include <vector>

namespace blno {

struct VerifyCheck {
  std::string name;
  double max_error = 0.0;
  double bound = 0.0;
  bool pass = false;
};

// Theory checks at exactly-computable scale, deterministic seeds:
// policy evaluation vs value iteration, occupancy normalization and limits,
// the actor-direction critic gradient vs finite differences, its
// advantage-estimator form, the feature-difference Gram vs its
// finite-difference Hessian with mu > 0, the warm-start ratio bound, and the
// step-size schedule's frozen values. `bound_override`, when positive,
// replaces every tolerance (used to exercise the failure path).
std::vector<VerifyCheck> run_verification(double bound_override = 0.0);

// Serializes (check_name, max_error, bound, pass) rows; returns all-pass.
bool write_verification_csv(const std::string& path,
                            const std::vector<VerifyCheck>& checks);

}  // namespace blno

#endif  // BLNO_VERIFY_HPP_
