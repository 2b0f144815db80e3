#ifndef BLNO_QUADRATIC_ORACLE_HPP_
#define BLNO_QUADRATIC_ORACLE_HPP_

#include <cstdint>

#include "blno/blo.hpp"
#include "blno/linalg.hpp"
#include "blno/rng.hpp"

namespace blno {

// Closed-form bilevel test family:
//   g(x, y) = 1/2 y^T A y - x^T B y          (A symmetric positive definite)
//   f(x, y) = 1/2 ||y - y_target||^2 + c * sum_i sin^2(x_i)
// so y*(x) = A^{-1} B^T x and the hypergradient is
//   grad Phi(x) = B A^{-1} (y*(x) - y_target) + c sin(2x).
// The spectrum of A is log-spaced over [mu, lip], giving condition number
// lip/mu; B = coupling_scale * G A with G Gaussian keeps the outer landscape
// bounded independently of the inner conditioning.
struct QuadraticOracle {
  MatrixXd a;         // n x n SPD
  MatrixXd b;         // m x n
  VectorXd y_target;  // n
  double sin_weight = 0.0;
  double mu = 0.0;
  double lip = 0.0;

  VectorXd y_star(const VectorXd& x) const;
  double phi(const VectorXd& x) const;
  VectorXd hypergrad(const VectorXd& x) const;

  BilevelProblem problem() const;

  static QuadraticOracle make(int outer_dim, int inner_dim, double mu,
                              double lip, double sin_weight,
                              double coupling_scale, std::uint64_t seed);

  // Canonical instance at a given condition number: 8 outer and 16 inner
  // dimensions, spectrum [1/kappa, 1], sin weight 0.5, coupling 0.5.
  static QuadraticOracle preset(int kappa, std::uint64_t seed = 1234);
};

// Default outer start for the presets, small enough that the conservative
// theory schedule converges within a few thousand iterations.
VectorXd preset_x0(const QuadraticOracle& oracle, double scale = 0.002);

// Largest observed ||y*(x) - y*(x')|| / ||x - x'|| over sampled pairs, for
// the warm-start bound lip/mu.
double warm_start_max_ratio(const QuadraticOracle& oracle, int n_pairs,
                            Rng& rng);

}  // namespace blno

#endif  // BLNO_QUADRATIC_ORACLE_HPP_
