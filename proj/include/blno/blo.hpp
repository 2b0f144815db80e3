#ifndef BLNO_BLO_HPP_
#define BLNO_BLO_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "blno/ihvp.hpp"
#include "blno/linalg.hpp"
#include "blno/rng.hpp"

namespace blno {

// Callback bundle for a bilevel problem
//   min_x f(x, y*(x))  s.t.  y*(x) = argmin_y g_x(y),
// with first- and second-order actions of g supplied matrix-free.
struct BilevelProblem {
  int outer_dim = 0;
  int inner_dim = 0;

  std::function<VectorXd(const VectorXd&, const VectorXd&)> grad_x_f;
  std::function<VectorXd(const VectorXd&, const VectorXd&)> grad_y_f;
  std::function<VectorXd(const VectorXd&, const VectorXd&)> grad_y_g;
  std::function<std::shared_ptr<HessianOperator>(const VectorXd&,
                                                 const VectorXd&)>
      hess_yy_g;
  // d^2 g / dx dy applied to an inner-space vector, giving an outer-space
  // vector.
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>
      jvp_xy_g;
  std::function<double(const VectorXd&, const VectorXd&)> f_value;

  // Optional closed forms for oracle problems.
  std::function<VectorXd(const VectorXd&)> y_star;
  std::function<VectorXd(const VectorXd&)> hypergrad_exact;

  double mu = 0.0;   // declared strong-convexity constant of g
  double lip = 0.0;  // declared gradient-Lipschitz constant
};

// Inverse-Hessian solver selection for the hypergradient.
struct IhvpConfig {
  enum class Kind { kExact, kCg, kNystrom };
  Kind kind = Kind::kExact;
  double rho = 0.0;
  double lambda_reg = 0.0;
  int max_iters = 100;
  double tol = 1e-10;
  int rank = 0;
  ColumnSampling sampling = ColumnSampling::kUniform;

  static IhvpConfig exact(double rho = 0.0);
  static IhvpConfig cg(double lambda_reg, int max_iters, double tol = 1e-10);
  static IhvpConfig nystrom(int rank, double rho,
                            ColumnSampling sampling = ColumnSampling::kUniform);
};

struct BloConfig {
  double outer_lr = 0.0;
  double inner_lr = 0.0;
  int outer_iters = 1;
  int inner_iters = 1;
  bool warm_start = true;
  IhvpConfig ihvp;
  double target_eps = 1e-6;
  double stationarity_c = 1.0;  // constant in the lower-level check
  int record_every = 1;
};

struct BloIterRow {
  int k = 0;
  double hypergrad_norm_sq = 0.0;
  double inner_grad_norm = 0.0;
  int ihvp_iters = 0;
  double ihvp_residual = 0.0;
  std::int64_t wall_ns = 0;
};

struct BloRunRecord {
  std::vector<BloIterRow> rows;
  std::vector<double> f_values;  // per outer iteration, for diagnostics
  VectorXd x_final;
  VectorXd y_final;
  double mean_hypergrad_norm_sq = 0.0;  // (1/K) sum over all iterations
  double min_hypergrad_norm_sq = 0.0;
  double final_inner_grad_norm = 0.0;
  bool stationary = false;
  bool aborted = false;
  int abort_iter = -1;
};

// Plain gradient descent on g(x, .): y <- y - lr * grad_y_g. Returns the
// final iterate and its gradient norm. Throws on a non-finite iterate.
std::pair<VectorXd, double> inner_descent(const BilevelProblem& problem,
                                          const VectorXd& x, VectorXd y,
                                          int steps, double lr);

// Implicit-function-theorem hypergradient at (x, y):
//   grad f_x - (d^2 g/dxdy) (d^2 g/dy^2)^{-1} grad f_y
// with the inverse applied by the configured solver.
std::pair<VectorXd, IhvpReport> hypergradient(const BilevelProblem& problem,
                                              const VectorXd& x,
                                              const VectorXd& y,
                                              const IhvpConfig& ihvp,
                                              Rng& rng);

// Nested descent: each outer iteration runs inner_descent (warm-started when
// configured), assembles the hypergradient, and steps the outer variable.
BloRunRecord solve(const BilevelProblem& problem, const BloConfig& config,
                   const VectorXd& x0, const VectorXd& y0, Rng& rng);

// Step sizes and inner-iteration count from the problem constants:
//   inner_lr = 1/L, outer_lr = 1/(8 L_phi), D = ceil(kappa ln 4),
//   L_phi = L + (2L^2 + tau M^2)/(mu + rho)
//         + (2 tau L M + L^3)/(mu + rho)^2 + tau L^2 M/(mu + rho)^3.
struct Schedule {
  double outer_lr = 0.0;
  double inner_lr = 0.0;
  int inner_iters = 0;
  double l_phi = 0.0;
};
Schedule recommended_schedule(double lip, double mu, double tau,
                              double grad_bound, double rho);

// Serializes rows as (k, hypergrad_norm_sq, inner_grad_norm, ihvp_iters,
// ihvp_residual, wall_ns).
void write_blo_csv(const std::string& path, const BloRunRecord& record,
                   bool timing);

}  // namespace blno

#endif  // BLNO_BLO_HPP_
