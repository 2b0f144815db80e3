#include "blno/blo.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "blno/csv.hpp"
#include "blno/error.hpp"

namespace blno {

IhvpConfig IhvpConfig::exact(double rho) {
  IhvpConfig c;
  c.kind = Kind::kExact;
  c.rho = rho;
  return c;
}

IhvpConfig IhvpConfig::cg(double lambda_reg, int max_iters, double tol) {
  IhvpConfig c;
  c.kind = Kind::kCg;
  c.lambda_reg = lambda_reg;
  c.max_iters = max_iters;
  c.tol = tol;
  return c;
}

IhvpConfig IhvpConfig::nystrom(int rank, double rho, ColumnSampling sampling) {
  if (rho <= 0.0) {
    throw NumericError("IhvpConfig::nystrom: rho must be positive");
  }
  IhvpConfig c;
  c.kind = Kind::kNystrom;
  c.rank = rank;
  c.rho = rho;
  c.sampling = sampling;
  return c;
}

std::pair<VectorXd, double> inner_descent(const BilevelProblem& problem,
                                          const VectorXd& x, VectorXd y,
                                          int steps, double lr) {
  for (int d = 0; d < steps; ++d) {
    y -= lr * problem.grad_y_g(x, y);
    if (!y.allFinite()) {
      throw NumericError("inner_descent: non-finite iterate at step " +
                         std::to_string(d));
    }
  }
  return {y, problem.grad_y_g(x, y).norm()};
}

std::pair<VectorXd, IhvpReport> hypergradient(const BilevelProblem& problem,
                                              const VectorXd& x,
                                              const VectorXd& y,
                                              const IhvpConfig& ihvp,
                                              Rng& rng) {
  const VectorXd rhs = problem.grad_y_f(x, y);
  const auto op = problem.hess_yy_g(x, y);
  IhvpReport report;
  switch (ihvp.kind) {
    case IhvpConfig::Kind::kExact: {
      const auto start = std::chrono::steady_clock::now();
      report.solution = exact_ihvp(*op, ihvp.rho, rhs);
      report.method = "exact";
      report.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      break;
    }
    case IhvpConfig::Kind::kCg:
      report = cg_ihvp(*op, rhs, ihvp.lambda_reg, ihvp.max_iters, ihvp.tol);
      break;
    case IhvpConfig::Kind::kNystrom: {
      const NystromSketch sketch =
          sample_columns(*op, ihvp.rank, ihvp.sampling, rng);
      report = nystrom_ihvp(sketch, ihvp.rho, rhs);
      break;
    }
  }
  const VectorXd hg =
      problem.grad_x_f(x, y) - problem.jvp_xy_g(x, y, report.solution);
  return {hg, report};
}

BloRunRecord solve(const BilevelProblem& problem, const BloConfig& config,
                   const VectorXd& x0, const VectorXd& y0, Rng& rng) {
  if (config.inner_iters < 1 || config.outer_iters < 1) {
    throw NumericError("solve: outer_iters and inner_iters must be >= 1");
  }
  BloRunRecord record;
  VectorXd x = x0;
  VectorXd y = y0;
  double sum_hg_sq = 0.0;
  double min_hg_sq = std::numeric_limits<double>::infinity();
  int completed = 0;

  for (int k = 0; k < config.outer_iters; ++k) {
    const auto start = std::chrono::steady_clock::now();
    const VectorXd z0 = (config.warm_start && k > 0) ? y : y0;
    double inner_grad_norm = 0.0;
    try {
      auto [y_d, grad_norm] =
          inner_descent(problem, x, z0, config.inner_iters, config.inner_lr);
      y = y_d;
      inner_grad_norm = grad_norm;
    } catch (const NumericError&) {
      record.aborted = true;
      record.abort_iter = k;
      break;
    }

    auto [hg, ihvp_report] = hypergradient(problem, x, y, config.ihvp, rng);
    if (!hg.allFinite()) {
      record.aborted = true;
      record.abort_iter = k;
      break;
    }

    const double hg_sq = hg.squaredNorm();
    sum_hg_sq += hg_sq;
    min_hg_sq = std::min(min_hg_sq, hg_sq);
    record.f_values.push_back(problem.f_value ? problem.f_value(x, y) : 0.0);

    if (k % config.record_every == 0 || k + 1 == config.outer_iters) {
      BloIterRow row;
      row.k = k;
      row.hypergrad_norm_sq = hg_sq;
      row.inner_grad_norm = inner_grad_norm;
      row.ihvp_iters = ihvp_report.iterations;
      row.ihvp_residual = ihvp_report.residual_norm;
      row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      record.rows.push_back(row);
    }

    x -= config.outer_lr * hg;
    if (!x.allFinite()) {
      record.aborted = true;
      record.abort_iter = k;
      break;
    }
    record.final_inner_grad_norm = inner_grad_norm;
    ++completed;
  }

  record.x_final = x;
  record.y_final = y;
  record.mean_hypergrad_norm_sq = completed > 0 ? sum_hg_sq / completed : 0.0;
  record.min_hypergrad_norm_sq =
      completed > 0 ? min_hg_sq : std::numeric_limits<double>::infinity();

  // Stationarity: some iterate has hypergradient norm squared below eps and
  // the final inner iterate satisfies ||grad_y g|| <= sqrt(2 mu c eps),
  // which bounds the distance to the inner optimum under strong convexity.
  const double lower_level_bound =
      std::sqrt(2.0 * problem.mu * config.stationarity_c * config.target_eps);
  record.stationary = !record.aborted &&
                      record.min_hypergrad_norm_sq <= config.target_eps &&
                      record.final_inner_grad_norm <= lower_level_bound;
  return record;
}

Schedule recommended_schedule(double lip, double mu, double tau,
                              double grad_bound, double rho) {
  const double shift = mu + rho;
  const double l_phi =
      lip + (2.0 * lip * lip + tau * grad_bound * grad_bound) / shift +
      (2.0 * tau * lip * grad_bound + lip * lip * lip) / (shift * shift) +
      tau * lip * lip * grad_bound / (shift * shift * shift);
  Schedule s;
  s.l_phi = l_phi;
  s.inner_lr = 1.0 / lip;
  s.outer_lr = 1.0 / (8.0 * l_phi);
  s.inner_iters = static_cast<int>(std::ceil(lip / mu * std::log(4.0)));
  return s;
}

void write_blo_csv(const std::string& path, const BloRunRecord& record,
                   bool timing) {
  CsvWriter csv(path, {"k", "hypergrad_norm_sq", "inner_grad_norm",
                       "ihvp_iters", "ihvp_residual", "wall_ns"});
  for (const auto& row : record.rows) {
    csv.cell(row.k)
        .cell(row.hypergrad_norm_sq)
        .cell(row.inner_grad_norm)
        .cell(row.ihvp_iters)
        .cell(row.ihvp_residual)
        .cell(timing ? row.wall_ns : std::int64_t{0});
    csv.end_row();
  }
}

}  // namespace blno
