#include "blno/ihvp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <utility>

#include "blno/error.hpp"

namespace blno {
namespace {

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now() - start)
      .count();
}

// Shared application of (H_r + rho I)^{-1} with the core factored once.
class SketchInverse {
 public:
  SketchInverse(const NystromSketch& sketch, double rho)
      : factor_(sketch.psd_factor), rho_(rho) {
    if (rho <= 0.0) {
      throw NumericError("nystrom_ihvp: rho must be positive, got " +
                         std::to_string(rho));
    }
    const Eigen::Index r = factor_.cols();
    if (r > 0) {
      MatrixXd core = MatrixXd::Identity(r, r);
      core.noalias() += factor_.transpose() * factor_ / rho_;
      core_llt_.compute(core);
      if (core_llt_.info() != Eigen::Success) {
        throw NumericError(
            "nystrom_ihvp: core factorization failed at rho=" +
            std::to_string(rho_) + ", q=" + std::to_string(sketch.rank()));
      }
    }
  }

  VectorXd apply(const Eigen::Ref<const VectorXd>& b) const {
    if (factor_.cols() == 0) return b / rho_;
    const VectorXd projected = core_llt_.solve(factor_.transpose() * b);
    return b / rho_ - factor_ * projected / (rho_ * rho_);
  }

  // Residual of (F F^T + rho I) x = b for the report.
  double residual(const VectorXd& x, const VectorXd& b) const {
    if (factor_.cols() == 0) return (rho_ * x - b).norm();
    return (factor_ * (factor_.transpose() * x) + rho_ * x - b).norm();
  }

 private:
  MatrixXd factor_;
  double rho_;
  Eigen::LLT<MatrixXd> core_llt_;
};

void fill_sketch_blocks(const HessianOperator& op, NystromSketch& sketch) {
  const Eigen::Index p = op.dim();
  const Eigen::Index q = sketch.rank();
  sketch.op_dim = p;
  sketch.columns.resize(p, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    sketch.columns.col(a) = op.column(sketch.indices[a]);
  }
  sketch.core.resize(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    sketch.core.row(a) = sketch.columns.row(sketch.indices[a]);
  }
  // Square-root factor of C W^+ C^T. Eigenvalues of W at or below the
  // relative cutoff (including any negative ones from finite-difference
  // noise) are dropped, which keeps the reconstruction PSD.
  if (q == 0) {
    sketch.psd_factor.resize(p, 0);
    return;
  }
  const EigenDecomposition eig = sym_eig(sketch.core);
  const double lambda_max = eig.eigenvalues[0];
  const double cutoff = 1e-10 * std::max(lambda_max, 0.0);
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < q; ++i) {
    if (eig.eigenvalues[i] > cutoff && eig.eigenvalues[i] > 0.0) ++kept;
  }
  sketch.psd_factor.resize(p, kept);
  for (Eigen::Index i = 0; i < kept; ++i) {
    sketch.psd_factor.col(i) =
        sketch.columns * eig.eigenvectors.col(i) /
        std::sqrt(eig.eigenvalues[i]);
  }
}

}  // namespace

MatrixXd HessianOperator::materialize() const {
  const Eigen::Index p = dim();
  if (!can_materialize()) {
    throw NumericError("materialize: dimension " + std::to_string(p) +
                       " exceeds the dense limit");
  }
  MatrixXd h(p, p);
  for (Eigen::Index j = 0; j < p; ++j) h.col(j) = column(j);
  return h;
}

NystromSketch sample_columns(const HessianOperator& op, int q,
                             ColumnSampling mode, Rng& rng) {
  const Eigen::Index p = op.dim();
  if (q < 0 || q > p) {
    throw NumericError("sample_columns: q=" + std::to_string(q) +
                       " out of range for dimension " + std::to_string(p));
  }
  NystromSketch sketch;
  sketch.mode = mode;

  if (mode == ColumnSampling::kDiagonalSquared) {
    VectorXd weights = op.diagonal().array().square();
    if (weights.sum() <= 0.0) {
      sketch.uniform_fallback = true;
      mode = ColumnSampling::kUniform;
    } else {
      for (int draw = 0; draw < q; ++draw) {
        const double total = weights.sum();
        double u = rng.uniform() * total;
        Eigen::Index pick = -1;
        for (Eigen::Index i = 0; i < p; ++i) {
          if (weights[i] <= 0.0) continue;
          u -= weights[i];
          pick = i;
          if (u <= 0.0) break;
        }
        if (pick < 0) {  // all remaining weights zero: finish uniformly
          sketch.uniform_fallback = true;
          mode = ColumnSampling::kUniform;
          break;
        }
        sketch.indices.push_back(pick);
        weights[pick] = 0.0;
      }
    }
  }

  if (mode == ColumnSampling::kUniform ||
      static_cast<int>(sketch.indices.size()) < q) {
    std::vector<Eigen::Index> pool(p);
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    pool.erase(std::remove_if(pool.begin(), pool.end(),
                              [&](Eigen::Index i) {
                                return std::find(sketch.indices.begin(),
                                                 sketch.indices.end(),
                                                 i) != sketch.indices.end();
                              }),
               pool.end());
    while (static_cast<int>(sketch.indices.size()) < q) {
      const int slot = rng.uniform_int(static_cast<int>(pool.size()));
      sketch.indices.push_back(pool[slot]);
      pool.erase(pool.begin() + slot);
    }
  }

  fill_sketch_blocks(op, sketch);
  return sketch;
}

NystromSketch make_sketch(const HessianOperator& op,
                          std::vector<Eigen::Index> indices) {
  NystromSketch sketch;
  sketch.indices = std::move(indices);
  fill_sketch_blocks(op, sketch);
  return sketch;
}

IhvpReport nystrom_ihvp(const NystromSketch& sketch, double rho,
                        const Eigen::Ref<const VectorXd>& b) {
  const auto start = std::chrono::steady_clock::now();
  if (sketch.op_dim != b.size()) {
    throw NumericError("nystrom_ihvp: sketch dimension " +
                       std::to_string(sketch.op_dim) +
                       " does not match rhs of size " +
                       std::to_string(b.size()));
  }
  const SketchInverse inv(sketch, rho);
  IhvpReport report;
  report.method = "nystrom";
  report.solution = inv.apply(b);
  report.residual_norm = inv.residual(report.solution, b);
  report.wall_ns = elapsed_ns(start);
#ifndef NDEBUG
  if (report.solution.norm() > b.norm() / rho * (1.0 + 1e-9)) {
    throw NumericError("nystrom_ihvp: operator bound ||v|| <= ||b||/rho "
                       "violated");
  }
#endif
  return report;
}

IhvpReport cg_ihvp(const HessianOperator& op,
                   const Eigen::Ref<const VectorXd>& b, double lambda_reg,
                   int max_iters, double tol) {
  const auto start = std::chrono::steady_clock::now();
  IhvpReport report;
  report.method = "cg";

  VectorXd x = VectorXd::Zero(op.dim());
  VectorXd r = b;
  VectorXd p = r;
  double rs = r.squaredNorm();
  const double r0 = std::sqrt(rs);
  const double b_norm = b.norm();

  if (r0 == 0.0) {
    report.solution = x;
    report.wall_ns = elapsed_ns(start);
    return report;
  }

  int it = 0;
  while (it < max_iters) {
    ++it;
    VectorXd ap = op.apply(p);
    if (lambda_reg != 0.0) ap += lambda_reg * p;
    const double denom = p.dot(ap);
    const double alpha = rs / denom;
    const VectorXd x_next = x + alpha * p;
    const VectorXd r_next = r - alpha * ap;
    if (!x_next.allFinite() || !r_next.allFinite()) {
      report.diverged = true;
      break;
    }
    x = x_next;
    r = r_next;
    const double rs_next = r.squaredNorm();
    if (std::sqrt(rs_next) > 1e6 * r0) {
      report.diverged = true;
      break;
    }
    if (std::sqrt(rs_next) <= tol * b_norm) {
      rs = rs_next;
      break;
    }
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }

  report.solution = x;
  report.iterations = it;
  VectorXd true_residual = b - op.apply(x);
  if (lambda_reg != 0.0) true_residual -= lambda_reg * x;
  report.residual_norm = true_residual.norm();
  report.wall_ns = elapsed_ns(start);
  return report;
}

IhvpReport nystrom_pcg(const HessianOperator& op,
                       const Eigen::Ref<const VectorXd>& b,
                       const NystromSketch& sketch, double rho, int max_iters,
                       double tol, double lambda_reg) {
  const auto start = std::chrono::steady_clock::now();
  IhvpReport report;
  report.method = "nystrom_pcg";

  const SketchInverse precond(sketch, rho);
  VectorXd x = VectorXd::Zero(op.dim());
  VectorXd r = b;
  const double r0 = r.norm();
  const double b_norm = b.norm();
  if (r0 == 0.0) {
    report.solution = x;
    report.wall_ns = elapsed_ns(start);
    return report;
  }

  VectorXd z = precond.apply(r);
  VectorXd p = z;
  double rz = r.dot(z);

  int it = 0;
  while (it < max_iters) {
    ++it;
    VectorXd ap = op.apply(p);
    if (lambda_reg != 0.0) ap += lambda_reg * p;
    const double alpha = rz / p.dot(ap);
    const VectorXd x_next = x + alpha * p;
    const VectorXd r_next = r - alpha * ap;
    if (!x_next.allFinite() || !r_next.allFinite()) {
      report.diverged = true;
      break;
    }
    x = x_next;
    r = r_next;
    if (r.norm() > 1e6 * r0) {
      report.diverged = true;
      break;
    }
    if (r.norm() <= tol * b_norm) break;
    z = precond.apply(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }

  report.solution = x;
  report.iterations = it;
  VectorXd true_residual = b - op.apply(x);
  if (lambda_reg != 0.0) true_residual -= lambda_reg * x;
  report.residual_norm = true_residual.norm();
  report.wall_ns = elapsed_ns(start);
  return report;
}

VectorXd exact_ihvp(const HessianOperator& op, double rho,
                    const Eigen::Ref<const VectorXd>& b) {
  if (!op.can_materialize()) {
    throw NumericError("exact_ihvp: dimension " + std::to_string(op.dim()) +
                       " too large to materialize");
  }
  MatrixXd shifted = op.materialize();
  shifted.diagonal().array() += rho;
  const MatrixXd inv = dense_inverse(shifted);
  VectorXd x = inv * b;
  const double residual = (shifted * x - b).norm();
  if (!(residual <= 1e-9 * (1.0 + b.norm()))) {
    throw NumericError("exact_ihvp: residual " + std::to_string(residual) +
                       " above tolerance");
  }
  return x;
}

double nystrom_error_bound(double grad_bound, double rho, double lambda_next,
                           double eps, int p_tilde, double lip) {
  const double tail = lambda_next + eps * static_cast<double>(p_tilde) *
                                        lip * lip;
  return grad_bound / rho * tail / (tail + rho);
}

}  // namespace blno
