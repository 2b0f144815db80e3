#include "blno/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "blno/error.hpp"

namespace blno {
namespace {

// Locates the first nonpositive Cholesky pivot for error reporting.
int failing_pivot(const MatrixXd& m) {
  const Eigen::Index p = m.rows();
  MatrixXd a = m.selfadjointView<Eigen::Lower>();
  for (Eigen::Index k = 0; k < p; ++k) {
    if (a(k, k) <= 0.0) return static_cast<int>(k);
    const double d = std::sqrt(a(k, k));
    a.col(k).tail(p - k) /= d;
    for (Eigen::Index j = k + 1; j < p; ++j) {
      a.col(j).tail(p - j) -= a(j, k) * a.col(k).tail(p - j);
    }
  }
  return -1;
}

}  // namespace

EigenDecomposition sym_eig(const Eigen::Ref<const MatrixXd>& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericError("sym_eig: eigensolver did not converge for dimension " +
                       std::to_string(m.rows()));
  }
  EigenDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

VectorXd spd_solve(const Eigen::Ref<const MatrixXd>& m,
                   const Eigen::Ref<const VectorXd>& b) {
  const Eigen::Index p = m.rows();
  const double scale = m.trace() / static_cast<double>(p);
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(b);

  double jitter = 1e-12 * scale;
  const double jitter_cap = 1e-6 * scale;
  while (jitter > 0.0 && jitter <= jitter_cap * (1.0 + 1e-12)) {
    MatrixXd shifted = m;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt.solve(b);
    jitter *= 10.0;
  }
  throw NumericError("spd_solve: matrix not positive definite after jitter, "
                     "pivot " +
                     std::to_string(failing_pivot(m)) + " of " +
                     std::to_string(p) + " fails");
}

MatrixXd dense_inverse(const Eigen::Ref<const MatrixXd>& m) {
  const Eigen::Index p = m.rows();
  Eigen::PartialPivLU<MatrixXd> lu(m);
  MatrixXd inv = lu.inverse();
  if (!inv.allFinite()) {
    throw NumericError("dense_inverse: singular matrix (non-finite inverse)");
  }
  // Probe-based residual guard; the full ||M M^{-1} - I||_max contract is
  // exercised in tests where p is small.
  const double m_max = m.cwiseAbs().maxCoeff();
  const double tol = 1e-8 * (1.0 + m_max);
  for (int probe = 0; probe < 3; ++probe) {
    VectorXd v = VectorXd::Zero(p);
    v[(probe * 7919) % p] = 1.0;
    const double err = (m * (inv * v) - v).cwiseAbs().maxCoeff();
    if (!(err <= tol * 1e3)) {
      throw NumericError("dense_inverse: singular within tolerance, probe "
                         "residual " +
                         std::to_string(err));
    }
  }
  return inv;
}

double condition_number(const Eigen::Ref<const MatrixXd>& m) {
  const EigenDecomposition eig = sym_eig(m);
  const double lambda_max = eig.eigenvalues[0];
  const double lambda_min = eig.eigenvalues[eig.eigenvalues.size() - 1];
  if (lambda_min <= 0.0) return std::numeric_limits<double>::infinity();
  return lambda_max / lambda_min;
}

}  // namespace blno
