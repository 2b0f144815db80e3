#ifndef BLNO_LINALG_HPP_
#define BLNO_LINALG_HPP_

#include <Eigen/Dense>

namespace blno {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Eigenpairs of a symmetric matrix, eigenvalues sorted descending and
// eigenvector columns matching that order.
struct EigenDecomposition {
  VectorXd eigenvalues;
  MatrixXd eigenvectors;
};

// Symmetric eigendecomposition. Only the lower triangle of m is read, so
// symmetry holds by construction. Throws NumericError on solver failure.
EigenDecomposition sym_eig(const Eigen::Ref<const MatrixXd>& m);

// Solves m x = b for symmetric positive definite m via Cholesky. On a pivot
// failure the system is retried with jitter 1e-12 * trace(m)/p * I,
// escalating by factors of 10 up to 1e-6 * trace(m)/p, after which a
// NumericError naming the failing pivot is thrown.
VectorXd spd_solve(const Eigen::Ref<const MatrixXd>& m,
                   const Eigen::Ref<const VectorXd>& b);

// Dense inverse of a symmetric invertible matrix (small-scale oracle use,
// p <= 2048). Throws NumericError when m is singular within tolerance.
MatrixXd dense_inverse(const Eigen::Ref<const MatrixXd>& m);

// lambda_max / lambda_min of a symmetric matrix. Returns +infinity when
// lambda_min <= 0 (the not-positive-definite sentinel).
double condition_number(const Eigen::Ref<const MatrixXd>& m);

}  // namespace blno

#endif  // BLNO_LINALG_HPP_
