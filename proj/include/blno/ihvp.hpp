#ifndef BLNO_IHVP_HPP_
#define BLNO_IHVP_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "blno/linalg.hpp"
#include "blno/rng.hpp"

namespace blno {

// Matrix-free access to a symmetric operator H. column(j) must equal
// apply(e_j); the defaults below guarantee that.
class HessianOperator {
 public:
  virtual ~HessianOperator() = default;

  virtual Eigen::Index dim() const = 0;
  virtual VectorXd apply(const Eigen::Ref<const VectorXd>& v) const = 0;

  virtual VectorXd column(Eigen::Index j) const {
    VectorXd e = VectorXd::Zero(dim());
    e[j] = 1.0;
    return apply(e);
  }

  virtual VectorXd diagonal() const {
    VectorXd d(dim());
    for (Eigen::Index j = 0; j < dim(); ++j) d[j] = column(j)[j];
    return d;
  }

  // Dense form, available for dimensions small enough to invert exactly.
  virtual bool can_materialize() const { return dim() <= 2048; }
  virtual MatrixXd materialize() const;
};

// Wraps an explicit symmetric matrix.
class DenseOperator final : public HessianOperator {
 public:
  explicit DenseOperator(MatrixXd h) : h_(std::move(h)) {}

  Eigen::Index dim() const override { return h_.rows(); }
  VectorXd apply(const Eigen::Ref<const VectorXd>& v) const override {
    return h_.selfadjointView<Eigen::Lower>() * v;
  }
  VectorXd column(Eigen::Index j) const override {
    return h_.selfadjointView<Eigen::Lower>() *
           VectorXd::Unit(h_.rows(), j);
  }
  VectorXd diagonal() const override { return h_.diagonal(); }
  bool can_materialize() const override { return true; }
  MatrixXd materialize() const override {
    return h_.selfadjointView<Eigen::Lower>();
  }

 private:
  MatrixXd h_;
};

enum class ColumnSampling { kUniform, kDiagonalSquared };

// Column sketch of H: indices J, columns C = H[:,J], core W = H[J,J], and a
// square-root factor F with C W^+ C^T = F F^T (eigenvalues of W below
// 1e-10 * lambda_max are dropped, so F F^T is positive semidefinite even
// when finite differencing leaves W slightly indefinite).
struct NystromSketch {
  Eigen::Index op_dim = 0;
  std::vector<Eigen::Index> indices;
  MatrixXd columns;     // p x q
  MatrixXd core;        // q x q, rows of `columns` at J
  MatrixXd psd_factor;  // p x r
  ColumnSampling mode = ColumnSampling::kUniform;
  bool uniform_fallback = false;

  Eigen::Index rank() const {
    return static_cast<Eigen::Index>(indices.size());
  }
};

struct IhvpReport {
  VectorXd solution;
  int iterations = 0;
  double residual_norm = 0.0;
  std::int64_t wall_ns = 0;
  std::string method;
  bool diverged = false;
};

// Draws q distinct column indices and fills the sketch. kDiagonalSquared
// samples index i with probability H_ii^2 / sum_k H_kk^2, renormalizing
// after each draw; an all-zero diagonal falls back to uniform sampling with
// uniform_fallback set.
NystromSketch sample_columns(const HessianOperator& op, int q,
                             ColumnSampling mode, Rng& rng);

// Sketch with caller-chosen column indices (tests, preconditioner studies).
NystromSketch make_sketch(const HessianOperator& op,
                          std::vector<Eigen::Index> indices);

// (H_r + rho I)^{-1} b through the Woodbury identity,
//   (1/rho) b - (1/rho^2) C (W + (1/rho) C^T C)^{-1} C^T b,
// applied via the positive-semidefinite factor of the sketch. The result
// always satisfies ||v|| <= ||b|| / rho.
IhvpReport nystrom_ihvp(const NystromSketch& sketch, double rho,
                        const Eigen::Ref<const VectorXd>& b);

// Conjugate gradient on (H + lambda_reg I) v = b, zero start. Stops when
// ||r|| <= tol * ||b|| or after max_iters. Non-finite values or residual
// growth by 1e6 over the initial residual set `diverged` and return the
// last finite iterate; the reported residual is recomputed from the
// returned solution.
IhvpReport cg_ihvp(const HessianOperator& op,
                   const Eigen::Ref<const VectorXd>& b, double lambda_reg,
                   int max_iters, double tol);

// Conjugate gradient preconditioned with the sketch: each application of
// the preconditioner is nystrom_ihvp(sketch, rho, .). Same system and
// termination contract as cg_ihvp.
IhvpReport nystrom_pcg(const HessianOperator& op,
                       const Eigen::Ref<const VectorXd>& b,
                       const NystromSketch& sketch, double rho, int max_iters,
                       double tol, double lambda_reg = 0.0);

// Ground-truth (H + rho I)^{-1} b via dense inversion; requires
// op.can_materialize().
VectorXd exact_ihvp(const HessianOperator& op, double rho,
                    const Eigen::Ref<const VectorXd>& b);

// Irreducible sketch error estimate
//   Psi = (grad_bound / rho) * t / (t + rho),  t = lambda_next + eps * p_tilde * lip^2.
double nystrom_error_bound(double grad_bound, double rho, double lambda_next,
                           double eps, int p_tilde, double lip);

}  // namespace blno

#endif  // BLNO_IHVP_HPP_
