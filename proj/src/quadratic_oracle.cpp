#include "blno/quadratic_oracle.hpp"

#include <cmath>
#include <memory>

namespace blno {
namespace {

MatrixXd random_orthogonal(int n, Rng& rng) {
  MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  const Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  return q;
}

}  // namespace

VectorXd QuadraticOracle::y_star(const VectorXd& x) const {
  return spd_solve(a, b.transpose() * x);
}

double QuadraticOracle::phi(const VectorXd& x) const {
  const VectorXd y = y_star(x);
  return 0.5 * (y - y_target).squaredNorm() +
         sin_weight * x.array().sin().square().sum();
}

VectorXd QuadraticOracle::hypergrad(const VectorXd& x) const {
  const VectorXd y = y_star(x);
  return b * spd_solve(a, y - y_target) +
         sin_weight * (2.0 * x).array().sin().matrix();
}

BilevelProblem QuadraticOracle::problem() const {
  BilevelProblem p;
  p.outer_dim = static_cast<int>(b.rows());
  p.inner_dim = static_cast<int>(a.rows());
  p.mu = mu;
  p.lip = lip;
  const QuadraticOracle self = *this;  // capture by value; callbacks are pure
  p.grad_x_f = [self](const VectorXd& x, const VectorXd&) -> VectorXd {
    return self.sin_weight * (2.0 * x).array().sin().matrix();
  };
  p.grad_y_f = [self](const VectorXd&, const VectorXd& y) -> VectorXd {
    return y - self.y_target;
  };
  p.grad_y_g = [self](const VectorXd& x, const VectorXd& y) -> VectorXd {
    return self.a * y - self.b.transpose() * x;
  };
  p.hess_yy_g = [self](const VectorXd&,
                       const VectorXd&) -> std::shared_ptr<HessianOperator> {
    return std::make_shared<DenseOperator>(self.a);
  };
  p.jvp_xy_g = [self](const VectorXd&, const VectorXd&,
                      const VectorXd& v) -> VectorXd { return -self.b * v; };
  p.f_value = [self](const VectorXd& x, const VectorXd& y) -> double {
    return 0.5 * (y - self.y_target).squaredNorm() +
           self.sin_weight * x.array().sin().square().sum();
  };
  p.y_star = [self](const VectorXd& x) -> VectorXd { return self.y_star(x); };
  p.hypergrad_exact = [self](const VectorXd& x) -> VectorXd {
    return self.hypergrad(x);
  };
  return p;
}

QuadraticOracle QuadraticOracle::make(int outer_dim, int inner_dim, double mu,
                                      double lip, double sin_weight,
                                      double coupling_scale,
                                      std::uint64_t seed) {
  Rng rng(seed);
  QuadraticOracle oracle;
  oracle.mu = mu;
  oracle.lip = lip;
  oracle.sin_weight = sin_weight;

  VectorXd spectrum(inner_dim);
  if (inner_dim == 1) {
    spectrum[0] = lip;
  } else {
    const double log_mu = std::log(mu);
    const double log_lip = std::log(lip);
    for (int i = 0; i < inner_dim; ++i) {
      const double t = static_cast<double>(i) / (inner_dim - 1);
      spectrum[i] = std::exp(log_lip + t * (log_mu - log_lip));
    }
  }
  const MatrixXd q = random_orthogonal(inner_dim, rng);
  oracle.a = q * spectrum.asDiagonal() * q.transpose();
  oracle.a = 0.5 * (oracle.a + oracle.a.transpose());  // exact symmetry

  MatrixXd g(outer_dim, inner_dim);
  for (int i = 0; i < outer_dim; ++i)
    for (int j = 0; j < inner_dim; ++j)
      g(i, j) = rng.normal() / std::sqrt(static_cast<double>(inner_dim));
  oracle.b = coupling_scale * g * oracle.a;

  oracle.y_target = VectorXd::Zero(inner_dim);
  return oracle;
}

QuadraticOracle QuadraticOracle::preset(int kappa, std::uint64_t seed) {
  return make(8, 16, 1.0 / kappa, 1.0, 0.5, 0.5, seed);
}

VectorXd preset_x0(const QuadraticOracle& oracle, double scale) {
  return VectorXd::Constant(oracle.b.rows(), scale);
}

double warm_start_max_ratio(const QuadraticOracle& oracle, int n_pairs,
                            Rng& rng) {
  const int m = static_cast<int>(oracle.b.rows());
  double max_ratio = 0.0;
  for (int trial = 0; trial < n_pairs; ++trial) {
    VectorXd x1(m), x2(m);
    for (int i = 0; i < m; ++i) {
      x1[i] = rng.normal();
      x2[i] = rng.normal();
    }
    const double dx = (x1 - x2).norm();
    if (dx == 0.0) continue;
    const double dy = (oracle.y_star(x1) - oracle.y_star(x2)).norm();
    max_ratio = std::max(max_ratio, dy / dx);
  }
  return max_ratio;
}

}  // namespace blno
