#ifndef BLNO_MLP_HPP_
#define BLNO_MLP_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "blno/ihvp.hpp"
#include "blno/linalg.hpp"
#include "blno/rng.hpp"

namespace blno {

// Two-layer perceptron with rectified-linear (or identity) activation,
// mean-squared-error loss
//   loss = ||net(X) - Y||_F^2 / (2 * batch).
// hidden_dim == 0 degenerates to a single affine layer. Parameters flatten
// as [vec(w1) | b1 | vec(w2) | b2] with Eigen's column-major vec().
struct Mlp {
  int input_dim = 0;
  int hidden_dim = 0;
  int output_dim = 0;
  bool relu = true;

  MatrixXd w1;  // hidden x input
  VectorXd b1;  // hidden
  MatrixXd w2;  // output x (hidden, or input when hidden_dim == 0)
  VectorXd b2;  // output

  int param_count() const;
  VectorXd flatten() const;
  void unflatten(const Eigen::Ref<const VectorXd>& params);

  // Entries scaled by 1/sqrt(fan_in).
  static Mlp random(int input_dim, int hidden_dim, int output_dim, bool relu,
                    Rng& rng);

  // Columns of x are samples.
  MatrixXd forward(const Eigen::Ref<const MatrixXd>& x) const;
};

double mlp_loss(const Mlp& net, const Eigen::Ref<const MatrixXd>& x,
                const Eigen::Ref<const MatrixXd>& y);

// Hand-derived backpropagation, flattened in parameter order.
VectorXd mlp_grad(const Mlp& net, const Eigen::Ref<const MatrixXd>& x,
                  const Eigen::Ref<const MatrixXd>& y);

// Loss Hessian through central differences of the analytic gradient:
//   H v ~ (grad(p + h v) - grad(p - h v)) / (2h),
//   h = 1e-5 * (1 + ||p||) / (1 + ||v||).
class MlpHessianOperator final : public HessianOperator {
 public:
  MlpHessianOperator(Mlp net, MatrixXd x, MatrixXd y);

  Eigen::Index dim() const override { return params_.size(); }
  VectorXd apply(const Eigen::Ref<const VectorXd>& v) const override;

 private:
  Mlp net_;
  MatrixXd x_;
  MatrixXd y_;
  VectorXd params_;
};

// One random benchmark instance. Dimensions are drawn from
// batch in {8,16,32,64}, input in {32,64,128}, hidden in {8,16,32},
// output in {4,8,16}, redrawing until the parameter count fits the dense
// ground-truth limit (P <= 2048).
struct MlpBenchSpec {
  int batch = 0;
  int input_dim = 0;
  int hidden_dim = 0;
  int output_dim = 0;

  int param_count() const;
  static MlpBenchSpec draw(Rng& rng);
};

struct IhvpBenchRow {
  int net_id = 0;
  int param_count = 0;
  std::string method;
  double error = 0.0;
  double residual = 0.0;
  std::int64_t wall_ns = 0;
  int flag = 0;  // 1 = solver diverged or sketch fell back
};

// For each net: draw the spec, the data (X ~ N(0,I), Y ~ 0.5 N(0,I)), a
// probe u ~ N(0,I), materialize the finite-difference Hessian, and measure
// ||v_hat - v*|| against v* = (H + rho I)^{-1} u for the sketch solver
// (rank q), plain CG (lambda 0, cg_iters iterations), and sketch-
// preconditioned CG. Rows come in net order, three per net.
std::vector<IhvpBenchRow> ihvp_bench(int n_nets, int nystrom_rank, double rho,
                                     int cg_iters, std::uint64_t seed);

}  // namespace blno

#endif  // BLNO_MLP_HPP_
