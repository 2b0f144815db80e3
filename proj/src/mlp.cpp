#include "blno/mlp.hpp"

#include <chrono>
#include <cmath>

#include "blno/error.hpp"

namespace blno {
namespace {

MatrixXd random_matrix(int rows, int cols, double scale, Rng& rng) {
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

int Mlp::param_count() const {
  if (hidden_dim == 0) {
    return output_dim * input_dim + output_dim;
  }
  return hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim +
         output_dim;
}

VectorXd Mlp::flatten() const {
  VectorXd p(param_count());
  Eigen::Index at = 0;
  if (hidden_dim > 0) {
    p.segment(at, w1.size()) = Eigen::Map<const VectorXd>(w1.data(), w1.size());
    at += w1.size();
    p.segment(at, b1.size()) = b1;
    at += b1.size();
  }
  p.segment(at, w2.size()) = Eigen::Map<const VectorXd>(w2.data(), w2.size());
  at += w2.size();
  p.segment(at, b2.size()) = b2;
  return p;
}

void Mlp::unflatten(const Eigen::Ref<const VectorXd>& params) {
  Eigen::Index at = 0;
  if (hidden_dim > 0) {
    w1 = Eigen::Map<const MatrixXd>(params.data() + at, hidden_dim, input_dim);
    at += w1.size();
    b1 = params.segment(at, hidden_dim);
    at += hidden_dim;
    w2 = Eigen::Map<const MatrixXd>(params.data() + at, output_dim,
                                    hidden_dim);
    at += w2.size();
  } else {
    w2 = Eigen::Map<const MatrixXd>(params.data() + at, output_dim, input_dim);
    at += w2.size();
  }
  b2 = params.segment(at, output_dim);
}

Mlp Mlp::random(int input_dim, int hidden_dim, int output_dim, bool relu,
                Rng& rng) {
  Mlp net;
  net.input_dim = input_dim;
  net.hidden_dim = hidden_dim;
  net.output_dim = output_dim;
  net.relu = relu;
  if (hidden_dim > 0) {
    net.w1 = random_matrix(hidden_dim, input_dim, 1.0 / std::sqrt(input_dim),
                           rng);
    net.b1 = VectorXd::Zero(hidden_dim);
    net.w2 = random_matrix(output_dim, hidden_dim,
                           1.0 / std::sqrt(hidden_dim), rng);
  } else {
    net.w2 = random_matrix(output_dim, input_dim, 1.0 / std::sqrt(input_dim),
                           rng);
  }
  net.b2 = VectorXd::Zero(output_dim);
  return net;
}

MatrixXd Mlp::forward(const Eigen::Ref<const MatrixXd>& x) const {
  if (hidden_dim == 0) {
    return (w2 * x).colwise() + b2;
  }
  MatrixXd z1 = (w1 * x).colwise() + b1;
  if (relu) z1 = z1.cwiseMax(0.0);
  return (w2 * z1).colwise() + b2;
}

double mlp_loss(const Mlp& net, const Eigen::Ref<const MatrixXd>& x,
                const Eigen::Ref<const MatrixXd>& y) {
  return (net.forward(x) - y).squaredNorm() / (2.0 * x.cols());
}

VectorXd mlp_grad(const Mlp& net, const Eigen::Ref<const MatrixXd>& x,
                  const Eigen::Ref<const MatrixXd>& y) {
  const double inv_batch = 1.0 / x.cols();
  VectorXd grad(net.param_count());
  Eigen::Index at = 0;

  if (net.hidden_dim == 0) {
    const MatrixXd residual =
        (((net.w2 * x).colwise() + net.b2) - y) * inv_batch;
    const MatrixXd dw2 = residual * x.transpose();
    grad.segment(at, dw2.size()) =
        Eigen::Map<const VectorXd>(dw2.data(), dw2.size());
    at += dw2.size();
    grad.segment(at, net.output_dim) = residual.rowwise().sum();
    return grad;
  }

  const MatrixXd z1 = (net.w1 * x).colwise() + net.b1;
  const MatrixXd h = net.relu ? z1.cwiseMax(0.0) : z1;
  const MatrixXd residual = (((net.w2 * h).colwise() + net.b2) - y) * inv_batch;
  const MatrixXd dh = net.w2.transpose() * residual;
  const MatrixXd dz1 =
      net.relu ? (z1.array() > 0.0).select(dh, 0.0).eval() : dh;

  const MatrixXd dw1 = dz1 * x.transpose();
  grad.segment(at, dw1.size()) =
      Eigen::Map<const VectorXd>(dw1.data(), dw1.size());
  at += dw1.size();
  grad.segment(at, net.hidden_dim) = dz1.rowwise().sum();
  at += net.hidden_dim;
  const MatrixXd dw2 = residual * h.transpose();
  grad.segment(at, dw2.size()) =
      Eigen::Map<const VectorXd>(dw2.data(), dw2.size());
  at += dw2.size();
  grad.segment(at, net.output_dim) = residual.rowwise().sum();
  return grad;
}

MlpHessianOperator::MlpHessianOperator(Mlp net, MatrixXd x, MatrixXd y)
    : net_(std::move(net)), x_(std::move(x)), y_(std::move(y)),
      params_(net_.flatten()) {}

VectorXd MlpHessianOperator::apply(const Eigen::Ref<const VectorXd>& v) const {
  const double v_norm = v.norm();
  if (v_norm == 0.0) return VectorXd::Zero(params_.size());
  const double h = 1e-5 * (1.0 + params_.norm()) / (1.0 + v_norm);
  Mlp probe = net_;
  probe.unflatten(params_ + h * v);
  const VectorXd gp = mlp_grad(probe, x_, y_);
  probe.unflatten(params_ - h * v);
  const VectorXd gm = mlp_grad(probe, x_, y_);
  VectorXd hv = (gp - gm) / (2.0 * h);
  if (!hv.allFinite()) {
    for (Eigen::Index i = 0; i < hv.size(); ++i) {
      if (!std::isfinite(hv[i])) {
        throw NumericError("mlp hessian: non-finite probe at coordinate " +
                           std::to_string(i));
      }
    }
  }
  return hv;
}

int MlpBenchSpec::param_count() const {
  return hidden_dim * (input_dim + 1) + output_dim * (hidden_dim + 1);
}

MlpBenchSpec MlpBenchSpec::draw(Rng& rng) {
  static constexpr int kBatch[] = {8, 16, 32, 64};
  static constexpr int kInput[] = {32, 64, 128};
  static constexpr int kHidden[] = {8, 16, 32};
  static constexpr int kOutput[] = {4, 8, 16};
  MlpBenchSpec spec;
  do {
    spec.batch = kBatch[rng.uniform_int(4)];
    spec.input_dim = kInput[rng.uniform_int(3)];
    spec.hidden_dim = kHidden[rng.uniform_int(3)];
    spec.output_dim = kOutput[rng.uniform_int(3)];
  } while (spec.param_count() > 2048);  // keep the dense oracle computable
  return spec;
}

std::vector<IhvpBenchRow> ihvp_bench(int n_nets, int nystrom_rank, double rho,
                                     int cg_iters, std::uint64_t seed) {
  if (n_nets < 1) {
    throw NumericError("ihvp_bench: n_nets must be >= 1");
  }
  std::vector<IhvpBenchRow> rows;
  rows.reserve(3 * n_nets);
  const Rng master(seed);

  for (int net_id = 0; net_id < n_nets; ++net_id) {
    Rng rng = master.substream(net_id);
    const MlpBenchSpec spec = MlpBenchSpec::draw(rng);
    const Mlp net = Mlp::random(spec.input_dim, spec.hidden_dim,
                                spec.output_dim, /*relu=*/true, rng);
    const MatrixXd x = random_matrix(spec.input_dim, spec.batch, 1.0, rng);
    const MatrixXd y = random_matrix(spec.output_dim, spec.batch, 0.5, rng);
    const int p = net.param_count();
    VectorXd u(p);
    for (int i = 0; i < p; ++i) u[i] = rng.normal();

    const MlpHessianOperator fd_op(net, x, y);
    const DenseOperator op(fd_op.materialize());
    const VectorXd truth = exact_ihvp(op, rho, u);

    auto push = [&](const IhvpReport& report, bool fallback) {
      IhvpBenchRow row;
      row.net_id = net_id;
      row.param_count = p;
      row.method = report.method;
      row.error = (report.solution - truth).norm();
      row.residual = report.residual_norm;
      row.wall_ns = report.wall_ns;
      row.flag = (report.diverged || fallback) ? 1 : 0;
      rows.push_back(row);
    };

    Rng sketch_rng = rng.substream(1);
    const NystromSketch sketch = sample_columns(
        op, nystrom_rank, ColumnSampling::kUniform, sketch_rng);
    push(nystrom_ihvp(sketch, rho, u), sketch.uniform_fallback);
    push(cg_ihvp(op, u, /*lambda_reg=*/0.0, cg_iters, /*tol=*/0.0), false);
    push(nystrom_pcg(op, u, sketch, rho, cg_iters, /*tol=*/0.0), false);
  }
  return rows;
}

}  // namespace blno
