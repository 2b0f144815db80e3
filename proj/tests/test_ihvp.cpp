#include <algorithm>
#include <limits>
#include <cmath>
#include <vector>

#include "blno/error.hpp"
#include "blno/ihvp.hpp"
#include "blno/linalg.hpp"
#include "blno/rng.hpp"
#include "doctest.h"

using blno::ColumnSampling;
using blno::DenseOperator;
using blno::MatrixXd;
using blno::NystromSketch;
using blno::Rng;
using blno::VectorXd;

namespace {

MatrixXd random_psd(int p, int rank, Rng& rng) {
  MatrixXd g(p, rank);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = rng.normal();
  return g * g.transpose();
}

VectorXd random_vector(int p, Rng& rng) {
  VectorXd v(p);
  for (int i = 0; i < p; ++i) v[i] = rng.normal();
  return v;
}

std::vector<Eigen::Index> all_indices(int p) {
  std::vector<Eigen::Index> idx(p);
  for (int i = 0; i < p; ++i) idx[i] = i;
  return idx;
}

// Frobenius norm of H - H_r for a sketch.
double sketch_error(const MatrixXd& h, const NystromSketch& s) {
  const MatrixXd hr = s.psd_factor * s.psd_factor.transpose();
  return (h - hr).norm();
}

}  // namespace

TEST_CASE("operator column equals apply on a unit vector") {
  Rng rng(5);
  const MatrixXd h = random_psd(12, 12, rng);
  DenseOperator op(h);
  for (int j = 0; j < 12; ++j) {
    CHECK((op.column(j) - op.apply(VectorXd::Unit(12, j))).norm() == 0.0);
  }
  CHECK((op.diagonal() - h.diagonal()).norm() == 0.0);
}

TEST_CASE("operator symmetry probe") {
  Rng rng(6);
  const MatrixXd h = random_psd(16, 16, rng);
  DenseOperator op(h);
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd u = random_vector(16, rng);
    const VectorXd v = random_vector(16, rng);
    const double asym = std::abs(u.dot(op.apply(v)) - v.dot(op.apply(u)));
    CHECK(asym <= 1e-8 * (1.0 + u.norm() * v.norm() * h.norm()));
  }
}

TEST_CASE("sample_columns full sampling is a permutation and reconstructs H") {
  Rng rng(7);
  const int p = 10;
  const MatrixXd h = random_psd(p, p, rng);
  DenseOperator op(h);
  const NystromSketch s =
      blno::sample_columns(op, p, ColumnSampling::kUniform, rng);
  std::vector<Eigen::Index> sorted = s.indices;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == all_indices(p));
  CHECK(sketch_error(h, s) <= 1e-7 * (1.0 + h.norm()));

  // W consistency: core rows are the sampled rows of the column block.
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b)
      CHECK(s.core(a, b) == s.columns(s.indices[a], b));
}

TEST_CASE("diagonal-squared sampling matches the categorical probability") {
  // diag(100, 1, 1, 1): index 0 carries weight 100^2/(100^2+3).
  MatrixXd d = MatrixXd::Zero(4, 4);
  d.diagonal() << 100, 1, 1, 1;
  DenseOperator op(d);
  Rng rng(2024);
  const int trials = 100000;
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    const NystromSketch s =
        blno::sample_columns(op, 1, ColumnSampling::kDiagonalSquared, rng);
    if (s.indices[0] == 0) ++hits;
  }
  const double p0 = 10000.0 / 10003.0;
  const double sigma = std::sqrt(trials * p0 * (1.0 - p0));
  CHECK(std::abs(hits - trials * p0) <= 3.0 * sigma);
}

TEST_CASE("uniform sampling without replacement is unbiased") {
  Rng rng(31);
  const MatrixXd h = MatrixXd::Identity(4, 4);
  DenseOperator op(h);
  const int trials = 100000;
  std::vector<int> counts(4, 0);
  for (int t = 0; t < trials; ++t) {
    const NystromSketch s =
        blno::sample_columns(op, 2, ColumnSampling::kUniform, rng);
    CHECK(s.indices[0] != s.indices[1]);
    for (const auto idx : s.indices) ++counts[idx];
  }
  const double expect = trials * 0.5;
  const double sigma = std::sqrt(trials * 0.5 * 0.5);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(counts[i] - expect) <= 3.0 * sigma);
  }
}

TEST_CASE("all-zero diagonal falls back to uniform with a flag") {
  MatrixXd h = MatrixXd::Zero(6, 6);
  h(0, 1) = h(1, 0) = 1.0;  // zero diagonal, nonzero matrix
  DenseOperator op(h);
  Rng rng(8);
  const NystromSketch s =
      blno::sample_columns(op, 3, ColumnSampling::kDiagonalSquared, rng);
  CHECK(s.uniform_fallback);
  CHECK(s.rank() == 3);
}

TEST_CASE("nystrom_ihvp identity and empty-sketch cases") {
  Rng rng(9);
  DenseOperator eye(MatrixXd::Identity(4, 4));
  const NystromSketch full =
      blno::sample_columns(eye, 4, ColumnSampling::kUniform, rng);
  VectorXd b(4);
  b << 1, -2, 3, 0.5;
  const auto report = blno::nystrom_ihvp(full, 1.0, b);
  CHECK((report.solution - b / 2.0).norm() <= 1e-12);

  const NystromSketch empty =
      blno::sample_columns(eye, 0, ColumnSampling::kUniform, rng);
  const auto report0 = blno::nystrom_ihvp(empty, 2.0, b);
  CHECK((report0.solution - b / 2.0).norm() == 0.0);
}

TEST_CASE("nystrom recovers the exact IHVP at the true rank") {
  Rng rng(10);
  const int p = 16;
  const MatrixXd h = random_psd(p, 3, rng);
  DenseOperator op(h);
  // Three columns spanning the range: pick greedily by residual energy.
  const auto eig = blno::sym_eig(h);
  std::vector<Eigen::Index> idx;
  for (int want = 0; want < 3; ++want) {
    Eigen::Index best = 0;
    double best_norm = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::find(idx.begin(), idx.end(), j) != idx.end()) continue;
      std::vector<Eigen::Index> trial = idx;
      trial.push_back(j);
      const NystromSketch s = blno::make_sketch(op, trial);
      const double gain = -sketch_error(h, s);
      if (gain > best_norm) {
        best_norm = gain;
        best = j;
      }
    }
    idx.push_back(best);
  }
  const NystromSketch s = blno::make_sketch(op, idx);
  const VectorXd b = random_vector(p, rng);
  const double rho = 0.1;
  const auto report = blno::nystrom_ihvp(s, rho, b);
  const VectorXd truth = blno::exact_ihvp(op, rho, b);
  CHECK((report.solution - truth).norm() <= 1e-8 * b.norm());
}

TEST_CASE("Woodbury identity at q = p against the dense oracle") {
  Rng rng(11);
  for (const double rho : {0.01, 1.0, 50.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const int p = 4 + rng.uniform_int(61);
      const MatrixXd h = random_psd(p, std::max(1, p / 2), rng);
      DenseOperator op(h);
      const NystromSketch s =
          blno::sample_columns(op, p, ColumnSampling::kUniform, rng);
      const VectorXd b = random_vector(p, rng);
      const auto report = blno::nystrom_ihvp(s, rho, b);
      const VectorXd truth = blno::exact_ihvp(op, rho, b);
      CHECK((report.solution - truth).norm() <= 1e-8 * b.norm());
    }
  }
}

TEST_CASE("operator bound holds for arbitrary sketches") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 8 + rng.uniform_int(25);
    const int q = 1 + rng.uniform_int(p);
    const MatrixXd h = random_psd(p, std::max(1, p / 3), rng);
    DenseOperator op(h);
    Rng srng = rng.substream(trial);
    const NystromSketch s = blno::sample_columns(
        op, q,
        trial % 2 ? ColumnSampling::kUniform : ColumnSampling::kDiagonalSquared,
        srng);
    const VectorXd b = random_vector(p, rng);
    const double rho = std::pow(10.0, rng.uniform(-2.0, 2.0));
    const auto report = blno::nystrom_ihvp(s, rho, b);
    CHECK(report.solution.norm() <= b.norm() / rho * (1.0 + 1e-9));
  }
}

TEST_CASE("nested column sets do not degrade the sketch") {
  Rng rng(13);
  for (int trial = 0; trial < 8; ++trial) {
    const int p = 32;
    const MatrixXd h = random_psd(p, 8 + rng.uniform_int(8), rng);
    DenseOperator op(h);
    std::vector<Eigen::Index> pool = all_indices(p);
    for (int i = p - 1; i > 0; --i) {
      std::swap(pool[i], pool[rng.uniform_int(i + 1)]);
    }
    const int q_small = 3 + rng.uniform_int(6);
    const int q_big = q_small + 1 + rng.uniform_int(6);
    const NystromSketch small = blno::make_sketch(
        op, {pool.begin(), pool.begin() + q_small});
    const NystromSketch big =
        blno::make_sketch(op, {pool.begin(), pool.begin() + q_big});
    CHECK(sketch_error(h, big) <= sketch_error(h, small) + 1e-8);
  }
}

TEST_CASE("cg solves the identity in one iteration") {
  DenseOperator eye(MatrixXd::Identity(6, 6));
  Rng rng(14);
  const VectorXd b = random_vector(6, rng);
  const auto report = blno::cg_ihvp(eye, b, 0.0, 50, 1e-10);
  CHECK(report.iterations == 1);
  CHECK((report.solution - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("cg finite termination on SPD systems") {
  // Finite termination is an exact-arithmetic property; keep the spectrum
  // moderate so floating point tracks it.
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const int p = trial == 0 ? 8 : 3 + rng.uniform_int(30);
    const MatrixXd h =
        random_psd(p, p, rng) / p + MatrixXd::Identity(p, p);
    DenseOperator op(h);
    const VectorXd b = random_vector(p, rng);
    const auto report = blno::cg_ihvp(op, b, 0.0, p + 2, 1e-10);
    CHECK(report.residual_norm <= 1e-8 * b.norm());
    CHECK(report.iterations <= p + 2);
    CHECK_FALSE(report.diverged);
  }
}

TEST_CASE("cg on an indefinite system stays finite") {
  Rng rng(16);
  const int p = 24;
  MatrixXd h = random_psd(p, p, rng);
  h -= (blno::sym_eig(h).eigenvalues[p / 3]) * MatrixXd::Identity(p, p);
  DenseOperator op(h);
  const VectorXd b = random_vector(p, rng);
  const auto report = blno::cg_ihvp(op, b, 0.0, 60, 1e-12);
  CHECK(report.solution.allFinite());
}

TEST_CASE("pcg with the exact preconditioner converges immediately") {
  Rng rng(17);
  DenseOperator eye(MatrixXd::Identity(8, 8));
  const NystromSketch s =
      blno::sample_columns(eye, 8, ColumnSampling::kUniform, rng);
  const VectorXd b = random_vector(8, rng);

  // Preconditioning the identity with rho shrinks it by a constant, so one
  // iteration lands exactly.
  const auto report = blno::nystrom_pcg(eye, b, s, 1.0, 20, 1e-10);
  CHECK(report.iterations == 1);
  CHECK(report.residual_norm <= 1e-10 * b.norm());

  // Operator equal to H_r + rho I with a full-rank sketch of H_r: the
  // preconditioner is its exact inverse.
  const MatrixXd hr = random_psd(8, 3, rng);
  DenseOperator hr_op(hr);
  const NystromSketch hr_sketch =
      blno::sample_columns(hr_op, 8, ColumnSampling::kUniform, rng);
  const double rho = 0.5;
  MatrixXd shifted = hr;
  shifted.diagonal().array() += rho;
  DenseOperator shifted_op(shifted);
  const auto report2 =
      blno::nystrom_pcg(shifted_op, b, hr_sketch, rho, 20, 1e-10);
  CHECK(report2.iterations <= 2);
  CHECK(report2.residual_norm <= 1e-10 * b.norm());
}

TEST_CASE("pcg beats plain cg on an ill-conditioned diagonal") {
  const int p = 64;
  VectorXd diag(p);
  for (int i = 0; i < p; ++i) {
    diag[i] = std::pow(10.0, 6.0 * (p - 1 - i) / (p - 1));  // 1e6 .. 1
  }
  DenseOperator op(MatrixXd(diag.asDiagonal()));
  std::vector<Eigen::Index> top10 = all_indices(10);
  const NystromSketch s = blno::make_sketch(op, top10);
  Rng rng(18);
  const VectorXd b = random_vector(p, rng);
  const double tol = 1e-8;
  const auto plain = blno::cg_ihvp(op, b, 0.0, 500, tol);
  const auto pre = blno::nystrom_pcg(op, b, s, 1.0, 500, tol);
  CHECK(pre.residual_norm <= tol * b.norm());
  CHECK(pre.iterations < plain.iterations);
}

TEST_CASE("exact_ihvp closed forms") {
  DenseOperator zero(MatrixXd::Zero(2, 2));
  VectorXd b(2);
  b << 4, 6;
  const VectorXd x = blno::exact_ihvp(zero, 2.0, b);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(x[1] == doctest::Approx(3.0));

  MatrixXd d = MatrixXd::Zero(2, 2);
  d.diagonal() << 1, 3;
  DenseOperator op(d);
  VectorXd b2(2);
  b2 << 2, 8;
  const VectorXd x2 = blno::exact_ihvp(op, 1.0, b2);
  CHECK(x2[0] == doctest::Approx(1.0));
  CHECK(x2[1] == doctest::Approx(2.0));

  Rng rng(19);
  const MatrixXd h = random_psd(32, 32, rng);
  DenseOperator big(h);
  const VectorXd b3 = random_vector(32, rng);
  const VectorXd x3 = blno::exact_ihvp(big, 0.5, b3);
  MatrixXd shifted = h;
  shifted.diagonal().array() += 0.5;
  CHECK((shifted * x3 - b3).norm() <= 1e-9 * (1.0 + b3.norm()));
}

TEST_CASE("nystrom error bound formula") {
  CHECK(blno::nystrom_error_bound(1.0, 1.0, 0.0, 0.0, 3, 2.0) == 0.0);
  CHECK(blno::nystrom_error_bound(1.0, 1e9, 1.0, 0.0, 3, 2.0) <= 1e-6);
  CHECK(blno::nystrom_error_bound(1.0, 1.0, 1.0, 0.0, 3, 2.0) ==
        doctest::Approx(0.5));
  // Monotone decreasing in rho.
  double prev = 1e300;
  for (const double rho : {0.1, 1.0, 10.0, 100.0}) {
    const double psi = blno::nystrom_error_bound(2.0, rho, 0.7, 0.01, 5, 3.0);
    CHECK(psi < prev);
    CHECK(psi < 2.0 / rho);
    prev = psi;
  }
}

TEST_CASE("nystrom and pcg agree with the oracle on well-conditioned systems") {
  Rng rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    const int p = 16 + rng.uniform_int(17);
    MatrixXd h = random_psd(p, p, rng);
    // condition the spectrum into [1, ~1e3]
    const auto eig = blno::sym_eig(h);
    h += (eig.eigenvalues[0] / 1000.0) * MatrixXd::Identity(p, p);
    DenseOperator op(h);
    const VectorXd b = random_vector(p, rng);
    const double tol = 1e-10;
    const auto cg = blno::cg_ihvp(op, b, 0.0, 10 * p, tol);
    const NystromSketch s =
        blno::sample_columns(op, p / 2, ColumnSampling::kDiagonalSquared, rng);
    const auto pcg = blno::nystrom_pcg(op, b, s, 1.0, 10 * p, tol);
    const VectorXd truth = blno::exact_ihvp(op, 0.0, b);
    CHECK((cg.solution - truth).norm() <= 1e-7 * (1.0 + truth.norm()));
    CHECK((pcg.solution - truth).norm() <= 1e-7 * (1.0 + truth.norm()));
  }
}
