#include <doctest.h>

#include <random>

#include "taperom/pod.hpp"

using namespace taperom;

namespace {

Mat random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = nd(rng);
  return m;
}

Mat random_orthonormal(int rows, int cols, unsigned seed) {
  Mat m = random_matrix(rows, cols, seed);
  Eigen::HouseholderQR<Mat> qr(m);
  return Mat(qr.householderQ()).leftCols(cols);
}

FomOperators desk_ops() {
  TapeSpec s;
  s.length = 0.02;
  s.width = 0.01;
  s.nx = 2;
  s.nz = 4;
  MaterialParams p;
  p.E_c = 1e-4;
  p.K_c = 23600.0;
  p.n_exp = 25.0;
  p.eta_floor = 1e-14;
  ExcitationSpec e;
  e.B0 = 0.02;
  e.freq = 50.0;
  return assemble_operators(generate_tape_mesh(s), p, e);
}

}  // namespace

TEST_CASE("rank-1 snapshots truncate to one mode with full retention") {
  Vec u = Vec::LinSpaced(12, 1.0, 3.0);
  Mat x = u * Eigen::RowVectorXd::Ones(7);
  PodTarget t;
  t.target = 0.9;
  PodResult r = pod_truncate(x, t);
  CHECK(r.V.cols() == 1);
  CHECK(r.eps == doctest::Approx(1.0));
}

TEST_CASE("retained ratio uses the printed sum of singular values") {
  Vec sv(2);
  sv << 3.0, 1.0;
  CHECK(retained_ratio(sv, 1, EnergyCriterion::SumSigma) == doctest::Approx(0.75));
  CHECK(retained_ratio(sv, 1, EnergyCriterion::SumSigmaSquared) == doctest::Approx(0.9));
  CHECK(retained_ratio(sv, 2, EnergyCriterion::SumSigma) == doctest::Approx(1.0));
}

TEST_CASE("exact-rank recovery of a synthetic rank-3 matrix") {
  Mat x = random_matrix(50, 3, 1) * random_matrix(3, 40, 2);
  PodTarget t;
  t.rank = 3;
  PodResult r = pod_truncate(x, t);
  CHECK((x - r.V * (r.V.transpose() * x)).norm() / x.norm() <= 1e-12);
}

TEST_CASE("ratio targets select the smallest adequate rank and are monotone") {
  Mat x = random_matrix(30, 3, 3) * random_matrix(3, 25, 4) +
          1e-3 * random_matrix(30, 1, 5) * random_matrix(1, 25, 6);
  PodTarget by_target;
  by_target.target = 0.99;
  PodResult r = pod_truncate(x, by_target);
  for (int k = 1; k < r.V.cols(); ++k)
    CHECK(retained_ratio(r.sv, k, EnergyCriterion::SumSigma) < 0.99);
  CHECK(retained_ratio(r.sv, r.V.cols(), EnergyCriterion::SumSigma) >= 0.99);

  double prev = 0.0;
  for (int k = 1; k <= r.sv.size(); ++k) {
    double eps = retained_ratio(r.sv, k, EnergyCriterion::SumSigma);
    CHECK(eps >= prev);
    prev = eps;
  }
  CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("invalid truncation requests are config errors") {
  Mat x = random_matrix(10, 5, 7);
  PodTarget t;
  t.target = 1.5;
  CHECK_THROWS_AS(pod_truncate(x, t), ConfigError);
  t.target.reset();
  t.rank = 6;
  CHECK_THROWS_AS(pod_truncate(x, t), ConfigError);
  CHECK_THROWS_AS(pod_truncate(Mat(0, 0), PodTarget{}), ConfigError);
}

TEST_CASE("identity projection reproduces the full-order step") {
  FomOperators ops = desk_ops();
  PodBasis basis;
  basis.V_i = Mat::Identity(ops.n_e(), ops.n_e());
  basis.V_phi = Mat::Identity(ops.n_f(), ops.n_f());
  basis.sv_i = Vec::Ones(ops.n_e());
  basis.sv_phi = Vec::Ones(ops.n_f());
  RomOperators rom = project_operators(ops, basis);

  ExcitationSpec e = ops.excitation;
  SolverConfig cfg;
  cfg.dt = 1e-4;
  cfg.newton_tol = 1e-13;

  // Reduced Galerkin step with the identity basis vs the full Newton step.
  // The reduced system has no gauge pinning, so kill the constant-potential
  // null direction by comparing currents only.
  RomState rprev{Vec::Zero(ops.n_e()), Vec::Zero(ops.n_f())};
  FomState fprev{Vec::Zero(ops.n_e()), Vec::Zero(ops.n_f())};
  FomState fnext = newton_step(ops, fprev, cfg.dt, e, cfg);

  // G has a one-dimensional left null space; the unpinned reduced saddle
  // system is singular, so drop one potential DOF via a reduced basis that
  // spans the pinned-gauge subspace.
  Mat vphi = Mat::Zero(ops.n_f(), ops.n_f() - 1);
  for (int c = 1; c < ops.n_f(); ++c) vphi(c, c - 1) = 1.0;  // phi_0 pinned to 0
  basis.V_phi = vphi;
  rom = project_operators(ops, basis);
  rprev.phi_r = Vec::Zero(ops.n_f() - 1);
  RomState rnext = pod_galerkin_step_newton(rom, ops, rprev, cfg.dt, e, cfg);
  CHECK((rnext.i_r - fnext.i).norm() <= 1e-10 * (1.0 + fnext.i.norm()));
}

TEST_CASE("projected operators keep symmetry and definiteness") {
  FomOperators ops = desk_ops();
  Mat vi = random_orthonormal(ops.n_e(), 5, 11);
  Mat vp = random_orthonormal(ops.n_f(), 3, 12);
  PodBasis basis{vi, vp, Vec::Ones(5), Vec::Ones(3), 1.0, 1.0};
  RomOperators rom = project_operators(ops, basis);
  CHECK((rom.L_r - rom.L_r.transpose()).norm() <= 1e-12 * rom.L_r.norm());
  Eigen::SelfAdjointEigenSolver<Mat> eig(rom.L_r);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("reduced incidence is the projected incidence") {
  FomOperators ops = desk_ops();
  Mat vi = random_orthonormal(ops.n_e(), 6, 21);
  Mat vp = random_orthonormal(ops.n_f(), 4, 22);
  PodBasis basis{vi, vp, Vec::Ones(6), Vec::Ones(4), 1.0, 1.0};
  RomOperators rom = project_operators(ops, basis);
  std::mt19937 rng(23);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec i(ops.n_e());
    for (int k = 0; k < i.size(); ++k) i[k] = nd(rng);
    Vec lhs = rom.G_r * (vi.transpose() * i);
    Vec rhs = vp.transpose() * (ops.G * Mat(vi * (vi.transpose() * i)));
    CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("restrict and lift behave as orthogonal projection") {
  Mat v = random_orthonormal(20, 4, 31);
  Mat x_in = v * random_matrix(4, 1, 32);
  Vec x = x_in.col(0);
  CHECK((lift_state(v, restrict_state(v, x)) - x).norm() <= 1e-12 * x.norm());

  // a vector orthogonal to the span restricts to zero
  Vec y = random_matrix(20, 1, 33).col(0);
  y -= v * (v.transpose() * y);
  CHECK(restrict_state(v, y).norm() <= 1e-12 * y.norm());

  Vec xr = random_matrix(4, 1, 34).col(0);
  CHECK((restrict_state(v, lift_state(v, xr)) - xr).norm() <= 1e-12 * xr.norm());

  CHECK_THROWS_AS(restrict_state(v, Vec::Zero(7)), ConfigError);
  CHECK_THROWS_AS(lift_state(v, Vec::Zero(7)), ConfigError);
}

TEST_CASE("snapshot projection error is bounded by the discarded tail") {
  Mat x = random_matrix(40, 2, 41) * random_matrix(2, 30, 42) +
          0.05 * random_matrix(40, 30, 43);
  PodTarget t;
  t.rank = 6;
  PodResult r = pod_truncate(x, t);
  double tail = 0.0;
  for (int k = 6; k < r.sv.size(); ++k) tail = std::max(tail, r.sv[k]);
  for (int c = 0; c < x.cols(); ++c) {
    Vec col = x.col(c);
    double err = (col - r.V * (r.V.transpose() * col)).norm();
    CHECK(err <= tail * (1.0 + 1e-12));  // column error below the operator bound
  }
}

TEST_CASE("basis sign convention is deterministic") {
  Mat x = random_matrix(25, 10, 55);
  PodTarget t;
  t.rank = 5;
  PodResult a = pod_truncate(x, t);
  PodResult b = pod_truncate(x, t);
  CHECK((a.V - b.V).norm() == 0.0);
  for (int c = 0; c < a.V.cols(); ++c) {
    int idx = 0;
    a.V.col(c).cwiseAbs().maxCoeff(&idx);
    CHECK(a.V(idx, c) > 0.0);
  }
}
