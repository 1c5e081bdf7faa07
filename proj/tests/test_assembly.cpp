#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "taperom/assembly.hpp"

using namespace taperom;

namespace {

Mesh strip(int nx, int nz, double len = 0.02, double wid = 0.01) {
  TapeSpec s;
  s.length = len;
  s.width = wid;
  s.nx = nx;
  s.nz = nz;
  return generate_tape_mesh(s);
}

MaterialParams hts() {
  MaterialParams p;
  p.E_c = 1e-4;
  p.K_c = 23600.0;
  p.n_exp = 25.0;
  p.eta_floor = 1e-14;
  return p;
}

ExcitationSpec exc(double b0 = 0.02, double f = 50.0) {
  ExcitationSpec e;
  e.B0 = b0;
  e.freq = f;
  return e;
}

FomOperators ops_for(const Mesh& m, MaterialParams mat = hts(),
                     ExcitationSpec e = exc()) {
  return assemble_operators(m, mat, e);
}

Vec random_state(int n, double scale, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("single-edge inductance matches the subdivision oracle") {
  Mesh m = strip(1, 1, 1.0, 1.0);
  Mat L = assemble_inductance(m);
  Mat Lo = oracles::inductance(m, 5);
  double rel = std::abs(L(0, 0) - Lo(0, 0)) / std::abs(Lo(0, 0));
  INFO("impl ", L(0, 0), " oracle ", Lo(0, 0), " rel ", rel);
  CHECK(rel < 0.005);
  // oracle self-consistency: one level deeper moves it by < 0.1%
  Mat Lo6 = oracles::inductance(m, 6);
  CHECK(std::abs(Lo6(0, 0) - Lo(0, 0)) / std::abs(Lo(0, 0)) < 1e-3);
}

TEST_CASE("small-mesh inductance matches the subdivision oracle entrywise") {
  Mesh m = strip(2, 2);
  Mat L = assemble_inductance(m);
  Mat Lo = oracles::inductance(m, 4);
  CHECK((L - Lo).norm() / Lo.norm() < 0.005);
}

TEST_CASE("inductance is symmetric and positive definite") {
  Mesh m = strip(2, 4);
  Mat L = assemble_inductance(m);
  CHECK((L - L.transpose()).norm() / L.norm() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> eig(L);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("self coupling dominates each row") {
  Mesh m = strip(2, 4);
  Mat L = assemble_inductance(m);
  for (int r = 0; r < L.rows(); ++r) {
    double offmax = 0.0;
    for (int c = 0; c < L.cols(); ++c)
      if (c != r) offmax = std::max(offmax, std::abs(L(r, c)));
    CHECK(L(r, r) > offmax);
  }
}

TEST_CASE("inductance scales linearly with geometry") {
  Mesh m = strip(2, 2);
  Mesh doubled = m;
  for (Vec3& v : doubled.vertices) v *= 2.0;
  doubled.finalize();
  Mat L1 = assemble_inductance(m);
  Mat L2 = assemble_inductance(doubled);
  CHECK((L2 - 2.0 * L1).norm() / L1.norm() < 1e-10);
}

TEST_CASE("unsupported quadrature order is a config error") {
  QuadratureConfig q;
  q.far_order = 5;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = QuadratureConfig{};
  q.duffy_order = 1;
  CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("deterministic accumulation regardless of worker count") {
  Mesh m = strip(2, 4);
  setenv("TAPEROM_THREADS", "1", 1);
  Mat L1 = assemble_inductance(m);
  setenv("TAPEROM_THREADS", "4", 1);
  Mat L4 = assemble_inductance(m);
  unsetenv("TAPEROM_THREADS");
  CHECK((L1 - L4).norm() == 0.0);
}

TEST_CASE("zero-current resistance is the floor times the Gram matrix") {
  Mesh m = strip(2, 2);
  FomOperators ops = ops_for(m);
  Mat r0 = assemble_resistance(ops, Vec::Zero(ops.n_e()));

  MaterialParams unit = hts();
  unit.eta_floor = 1.0;
  unit.E_c = 1e-300;  // suppress the power-law part
  FomOperators gops = ops_for(m, unit);
  Mat gram = assemble_resistance(gops, Vec::Zero(ops.n_e()));
  CHECK((r0 - hts().eta_floor * gram).norm() <= 1e-25 * gram.norm());
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-14 * gram.norm());
}

TEST_CASE("linear material gives a current-independent resistance") {
  Mesh m = strip(2, 2);
  MaterialParams lin = hts();
  lin.n_exp = 1.0;
  FomOperators ops = ops_for(m, lin);
  Mat ra = assemble_resistance(ops, Vec::Zero(ops.n_e()));
  Mat rb = assemble_resistance(ops, random_state(ops.n_e(), 30.0, 5));
  CHECK((ra - rb).norm() == 0.0);
}

TEST_CASE("resistance stays symmetric positive semidefinite") {
  Mesh m = strip(2, 2);
  FomOperators ops = ops_for(m);
  for (unsigned seed : {1u, 2u, 3u}) {
    Mat r = assemble_resistance(ops, random_state(ops.n_e(), 50.0, seed));
    CHECK((r - r.transpose()).norm() <= 1e-14 * r.norm());
    Eigen::SelfAdjointEigenSolver<Mat> eig(r);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-14 * r.norm());
  }
}

TEST_CASE("resistance couples only edges sharing a triangle") {
  Mesh m = strip(2, 4);
  FomOperators ops = ops_for(m);
  Mat r = assemble_resistance(ops, random_state(ops.n_e(), 50.0, 9));
  for (int a = 0; a < ops.n_e(); ++a)
    for (int b = 0; b < ops.n_e(); ++b) {
      bool share = false;
      for (const ElementTable& e : ops.elements) {
        bool has_a = false, has_b = false;
        for (int d : e.dofs) {
          has_a |= d == a;
          has_b |= d == b;
        }
        share |= has_a && has_b;
      }
      if (!share) CHECK(r(a, b) == 0.0);
    }
}

TEST_CASE("nonlinear Jacobian trivial cases") {
  Mesh m = strip(2, 2);
  MaterialParams lin = hts();
  lin.n_exp = 1.0;
  FomOperators lops = ops_for(m, lin);
  Vec i = random_state(lops.n_e(), 20.0, 3);
  CHECK((assemble_nl_jacobian(lops, i) - assemble_resistance(lops, i)).norm() == 0.0);

  FomOperators ops = ops_for(m);
  Vec zero = Vec::Zero(ops.n_e());
  CHECK((assemble_nl_jacobian(ops, zero) - assemble_resistance(ops, zero)).norm() == 0.0);
}

TEST_CASE("nonlinear Jacobian matches finite differences") {
  Mesh m = strip(2, 4);
  FomOperators ops = ops_for(m);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    // scale the state so element currents sit in the strongly nonlinear range
    Vec i = random_state(ops.n_e(), 1.0, 100 + trial);
    double kmax = 0.0;
    for (const ElementTable& e : ops.elements)
      kmax = std::max(kmax, element_current(e, i).norm());
    i *= u(rng) * hts().K_c / kmax;

    Mat jac = assemble_nl_jacobian(ops, i);
    Mat fd(ops.n_e(), ops.n_e());
    double h = 1e-6 * i.norm();
    for (int c = 0; c < ops.n_e(); ++c) {
      Vec ip = i, im = i;
      ip[c] += h;
      im[c] -= h;
      fd.col(c) = (nonlinearity(ops, ip) - nonlinearity(ops, im)) / (2.0 * h);
    }
    CHECK((jac - fd).norm() / fd.norm() < 1e-5);
  }
}

TEST_CASE("source vanishes at a quarter period") {
  Mesh m = strip(2, 2);
  FomOperators ops = ops_for(m);
  ExcitationSpec e = exc(0.02, 50.0);
  Vec es = assemble_source(ops, e, 1.0 / (4.0 * e.freq));
  CHECK(es.norm() <= 1e-12 * assemble_source(ops, e, 0.0).norm());
}

TEST_CASE("zero amplitude gives a zero source") {
  Mesh m = strip(2, 2);
  FomOperators ops = ops_for(m);
  CHECK(assemble_source(ops, exc(0.0), 0.01).norm() == 0.0);
}

TEST_CASE("source amplitude scaling is exact") {
  Mesh m = strip(2, 2);
  FomOperators ops = ops_for(m);
  Vec a = assemble_source(ops, exc(0.02), 0.003);
  Vec b = assemble_source(ops, exc(0.04), 0.003);
  CHECK((b - 2.0 * a).norm() == 0.0);
}

TEST_CASE("field slope at t=0 for the 20 mT 50 Hz case") {
  ExcitationSpec e = exc(0.02, 50.0);
  CHECK(b_dot(e, 0.0) == doctest::Approx(6.2832).epsilon(1e-4));
  Mesh m = strip(2, 2);
  FomOperators ops = ops_for(m);
  Vec es = assemble_source(ops, e, 0.0);
  CHECK((es - b_dot(e, 0.0) * ops.source_geom).norm() == 0.0);
}
