#include <doctest.h>

#include <algorithm>
#include <random>

#include "taperom/analysis.hpp"

using namespace taperom;

namespace {

FomOperators desk_ops(int nx = 2, int nz = 4) {
  TapeSpec s;
  s.length = 0.02;
  s.width = 0.01;
  s.nx = nx;
  s.nz = nz;
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

Mat random_matrix(int rows, int cols, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("zero currents dissipate nothing") {
  FomOperators ops = desk_ops();
  Vec p = ac_losses(ops, Mat::Zero(ops.n_e(), 6));
  CHECK(p.norm() == 0.0);
}

TEST_CASE("single-element loss closed form") {
  FomOperators ops = desk_ops();
  // drive one edge so exactly its two adjacent elements carry current,
  // then check against the definition evaluated by hand
  Vec i = Vec::Zero(ops.n_e());
  i[0] = 7.0;
  Vec p = ac_losses(ops, Mat(i));
  double expected = 0.0;
  for (const ElementTable& e : ops.elements) {
    double kn = element_current(e, i).norm();
    expected += sheet_resistivity(ops.material, kn) * kn * kn * e.area;
  }
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
  CHECK(p[0] > 0.0);

  // uniform-density sanity bound: a single element at K = K_c dissipates
  // (E_c/K_c + floor) K_c^2 area
  const ElementTable& e0 = ops.elements[0];
  double kc = ops.material.K_c;
  double closed = (ops.material.E_c / kc + ops.material.eta_floor) * kc * kc * e0.area;
  CHECK(closed == doctest::Approx(sheet_resistivity(ops.material, kc) * kc * kc * e0.area));
}

TEST_CASE("losses match the per-triangle quadrature oracle and stay nonnegative") {
  FomOperators ops = desk_ops();
  Mat currents = random_matrix(ops.n_e(), 9, 33, 15.0);
  Vec p = ac_losses(ops, currents);
  for (int k = 0; k < currents.cols(); ++k) {
    double acc = 0.0;
    for (int t = 0; t < ops.n_f(); ++t) {
      const ElementTable& e = ops.elements[t];
      Vec3 kv = Vec3::Zero();
      for (size_t c = 0; c < e.dofs.size(); ++c)
        kv += currents(e.dofs[c], k) * e.w_centroid.col(c);
      acc += sheet_resistivity(ops.material, kv.norm()) * kv.squaredNorm() * e.area;
    }
    CHECK(p[k] == doctest::Approx(acc).epsilon(1e-12));
    CHECK(p[k] >= 0.0);
  }
}

TEST_CASE("identical trajectories report zero errors") {
  FomOperators ops = desk_ops();
  Mat a = random_matrix(ops.n_e(), 5, 44, 10.0);
  ErrorReport rep = error_stats(ops, a, a);
  CHECK(rep.mean == 0.0);
  CHECK(rep.p95 == 0.0);
  CHECK(rep.max == 0.0);
}

TEST_CASE("a uniform density offset is reported exactly") {
  FomOperators ops = desk_ops();
  // shifting every element current by the same vector is not expressible in
  // edge DOFs, so instead verify with a single-edge bump whose element
  // errors are computable directly
  Mat fom = random_matrix(ops.n_e(), 3, 55, 5.0);
  Mat rom = fom;
  rom.row(2).array() += 1.0;
  ErrorReport rep = error_stats(ops, rom, fom);
  Vec expected = element_current_errors(ops, rom.col(0), fom.col(0));
  CHECK(rep.step_max[0] == doctest::Approx(expected.maxCoeff()));
  CHECK(rep.step_mean[0] == doctest::Approx(expected.mean()));
}

TEST_CASE("statistics match a sort-based oracle and stay ordered") {
  FomOperators ops = desk_ops();
  Mat fom = random_matrix(ops.n_e(), 5, 66, 8.0);
  Mat rom = fom + random_matrix(ops.n_e(), 5, 67, 0.5);
  ErrorReport rep = error_stats(ops, rom, fom);

  std::vector<double> all;
  for (int k = 0; k < 5; ++k) {
    Vec err = element_current_errors(ops, rom.col(k), fom.col(k));
    std::vector<double> vals(err.data(), err.data() + err.size());
    std::sort(vals.begin(), vals.end());
    size_t rank = static_cast<size_t>(std::ceil(0.95 * vals.size()));
    CHECK(rep.step_p95[k] == doctest::Approx(vals[rank - 1]));
    all.insert(all.end(), vals.begin(), vals.end());
  }
  std::sort(all.begin(), all.end());
  size_t rank = static_cast<size_t>(std::ceil(0.95 * all.size()));
  CHECK(rep.p95 == doctest::Approx(all[rank - 1]));
  CHECK(rep.mean <= rep.p95);
  CHECK(rep.p95 <= rep.max);
  for (int k = 0; k < 5; ++k) {
    CHECK(rep.step_mean[k] <= rep.step_p95[k] + 1e-15);
    CHECK(rep.step_p95[k] <= rep.step_max[k] + 1e-15);
  }
}

TEST_CASE("grid mismatch is rejected") {
  FomOperators ops = desk_ops();
  Mat a = random_matrix(ops.n_e(), 4, 77);
  Mat b = random_matrix(ops.n_e(), 5, 78);
  CHECK_THROWS_AS(error_stats(ops, a, b), ConfigError);
}

TEST_CASE("hand-counted flops for the smallest learned model") {
  NodeDims d;
  d.r_i = 1;
  d.r_phi = 0;
  d.hidden = {1};
  d.mode = OutputMode::Full;
  FlopReport rep = flop_count_node(d);
  // network: 3 (normalize) + 2*1*1 + 1 (hidden) + 2*1*1 (output) + 1 (scale)
  CHECK(rep.phase("network") == 3 + 2 + 1 + 2 + 1);
  // assembly: 2*1 (A) + 2*1 (L_r i) + 2*1 + 5 (source)
  CHECK(rep.phase("assembly") == 2 + 2 + 2 + 5);
  // solve: (2/3) + 2
  CHECK(rep.phase("solve") == doctest::Approx(2.0 / 3.0 + 2.0));
  CHECK(rep.total == doctest::Approx(rep.phase("network") + rep.phase("assembly") +
                                     rep.phase("solve")));
}

TEST_CASE("solve phase scales cubically with the reduced rank") {
  NodeDims d;
  d.r_i = 10;
  d.r_phi = 0;
  d.hidden = {20};
  FlopReport small = flop_count_node(d);
  d.r_i = 20;
  FlopReport big = flop_count_node(d);
  double ratio = big.phase("solve") / small.phase("solve");
  CHECK(ratio > 6.5);
  CHECK(ratio < 8.5);
}

TEST_CASE("deim flop model accumulates phases per iteration") {
  DeimDims d;
  d.r_i = 8;
  d.r_phi = 4;
  d.n_p = 15;
  d.support_dofs = 70;
  d.element_evals = 30;
  d.newton_iters = 4.0;
  FlopReport rep = flop_count_deim(d);
  CHECK(rep.total > 0.0);
  double sum = 0.0;
  for (const FlopPhase& p : rep.phases) {
    CHECK(p.count >= 0.0);
    sum += p.count;
  }
  CHECK(rep.total == doctest::Approx(sum));

  DeimDims d2 = d;
  d2.newton_iters = 8.0;
  FlopReport rep2 = flop_count_deim(d2);
  // everything except the once-per-step rhs doubles
  CHECK(rep2.total - rep.phase("rhs") ==
        doctest::Approx(2.0 * (rep.total - rep.phase("rhs"))));
}

TEST_CASE("full-scale reference dimensions produce finite counts") {
  NodeDims nd{48, 5, {140, 140, 140, 140}, OutputMode::Full};
  FlopReport fn = flop_count_node(nd);
  CHECK(fn.total > 2.57395e5);  // our count exceeds the published per-step figure
  DeimDims dd{48, 5, 150, 750, 300, 10.0};
  FlopReport fd = flop_count_deim(dd);
  CHECK(fd.total > fn.total);  // hyperreduction stays costlier at full scale
}

TEST_CASE("nearest-rank percentile is exact on small sets") {
  std::vector<double> v{5.0, 1.0, 4.0, 2.0, 3.0};
  CHECK(nearest_rank_percentile(v, 50.0) == 3.0);
  CHECK(nearest_rank_percentile(v, 95.0) == 5.0);
  CHECK(nearest_rank_percentile(v, 100.0) == 5.0);
  CHECK(nearest_rank_percentile({7.0}, 95.0) == 7.0);
  CHECK_THROWS_AS(nearest_rank_percentile({}, 95.0), ConfigError);
}
