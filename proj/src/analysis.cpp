#include "taperom/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace taperom {

Vec ac_losses(const FomOperators& ops, const Mat& currents) {
  Vec p = Vec::Zero(currents.cols());
  for (int k = 0; k < currents.cols(); ++k) {
    Vec i = currents.col(k);
    double acc = 0.0;
    for (const ElementTable& e : ops.elements) {
      double kn = element_current(e, i).norm();
      acc += sheet_resistivity(ops.material, kn) * kn * kn * e.area;
    }
    p[k] = acc;
  }
  return p;
}

Vec element_current_errors(const FomOperators& ops, const Vec& i_a, const Vec& i_b) {
  Vec err(ops.n_f());
  for (int t = 0; t < ops.n_f(); ++t) {
    const ElementTable& e = ops.elements[t];
    err[t] = (element_current(e, i_a) - element_current(e, i_b)).norm();
  }
  return err;
}

double nearest_rank_percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ConfigError("percentile of empty set");
  std::sort(values.begin(), values.end());
  size_t n = values.size();
  size_t rank = static_cast<size_t>(std::ceil(pct / 100.0 * n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

namespace {

ErrorReport stats_from_columns(const FomOperators& ops,
                               const std::vector<const Mat*>& rom,
                               const std::vector<const Mat*>& fom) {
  ErrorReport rep;
  std::vector<double> all;
  std::vector<double> step_mean, step_p95, step_max;
  for (size_t c = 0; c < rom.size(); ++c) {
    if (rom[c]->cols() != fom[c]->cols() || rom[c]->rows() != fom[c]->rows())
      throw ConfigError("error_stats: trajectory grids do not match");
    for (int k = 0; k < rom[c]->cols(); ++k) {
      Vec err = element_current_errors(ops, rom[c]->col(k), fom[c]->col(k));
      std::vector<double> vals(err.data(), err.data() + err.size());
      step_mean.push_back(err.mean());
      step_p95.push_back(nearest_rank_percentile(vals, 95.0));
      step_max.push_back(err.maxCoeff());
      all.insert(all.end(), vals.begin(), vals.end());
    }
  }
  rep.step_mean = Eigen::Map<Vec>(step_mean.data(), step_mean.size());
  rep.step_p95 = Eigen::Map<Vec>(step_p95.data(), step_p95.size());
  rep.step_max = Eigen::Map<Vec>(step_max.data(), step_max.size());
  rep.mean = std::accumulate(all.begin(), all.end(), 0.0) / all.size();
  rep.p95 = nearest_rank_percentile(all, 95.0);
  rep.max = *std::max_element(all.begin(), all.end());
  return rep;
}

}  // namespace

ErrorReport error_stats(const FomOperators& ops, const Mat& rom_lifted,
                        const Mat& fom_currents) {
  return stats_from_columns(ops, {&rom_lifted}, {&fom_currents});
}

ErrorReport error_stats_pooled(const FomOperators& ops,
                               const std::vector<const Mat*>& rom_lifted,
                               const std::vector<const Mat*>& fom_currents) {
  return stats_from_columns(ops, rom_lifted, fom_currents);
}

double FlopReport::phase(const std::string& name) const {
  for (const FlopPhase& p : phases)
    if (p.name == name) return p.count;
  return 0.0;
}

double lu_solve_flops(int s) { return (2.0 / 3.0) * s * s * s + 2.0 * s * s; }
double matvec_flops(int m, int n) { return 2.0 * m * n; }

FlopReport flop_count_node(const NodeDims& d) {
  FlopReport rep;
  rep.backend = "node";
  const int out = output_dim(d.mode, d.r_i);

  double net = 3.0 * d.r_i;  // abs, shift, scale per input component
  int in = d.r_i;
  for (int h : d.hidden) {
    net += matvec_flops(h, in) + h;  // affine + activations
    in = h;
  }
  net += matvec_flops(out, in);  // linear output layer
  // materialize the operator
  if (d.mode == OutputMode::Spd)
    net += d.r_i * d.r_i * (d.r_i + 1.0);  // lower-tri product
  net += d.r_i * d.r_i;  // output scale

  // A = dt R_psi + L_r (dt G_r blocks are constant per run); rhs = L_r i + dt e
  double assembly = 2.0 * d.r_i * d.r_i;                   // scale + add
  assembly += matvec_flops(d.r_i, d.r_i) + 2.0 * d.r_i + 5.0;  // rhs + source scaling

  double solve = lu_solve_flops(d.r_i + d.r_phi);

  rep.phases = {{"network", net}, {"assembly", assembly}, {"solve", solve}};
  rep.total = net + assembly + solve;
  return rep;
}

FlopReport flop_count_deim(const DeimDims& d) {
  FlopReport rep;
  rep.backend = "deim-newton";
  const int nloc = 3;  // interior-edge DOFs per element (upper bound per tape mesh)

  // once per step
  double rhs = matvec_flops(d.r_i, d.r_i) + 2.0 * d.r_i + 5.0;

  // per Newton iteration
  double lift = matvec_flops(d.support_dofs, d.r_i);
  double eta = d.element_evals * (6.0 * nloc + 15.0);  // K, |K|, eta, eta'
  double rows = d.element_evals * (2.0 * nloc + 1.0);  // selected f rows
  double jac_rows = d.element_evals * (3.0 * nloc + matvec_flops(nloc, d.r_i));
  double interp = matvec_flops(d.r_i, d.n_p);                    // Pi * f_sel
  double jac_proj = 2.0 * d.r_i * d.n_p * d.r_i;                 // Pi * (J_sel V)
  double residual = matvec_flops(d.r_i, d.r_i) + 3.0 * d.r_i +   // L_r (i - i_n)/dt
                    matvec_flops(d.r_phi, d.r_i);                // continuity rows
  double solve = lu_solve_flops(d.r_i + d.r_phi);

  double per_iter = lift + eta + rows + jac_rows + interp + jac_proj + residual + solve;
  rep.phases = {{"rhs", rhs},
                {"lift", d.newton_iters * lift},
                {"material", d.newton_iters * eta},
                {"rows", d.newton_iters * (rows + jac_rows)},
                {"interpolation", d.newton_iters * (interp + jac_proj)},
                {"residual", d.newton_iters * residual},
                {"solve", d.newton_iters * solve}};
  rep.total = rhs + d.newton_iters * per_iter;
  return rep;
}

}  // namespace taperom
