#include "taperom/pod.hpp"

#include <cmath>

#include <Eigen/SVD>

namespace taperom {

double retained_ratio(const Vec& sv, int rank, EnergyCriterion criterion) {
  double kept = 0.0, total = 0.0;
  for (int k = 0; k < sv.size(); ++k) {
    double s = criterion == EnergyCriterion::SumSigma ? sv[k] : sv[k] * sv[k];
    total += s;
    if (k < rank) kept += s;
  }
  return total > 0.0 ? kept / total : 1.0;
}

PodResult pod_truncate(const Mat& snapshots, const PodTarget& target) {
  if (snapshots.rows() == 0 || snapshots.cols() == 0)
    throw ConfigError("pod: snapshot matrix is empty");
  const int maxrank = static_cast<int>(std::min(snapshots.rows(), snapshots.cols()));
  if (target.rank && (*target.rank < 1 || *target.rank > maxrank))
    throw ConfigError("pod: rank " + std::to_string(*target.rank) +
                      " outside [1," + std::to_string(maxrank) + "]");
  if (!target.rank && target.target && *target.target > 1.0)
    throw ConfigError("pod: retained-ratio target must be <= 1");
  if (!target.rank && !target.target)
    throw ConfigError("pod: either a rank or a retained-ratio target is required");

  Eigen::JacobiSVD<Mat> svd(snapshots, Eigen::ComputeThinU);
  Vec sv = svd.singularValues();

  int r;
  if (target.rank) {
    r = *target.rank;
  } else {
    r = maxrank;
    for (int k = 1; k <= maxrank; ++k) {
      if (retained_ratio(sv, k, target.criterion) >= *target.target) {
        r = k;
        break;
      }
    }
  }

  Mat v = svd.matrixU().leftCols(r);
  // Deterministic sign convention: largest-magnitude entry positive.
  for (int c = 0; c < v.cols(); ++c) {
    int idx = 0;
    v.col(c).cwiseAbs().maxCoeff(&idx);
    if (v(idx, c) < 0.0) v.col(c) = -v.col(c);
  }
  return {v, sv, retained_ratio(sv, r, target.criterion)};
}

PodBasis build_pod(const Mat& current_snaps, const Mat& potential_snaps,
                   const PodTarget& target_i, const PodTarget& target_phi) {
  PodResult pi = pod_truncate(current_snaps, target_i);
  PodResult pp = pod_truncate(potential_snaps, target_phi);
  PodBasis b;
  b.V_i = pi.V;
  b.sv_i = pi.sv;
  b.eps_i = pi.eps;
  b.V_phi = pp.V;
  b.sv_phi = pp.sv;
  b.eps_phi = pp.eps;
  return b;
}

RomOperators project_operators(const FomOperators& fom, const PodBasis& basis) {
  if (basis.V_i.rows() != fom.n_e() || basis.V_phi.rows() != fom.n_f())
    throw ConfigError("project_operators: basis dimensions do not match the operators");
  RomOperators rom;
  Mat lr = basis.V_i.transpose() * fom.L * basis.V_i;
  rom.L_r = 0.5 * (lr + lr.transpose());
  rom.G_r = basis.V_phi.transpose() * (fom.G * basis.V_i);
  rom.source_geom_r = basis.V_i.transpose() * fom.source_geom;
  rom.basis = basis;
  return rom;
}

Vec restrict_state(const Mat& V, const Vec& x_full) {
  if (x_full.size() != V.rows()) throw ConfigError("restrict: dimension mismatch");
  return V.transpose() * x_full;
}

Vec lift_state(const Mat& V, const Vec& x_reduced) {
  if (x_reduced.size() != V.cols()) throw ConfigError("lift: dimension mismatch");
  return V * x_reduced;
}

namespace {

Vec reduced_residual(const RomOperators& rom, const FomOperators& fom,
                     const Vec& ir_prev, const Vec& ir, const Vec& phir,
                     const Vec& esr, double dt) {
  const int ri = rom.r_i(), rp = rom.r_phi();
  Vec f(ri + rp);
  Vec f_full = nonlinearity(fom, lift_state(rom.basis.V_i, ir));
  f.head(ri) = rom.L_r * (ir - ir_prev) / dt +
               rom.basis.V_i.transpose() * f_full + rom.G_r.transpose() * phir - esr;
  f.tail(rp) = rom.G_r * ir;
  return f;
}

}  // namespace

RomState pod_galerkin_step_newton(const RomOperators& rom, const FomOperators& fom,
                                  const RomState& prev, double t_next,
                                  const ExcitationSpec& exc, const SolverConfig& cfg,
                                  int* iters_out) {
  const int ri = rom.r_i(), rp = rom.r_phi();
  const bool vacuous = rom.vacuous_constraint();
  const int n = vacuous ? ri : ri + rp;
  const Vec esr = rom.reduced_source(exc, t_next);

  Vec ir = prev.i_r, phir = vacuous ? Vec::Zero(rp) : prev.phi_r;
  auto residual = [&](const Vec& i, const Vec& p) {
    Vec full = reduced_residual(rom, fom, prev.i_r, i, p, esr, cfg.dt);
    return vacuous ? Vec(full.head(ri)) : full;
  };
  Vec f = residual(ir, phir);
  double fn = f.norm();

  Mat jac = Mat::Zero(n, n);
  if (!vacuous) {
    jac.block(0, ri, ri, rp) = rom.G_r.transpose();
    jac.block(ri, 0, rp, ri) = rom.G_r;
  }

  int iters = 0;
  while (iters < cfg.newton_max_iter) {
    Mat jf = assemble_nl_jacobian(fom, lift_state(rom.basis.V_i, ir));
    jac.block(0, 0, ri, ri) =
        rom.L_r / cfg.dt + rom.basis.V_i.transpose() * jf * rom.basis.V_i;
    Eigen::PartialPivLU<Mat> lu(jac);
    Vec delta = lu.solve(-f);
    if (!delta.allFinite())
      throw StepFailure("singular reduced saddle-point system", -1, fn);

    double alpha = 1.0;
    Vec ir_new, phir_new = phir, f_new;
    double fn_new = fn;
    for (int ls = 0; ls <= cfg.line_search_max; ++ls) {
      ir_new = ir + alpha * delta.head(ri);
      if (!vacuous) phir_new = phir + alpha * delta.tail(rp);
      f_new = residual(ir_new, phir_new);
      fn_new = f_new.norm();
      if (fn_new <= fn) break;
      alpha *= cfg.line_search_shrink;
    }
    ir = ir_new;
    phir = phir_new;
    f = f_new;
    fn = fn_new;
    ++iters;
    if (fn <= cfg.newton_tol) break;
  }
  if (fn > cfg.newton_tol)
    throw StepFailure("reduced Newton did not converge: residual " + std::to_string(fn),
                      -1, fn);
  if (iters_out) *iters_out = iters;
  return {ir, phir};
}

RomTrajectory run_pod_galerkin(const RomOperators& rom, const FomOperators& fom,
                               const ExcitationSpec& exc, const SolverConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_steps;
  RomTrajectory traj;
  traj.times.resize(n + 1);
  traj.currents_r = Mat::Zero(rom.r_i(), n + 1);
  traj.potentials_r = Mat::Zero(rom.r_phi(), n + 1);
  traj.newton_iters.resize(n, 0);
  RomState state{Vec::Zero(rom.r_i()), Vec::Zero(rom.r_phi())};
  traj.times[0] = 0.0;
  for (int k = 1; k <= n; ++k) {
    int iters = 0;
    state = pod_galerkin_step_newton(rom, fom, state, k * cfg.dt, exc, cfg, &iters);
    traj.times[k] = k * cfg.dt;
    traj.currents_r.col(k) = state.i_r;
    traj.potentials_r.col(k) = state.phi_r;
    traj.newton_iters[k - 1] = iters;
  }
  return traj;
}

double check_reduced_continuity(const RomTrajectory& traj, const Mat& G_r) {
  double worst = 0.0;
  for (int k = 0; k < traj.currents_r.cols(); ++k) {
    Vec ir = traj.currents_r.col(k);
    worst = std::max(worst, (G_r * ir).norm() / (1.0 + ir.norm()));
  }
  return worst;
}

}  // namespace taperom
