#include "taperom/fom.hpp"

#include <cmath>

namespace taperom {

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("solver.dt must be > 0");
  if (n_steps < 1) throw ConfigError("solver.n_steps must be >= 1");
  if (!(newton_tol > 0.0)) throw ConfigError("solver.newton_tol must be > 0");
  if (newton_max_iter < 1) throw ConfigError("solver.newton_max_iter must be >= 1");
  if (!(line_search_shrink > 0.0 && line_search_shrink < 1.0))
    throw ConfigError("solver.line_search_shrink must be in (0,1)");
  if (gauge_face < 0) throw ConfigError("solver.gauge_face must be >= 0");
}

namespace {

Vec block_residual(const FomOperators& ops, const Vec& i_prev, const Vec& i,
                   const Vec& phi, const Vec& es, double dt, int gauge) {
  const int ne = ops.n_e(), nf = ops.n_f();
  Vec f(ne + nf);
  f.head(ne) = ops.L * (i - i_prev) / dt + nonlinearity(ops, i) +
               ops.G.transpose() * phi - es;
  f.tail(nf) = ops.G * i;
  f[ne + gauge] = phi[gauge];
  return f;
}

}  // namespace

FomState newton_step(const FomOperators& ops, const FomState& prev, double t_next,
                     const ExcitationSpec& exc, const SolverConfig& cfg,
                     int* iters_out) {
  const int ne = ops.n_e(), nf = ops.n_f();
  if (cfg.gauge_face >= nf) throw ConfigError("solver.gauge_face out of range");
  const Vec es = assemble_source(ops, exc, t_next);

  Vec i = prev.i, phi = prev.phi;
  Vec f = block_residual(ops, prev.i, i, phi, es, cfg.dt, cfg.gauge_face);
  double fn = f.norm();

  Mat jac = Mat::Zero(ne + nf, ne + nf);
  jac.block(0, ne, ne, nf) = Mat(ops.G.transpose());
  jac.block(ne, 0, nf, ne) = Mat(ops.G);
  jac.block(ne, 0, 1, ne + nf).setZero();
  // gauge row is rebuilt below each iteration alongside the (1,1) block

  int iters = 0;
  while (iters < cfg.newton_max_iter) {
    jac.block(0, 0, ne, ne) = ops.L / cfg.dt + assemble_nl_jacobian(ops, i);
    jac.row(ne + cfg.gauge_face).setZero();
    jac(ne + cfg.gauge_face, ne + cfg.gauge_face) = 1.0;

    Eigen::PartialPivLU<Mat> lu(jac);
    Vec delta = lu.solve(-f);
    if (!delta.allFinite())
      throw StepFailure("singular saddle-point system (check gauge pinning)", -1, fn);

    double alpha = 1.0;
    Vec i_new, phi_new, f_new;
    double fn_new = fn;
    bool accepted = false;
    for (int ls = 0; ls <= cfg.line_search_max; ++ls) {
      i_new = i + alpha * delta.head(ne);
      phi_new = phi + alpha * delta.tail(nf);
      f_new = block_residual(ops, prev.i, i_new, phi_new, es, cfg.dt, cfg.gauge_face);
      fn_new = f_new.norm();
      if (fn_new <= fn) {
        accepted = true;
        break;
      }
      alpha *= cfg.line_search_shrink;
    }
    if (!accepted) {
      // keep the smallest tried step; max_iter bounds the total work
      i_new = i + alpha * delta.head(ne);
      phi_new = phi + alpha * delta.tail(nf);
      f_new = block_residual(ops, prev.i, i_new, phi_new, es, cfg.dt, cfg.gauge_face);
      fn_new = f_new.norm();
    }
    i = i_new;
    phi = phi_new;
    f = f_new;
    fn = fn_new;
    ++iters;
    if (fn <= cfg.newton_tol) break;
  }
  if (fn > cfg.newton_tol)
    throw StepFailure("Newton did not converge: residual " + std::to_string(fn), -1, fn);
  if (iters_out) *iters_out = iters;
  return {i, phi};
}

Trajectory run_transient(const FomOperators& ops, const ExcitationSpec& exc,
                         const SolverConfig& cfg) {
  cfg.validate();
  exc.validate();
  const int ne = ops.n_e(), nf = ops.n_f(), n = cfg.n_steps;
  Trajectory traj;
  traj.times.resize(n + 1);
  traj.currents = Mat::Zero(ne, n + 1);
  traj.potentials = Mat::Zero(nf, n + 1);
  traj.nonlinearity = Mat::Zero(ne, n);
  traj.newton_iters.resize(n, 0);

  FomState state{Vec::Zero(ne), Vec::Zero(nf)};
  traj.times[0] = 0.0;
  for (int k = 1; k <= n; ++k) {
    double t = k * cfg.dt;
    int iters = 0;
    try {
      state = newton_step(ops, state, t, exc, cfg, &iters);
    } catch (const StepFailure& e) {
      throw StepFailure(std::string(e.what()) + " at step " + std::to_string(k), k,
                        e.last_residual);
    }
    traj.times[k] = t;
    traj.currents.col(k) = state.i;
    traj.potentials.col(k) = state.phi;
    traj.nonlinearity.col(k - 1) = nonlinearity(ops, state.i);
    traj.newton_iters[k - 1] = iters;
  }
  return traj;
}

double check_continuity(const Trajectory& traj, const SpMat& G) {
  double worst = 0.0;
  for (int k = 0; k < traj.currents.cols(); ++k) {
    Vec i = traj.currents.col(k);
    worst = std::max(worst, (G * i).norm() / (1.0 + i.norm()));
  }
  return worst;
}

}  // namespace taperom
