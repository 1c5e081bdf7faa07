#include "taperom/deim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/SVD>

namespace taperom {

std::vector<int> deim_greedy_points(const Mat& modes) {
  const int r = static_cast<int>(modes.cols());
  std::vector<int> points;
  points.reserve(r);
  int p0 = 0;
  modes.col(0).cwiseAbs().maxCoeff(&p0);
  points.push_back(p0);
  for (int l = 1; l < r; ++l) {
    Mat u = modes.leftCols(l);
    Mat up(l, l);
    Vec ul(l);
    for (int k = 0; k < l; ++k) {
      up.row(k) = u.row(points[k]);
      ul[k] = modes(points[k], l);
    }
    Vec c = up.partialPivLu().solve(ul);
    Vec res = modes.col(l) - u * c;
    int p = 0;
    res.cwiseAbs().maxCoeff(&p);
    points.push_back(p);
  }
  return points;
}

DeimOperator build_deim(const Mat& f_snapshots, const PodTarget& target,
                        const PodBasis& basis, const FomOperators& fom) {
  PodResult pr = pod_truncate(f_snapshots, target);
  DeimOperator op;
  op.V_f = pr.V;
  op.points = deim_greedy_points(op.V_f);

  std::set<int> uniq(op.points.begin(), op.points.end());
  if (uniq.size() != op.points.size())
    throw std::logic_error("deim: greedy selected a duplicate point");

  Mat ptvf(op.n_p(), op.r_deim());
  for (int k = 0; k < op.n_p(); ++k) ptvf.row(k) = op.V_f.row(op.points[k]);
  Eigen::JacobiSVD<Mat> svd(ptvf);
  double smin = svd.singularValues().minCoeff();
  if (!(smin > 0.0))
    throw std::logic_error("deim: P^T V_f is numerically singular");
  op.cond_ptvf = svd.singularValues().maxCoeff() / smin;

  op.Pi = basis.V_i.transpose() * op.V_f * ptvf.partialPivLu().inverse();

  // Element support per selected row and the union gather table.
  std::set<int> union_dofs;
  for (int k = 0; k < op.n_p(); ++k) {
    DeimOperator::PointSupport ps;
    ps.row = op.points[k];
    int edge_id = fom.mesh.interior_edge_ids[ps.row];
    const MeshEdge& e = fom.mesh.edges[edge_id];
    ps.tris = {e.tri_plus, e.tri_minus};
    for (int t : ps.tris)
      for (int d : fom.elements[t].dofs) union_dofs.insert(d);
    op.support.push_back(std::move(ps));
  }
  op.support_dofs.assign(union_dofs.begin(), union_dofs.end());
  op.dof_to_support.assign(fom.n_e(), -1);
  for (size_t k = 0; k < op.support_dofs.size(); ++k)
    op.dof_to_support[op.support_dofs[k]] = static_cast<int>(k);
  op.V_support.resize(op.support_dofs.size(), basis.V_i.cols());
  for (size_t k = 0; k < op.support_dofs.size(); ++k)
    op.V_support.row(k) = basis.V_i.row(op.support_dofs[k]);
  return op;
}

Vec deim_apply(const DeimOperator& op, const Vec& selected_values) {
  if (selected_values.size() != op.n_p())
    throw ConfigError("deim_apply: selected-value length mismatch");
  return op.Pi * selected_values;
}

namespace {

// Gather-compute helper: local currents on the support union.
Vec support_currents(const DeimOperator& op, const Vec& i_r) {
  return op.V_support * i_r;
}

Vec3 support_element_current(const DeimOperator& op, const ElementTable& elem,
                             const Vec& i_loc) {
  Vec3 k = Vec3::Zero();
  for (size_t c = 0; c < elem.dofs.size(); ++c)
    k += i_loc[op.dof_to_support[elem.dofs[c]]] * elem.w_centroid.col(c);
  return k;
}

}  // namespace

Vec deim_selected_values(const DeimOperator& op, const FomOperators& fom,
                         const Vec& i_r) {
  Vec i_loc = support_currents(op, i_r);
  Vec vals = Vec::Zero(op.n_p());
  for (int k = 0; k < op.n_p(); ++k) {
    const auto& ps = op.support[k];
    for (int t : ps.tris) {
      const ElementTable& e = fom.elements[t];
      double eta = sheet_resistivity(fom.material, support_element_current(op, e, i_loc).norm());
      int local = -1;
      for (size_t c = 0; c < e.dofs.size(); ++c)
        if (e.dofs[c] == ps.row) local = static_cast<int>(c);
      double acc = 0.0;
      for (size_t c = 0; c < e.dofs.size(); ++c)
        acc += e.gram(local, c) * i_loc[op.dof_to_support[e.dofs[c]]];
      vals[k] += eta * acc;
    }
  }
  return vals;
}

Mat deim_selected_jacobian(const DeimOperator& op, const FomOperators& fom,
                           const Vec& i_r) {
  Vec i_loc = support_currents(op, i_r);
  Mat jr = Mat::Zero(op.n_p(), op.V_support.cols());
  for (int k = 0; k < op.n_p(); ++k) {
    const auto& ps = op.support[k];
    for (int t : ps.tris) {
      const ElementTable& e = fom.elements[t];
      int nloc = static_cast<int>(e.dofs.size());
      Vec3 kc = support_element_current(op, e, i_loc);
      double kn = kc.norm();
      double eta = sheet_resistivity(fom.material, kn);
      int local = -1;
      Vec iel(nloc);
      for (int c = 0; c < nloc; ++c) {
        iel[c] = i_loc[op.dof_to_support[e.dofs[c]]];
        if (e.dofs[c] == ps.row) local = c;
      }
      double mi = e.gram.row(local).dot(iel);
      Vec grad = Vec::Zero(nloc);
      if (kn > 0.0 && fom.material.n_exp > 1.0) {
        double deta = sheet_resistivity_derivative(fom.material, kn);
        grad = (deta / kn) * (e.w_centroid.transpose() * kc);
      }
      for (int c = 0; c < nloc; ++c) {
        double coeff = eta * e.gram(local, c) + mi * grad[c];
        jr.row(k) += coeff * op.V_support.row(op.dof_to_support[e.dofs[c]]);
      }
    }
  }
  return jr;
}

Mat deim_selected_resistance(const DeimOperator& op, const FomOperators& fom,
                             const Vec& i_r) {
  Vec i_loc = support_currents(op, i_r);
  Mat rr = Mat::Zero(op.n_p(), op.V_support.cols());
  for (int k = 0; k < op.n_p(); ++k) {
    const auto& ps = op.support[k];
    for (int t : ps.tris) {
      const ElementTable& e = fom.elements[t];
      double eta = sheet_resistivity(fom.material, support_element_current(op, e, i_loc).norm());
      int local = -1;
      for (size_t c = 0; c < e.dofs.size(); ++c)
        if (e.dofs[c] == ps.row) local = static_cast<int>(c);
      for (size_t c = 0; c < e.dofs.size(); ++c)
        rr.row(k) += eta * e.gram(local, c) * op.V_support.row(op.dof_to_support[e.dofs[c]]);
    }
  }
  return rr;
}

RomState deim_rom_step_newton(const RomOperators& rom, const DeimOperator& deim,
                              const FomOperators& fom, const RomState& prev,
                              double t_next, const ExcitationSpec& exc,
                              const SolverConfig& cfg, int* iters_out) {
  const int ri = rom.r_i(), rp = rom.r_phi();
  const bool vacuous = rom.vacuous_constraint();
  const int n = vacuous ? ri : ri + rp;
  const Vec esr = rom.reduced_source(exc, t_next);

  auto residual = [&](const Vec& ir, const Vec& phir) {
    Vec f(n);
    f.head(ri) = rom.L_r * (ir - prev.i_r) / cfg.dt +
                 deim.Pi * deim_selected_values(deim, fom, ir) +
                 rom.G_r.transpose() * phir - esr;
    if (!vacuous) f.tail(rp) = rom.G_r * ir;
    return f;
  };

  Vec ir = prev.i_r, phir = vacuous ? Vec::Zero(rp) : prev.phi_r;
  Vec f = residual(ir, phir);
  double fn = f.norm();

  Mat jac = Mat::Zero(n, n);
  if (!vacuous) {
    jac.block(0, ri, ri, rp) = rom.G_r.transpose();
    jac.block(ri, 0, rp, ri) = rom.G_r;
  }

  int iters = 0;
  while (iters < cfg.newton_max_iter) {
    jac.block(0, 0, ri, ri) =
        rom.L_r / cfg.dt + deim.Pi * deim_selected_jacobian(deim, fom, ir);
    Eigen::PartialPivLU<Mat> lu(jac);
    Vec delta = lu.solve(-f);
    if (!delta.allFinite())
      throw StepFailure("singular DEIM saddle-point system", -1, fn);

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
    throw StepFailure("DEIM Newton did not converge: residual " + std::to_string(fn),
                      -1, fn);
  if (iters_out) *iters_out = iters;
  return {ir, phir};
}

RomState deim_rom_step_lagged(const RomOperators& rom, const DeimOperator& deim,
                              const FomOperators& fom, const RomState& prev,
                              double t_next, const ExcitationSpec& exc,
                              const SolverConfig& cfg) {
  const int ri = rom.r_i(), rp = rom.r_phi();
  const bool vacuous = rom.vacuous_constraint();
  const int n = vacuous ? ri : ri + rp;
  const double dt = cfg.dt;
  Mat r_lag = deim.Pi * deim_selected_resistance(deim, fom, prev.i_r);

  Mat a = Mat::Zero(n, n);
  a.block(0, 0, ri, ri) = dt * r_lag + rom.L_r;
  if (!vacuous) {
    a.block(0, ri, ri, rp) = dt * rom.G_r.transpose();
    a.block(ri, 0, rp, ri) = rom.G_r;
  }

  Vec b = Vec::Zero(n);
  b.head(ri) = rom.L_r * prev.i_r + dt * rom.reduced_source(exc, t_next);

  Vec x = a.partialPivLu().solve(b);
  if (!x.allFinite())
    throw StepFailure("singular lagged-DEIM system", -1, 0.0);
  return {x.head(ri), vacuous ? Vec(Vec::Zero(rp)) : Vec(x.tail(rp))};
}

DeimRunResult run_deim(const RomOperators& rom, const DeimOperator& deim,
                       const FomOperators& fom, const ExcitationSpec& exc,
                       const SolverConfig& cfg, bool lagged) {
  cfg.validate();
  const int n = cfg.n_steps;
  DeimRunResult out;
  RomTrajectory& traj = out.traj;
  traj.times.resize(n + 1);
  traj.currents_r = Mat::Zero(rom.r_i(), n + 1);
  traj.potentials_r = Mat::Zero(rom.r_phi(), n + 1);
  if (!lagged) traj.newton_iters.resize(n, 0);
  RomState state{Vec::Zero(rom.r_i()), Vec::Zero(rom.r_phi())};
  traj.times[0] = 0.0;
  int completed = 0;
  for (int k = 1; k <= n; ++k) {
    double t = k * cfg.dt;
    try {
      if (lagged) {
        state = deim_rom_step_lagged(rom, deim, fom, state, t, exc, cfg);
      } else {
        int iters = 0;
        state = deim_rom_step_newton(rom, deim, fom, state, t, exc, cfg, &iters);
        traj.newton_iters[k - 1] = iters;
      }
    } catch (const StepFailure&) {
      out.failed_at = k;
      break;
    }
    if (!state.i_r.allFinite() || !state.phi_r.allFinite()) {
      out.failed_at = k;
      break;
    }
    traj.times[k] = t;
    traj.currents_r.col(k) = state.i_r;
    traj.potentials_r.col(k) = state.phi_r;
    completed = k;
  }
  if (out.failed_at >= 0) {
    traj.times.conservativeResize(completed + 1);
    traj.currents_r.conservativeResize(Eigen::NoChange, completed + 1);
    traj.potentials_r.conservativeResize(Eigen::NoChange, completed + 1);
    if (!lagged) traj.newton_iters.resize(completed);
  }
  return out;
}

}  // namespace taperom
