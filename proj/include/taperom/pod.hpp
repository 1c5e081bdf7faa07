#pragma once

#include <optional>

#include "taperom/fom.hpp"

namespace taperom {

// Retained-ratio criterion: the as-printed sum of singular values, with the
// conventional squared-energy variant behind a switch.
enum class EnergyCriterion { SumSigma, SumSigmaSquared };

struct PodTarget {
  std::optional<double> target;  // smallest rank with ratio >= target
  std::optional<int> rank;       // or a fixed rank (takes precedence)
  EnergyCriterion criterion = EnergyCriterion::SumSigma;
};

struct PodBasis {
  Mat V_i;      // n_e x r_i, orthonormal
  Mat V_phi;    // n_f x r_phi, orthonormal
  Vec sv_i;     // all singular values of the current snapshots, descending
  Vec sv_phi;
  double eps_i = 0.0;    // achieved retained ratio
  double eps_phi = 0.0;

  int r_i() const { return static_cast<int>(V_i.cols()); }
  int r_phi() const { return static_cast<int>(V_phi.cols()); }
};

struct PodResult {
  Mat V;
  Vec sv;
  double eps;
};

// Truncated left-singular basis of one snapshot matrix.
PodResult pod_truncate(const Mat& snapshots, const PodTarget& target);

// Separate SVDs for current and potential snapshots.
PodBasis build_pod(const Mat& current_snaps, const Mat& potential_snaps,
                   const PodTarget& target_i, const PodTarget& target_phi);

double retained_ratio(const Vec& sv, int rank, EnergyCriterion criterion);

// Projected system matrices. L_r stays symmetric positive definite by
// congruence; the reduced source is b_dot(t) * source_geom_r.
struct RomOperators {
  Mat L_r;            // r_i x r_i
  Mat G_r;            // r_phi x r_i
  Vec source_geom_r;  // r_i
  PodBasis basis;
  double dt_reference = 0.0;  // dt the ROM artifacts were built against (node scaling)

  int r_i() const { return static_cast<int>(L_r.rows()); }
  int r_phi() const { return static_cast<int>(G_r.rows()); }
  Vec reduced_source(const ExcitationSpec& e, double t) const {
    return b_dot(e, t) * source_geom_r;
  }

  // Snapshot-built current bases span only divergence-free states, so
  // G V_i = 0 and the projected constraint block is vacuous: the saddle
  // system degenerates and the reduced potentials decouple (they are pinned
  // to zero by every stepper). Healthy couplings (identity or synthetic
  // bases) keep the full saddle solve.
  bool vacuous_constraint() const {
    return G_r.size() == 0 || G_r.cwiseAbs().maxCoeff() < 1e-8;
  }
};

RomOperators project_operators(const FomOperators& fom, const PodBasis& basis);

Vec restrict_state(const Mat& V, const Vec& x_full);  // V^T x
Vec lift_state(const Mat& V, const Vec& x_reduced);   // V x

struct RomState {
  Vec i_r;
  Vec phi_r;
};

struct RomTrajectory {
  Vec times;
  Mat currents_r;    // r_i x (N+1)
  Mat potentials_r;  // r_phi x (N+1)
  std::vector<int> newton_iters;  // per step; empty for single-solve backends
};

// Reference reduced-order step: backward Euler with the exact reduced
// nonlinearity V_i^T f(V_i i_r) solved by Newton. Used as the DEIM-free
// baseline and by the identity-projection checks.
RomState pod_galerkin_step_newton(const RomOperators& rom, const FomOperators& fom,
                                  const RomState& prev, double t_next,
                                  const ExcitationSpec& exc, const SolverConfig& cfg,
                                  int* iters_out = nullptr);

RomTrajectory run_pod_galerkin(const RomOperators& rom, const FomOperators& fom,
                               const ExcitationSpec& exc, const SolverConfig& cfg);

// Reduced continuity report: max over steps of ||G_r i_r|| / (1 + ||i_r||).
double check_reduced_continuity(const RomTrajectory& traj, const Mat& G_r);

}  // namespace taperom
