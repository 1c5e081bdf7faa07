#pragma once

#include "taperom/pod.hpp"

namespace taperom {

// Hyperreduction of f(i) = R(i) i: interpolate f from its values at greedily
// selected rows, pre-projected onto the reduced current space.
struct DeimOperator {
  Mat V_f;                  // n_e x r_deim, orthonormal
  std::vector<int> points;  // n_p = r_deim selected rows, duplicate-free
  Mat Pi;                   // r_i x n_p, V_i^T V_f (P^T V_f)^-1
  double cond_ptvf = 0.0;   // condition number of P^T V_f, recorded at build

  // Selected-row evaluation touches only this local support.
  struct PointSupport {
    int row;                 // global DOF index
    std::vector<int> tris;   // adjacent elements
  };
  std::vector<PointSupport> support;
  std::vector<int> support_dofs;    // union of element DOFs over all points
  std::vector<int> dof_to_support;  // n_e -> position in support_dofs or -1
  Mat V_support;                    // |support_dofs| x r_i rows of V_i

  int r_deim() const { return static_cast<int>(V_f.cols()); }
  int n_p() const { return static_cast<int>(points.size()); }
};

// Greedy interpolation points per the discrete empirical interpolation
// algorithm: first point at the max-magnitude entry of the leading mode,
// point k at the max-magnitude residual of mode k against its interpolation
// on the previous points.
std::vector<int> deim_greedy_points(const Mat& modes);

DeimOperator build_deim(const Mat& f_snapshots, const PodTarget& target,
                        const PodBasis& basis, const FomOperators& fom);

// Pi * selected_values.
Vec deim_apply(const DeimOperator& op, const Vec& selected_values);

// f evaluated at the selected rows only, from the reduced current (gathers
// just the support DOFs of the lifted state).
Vec deim_selected_values(const DeimOperator& op, const FomOperators& fom,
                         const Vec& i_r);

// Selected rows of the Jacobian of f, pre-multiplied by V_i: n_p x r_i.
Mat deim_selected_jacobian(const DeimOperator& op, const FomOperators& fom,
                           const Vec& i_r);

// Selected rows of R(i_r-lifted) times V_i: n_p x r_i (lagged variant).
Mat deim_selected_resistance(const DeimOperator& op, const FomOperators& fom,
                             const Vec& i_r);

RomState deim_rom_step_newton(const RomOperators& rom, const DeimOperator& deim,
                              const FomOperators& fom, const RomState& prev,
                              double t_next, const ExcitationSpec& exc,
                              const SolverConfig& cfg, int* iters_out = nullptr);

// Single linear solve with the resistance frozen at the previous state.
// Reproduces the lagged-evaluation failure mode; no accuracy contract.
RomState deim_rom_step_lagged(const RomOperators& rom, const DeimOperator& deim,
                              const FomOperators& fom, const RomState& prev,
                              double t_next, const ExcitationSpec& exc,
                              const SolverConfig& cfg);

// failed_at < 0 when every step completed; otherwise the trajectory is
// truncated at the first step whose state stopped being finite.
struct DeimRunResult {
  RomTrajectory traj;
  int failed_at = -1;
};

DeimRunResult run_deim(const RomOperators& rom, const DeimOperator& deim,
                       const FomOperators& fom, const ExcitationSpec& exc,
                       const SolverConfig& cfg, bool lagged);

}  // namespace taperom
