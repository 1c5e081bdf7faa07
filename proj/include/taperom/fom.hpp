#pragma once

#include <vector>

#include "taperom/assembly.hpp"

namespace taperom {

struct SolverConfig {
  double dt = 1e-4;                // s
  int n_steps = 100;
  double newton_tol = 1e-11;       // residual 2-norm threshold [V]
  int newton_max_iter = 50;
  double line_search_shrink = 0.5; // in (0,1)
  int line_search_max = 20;
  int gauge_face = 0;              // pinned face potential per component

  void validate() const;
};

struct FomState {
  Vec i;    // n_e edge currents [A]
  Vec phi;  // n_f face potentials [V]
};

struct Trajectory {
  Vec times;                      // N+1, strictly increasing, t0 = 0
  Mat currents;                   // n_e x (N+1), column 0 = initial condition
  Mat potentials;                 // n_f x (N+1)
  Mat nonlinearity;               // n_e x N, f = R(i)i at converged states
  std::vector<int> newton_iters;  // per step

  int n_steps() const { return static_cast<int>(newton_iters.size()); }
};

// One backward-Euler step solved with Newton-Raphson and a backtracking line
// search. Residual (row 1 in volts): L (i - i_n)/dt + R(i) i + G^T phi - e_s.
// The continuity rows are replaced by phi = 0 at the pinned gauge face.
FomState newton_step(const FomOperators& ops, const FomState& prev, double t_next,
                     const ExcitationSpec& exc, const SolverConfig& cfg,
                     int* iters_out = nullptr);

// Zero-initial-state transient over cfg.n_steps uniform steps.
Trajectory run_transient(const FomOperators& ops, const ExcitationSpec& exc,
                         const SolverConfig& cfg);

// max over steps of ||G i|| / (1 + ||i||).
double check_continuity(const Trajectory& traj, const SpMat& G);

}  // namespace taperom
