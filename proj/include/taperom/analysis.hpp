#pragma once

#include <string>
#include <vector>

#include "taperom/node.hpp"

namespace taperom {

// Instantaneous dissipated power p(t) = sum over elements of
// eta(|K|) |K|^2 area, with fields constant per element (centroid rule).
// `currents` holds full-space edge currents, one column per time instant.
Vec ac_losses(const FomOperators& ops, const Mat& currents);

// Per-element centroid current-density error magnitudes ||K_a - K_b|| [A/m].
Vec element_current_errors(const FomOperators& ops, const Vec& i_a, const Vec& i_b);

// Nearest-rank percentile (no interpolation).
double nearest_rank_percentile(std::vector<double> values, double pct);

struct ErrorReport {
  Vec step_mean, step_p95, step_max;  // per time step
  double mean = 0.0, p95 = 0.0, max = 0.0;  // over all states and steps
};

// Absolute current-density error statistics between two full-space current
// trajectories on matching time grids.
ErrorReport error_stats(const FomOperators& ops, const Mat& rom_lifted,
                        const Mat& fom_currents);

// Same statistics pooled over several trajectory pairs (e.g. both
// outside-the-distribution transients).
ErrorReport error_stats_pooled(const FomOperators& ops,
                               const std::vector<const Mat*>& rom_lifted,
                               const std::vector<const Mat*>& fom_currents);

// --- FLOP model -----------------------------------------------------------
// Counting conventions: multiply and add count separately (2 per MAC);
// divide, sqrt, pow, exp and activations count 1 each. Dense matvec m x n is
// 2mn; a dense LU solve of size s is (2/3)s^3 + 2s^2; an MLP layer a -> b is
// 2ab plus b activations.

struct FlopPhase {
  std::string name;
  double count = 0.0;
};

struct FlopReport {
  std::string backend;
  std::vector<FlopPhase> phases;
  double total = 0.0;

  double phase(const std::string& name) const;
};

struct NodeDims {
  int r_i = 0;
  int r_phi = 0;
  std::vector<int> hidden;
  OutputMode mode = OutputMode::Full;
};

struct DeimDims {
  int r_i = 0;
  int r_phi = 0;
  int n_p = 0;
  int support_dofs = 0;       // union of DOFs gathered per iteration
  int element_evals = 0;      // (point, adjacent element) pairs
  double newton_iters = 1.0;  // measured average per step
};

FlopReport flop_count_node(const NodeDims& dims);
FlopReport flop_count_deim(const DeimDims& dims);

double lu_solve_flops(int s);
double matvec_flops(int m, int n);

}  // namespace taperom
