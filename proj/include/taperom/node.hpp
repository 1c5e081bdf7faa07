#pragma once

#include <vector>

#include "taperom/pod.hpp"

namespace taperom {

// Parameterization of the network output as a reduced resistance matrix.
enum class OutputMode { Full, Symmetric, Spd };

// Feed-forward network mapping |i_r| to an r_i x r_i reduced resistance
// operator. Hidden layers use selu; the output layer is linear, reshaped
// column-major and scaled by out_scale.
struct MlpParams {
  int r_i = 0;
  std::vector<Mat> weights;  // layer l: rows = fan_out, cols = fan_in
  std::vector<Vec> biases;
  OutputMode output_mode = OutputMode::Full;
  Vec in_mean;   // per-component statistics of |i_r| over the training set
  Vec in_scale;
  double out_scale = 1.0;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int n_params() const;
  Vec flatten() const;
  void unflatten(const Vec& theta);
  std::vector<int> hidden_sizes() const;
  void validate() const;
};

int output_dim(OutputMode mode, int r_i);

// LeCun-normal weights (pairs with selu), zero biases, output layer scaled
// down so training starts near the frozen-inductance regime.
MlpParams init_mlp(int r_i, const std::vector<int>& hidden, OutputMode mode,
                   unsigned long long seed);

Mat r_psi_forward(const MlpParams& params, const Vec& i_r);

// Per-step forward cache for the reverse pass.
struct NodeStepCache {
  Vec i_prev;                    // reduced current entering the step
  Vec x0;                        // normalized |i_prev|
  std::vector<Vec> preacts;     // hidden pre-activations
  std::vector<Vec> acts;        // hidden activations (post-selu)
  Vec y;                         // raw network output
  Eigen::PartialPivLU<Mat> lu;   // factorization of the step matrix
  Vec x_next;                    // solution [i; phi]
  bool vacuous = false;          // constraint block dropped (G V_i = 0)
};

// One step of the learned ROM: solve
//   [dt R_psi(i^n) + L_r, dt G_r^T; G_r, 0] [i^(n+1); phi^(n+1)]
//     = [L_r i^n + dt e_sr^(n+1); 0].
// R_psi is evaluated at the previous state, so the system is linear.
RomState node_step(const RomOperators& rom, const MlpParams& params,
                   const RomState& prev, const Vec& esr_next, double dt,
                   NodeStepCache* cache = nullptr);

// Teacher-started training segment: unroll from `init` through the columns
// of `sources` (reduced source at t_1..t_N), compare against the reduced
// reference states.
struct TrainSegment {
  RomState init;
  Mat sources;  // r_i x N
  double dt = 0.0;
  Mat ref_i;    // r_i x N
  Mat ref_phi;  // r_phi x N
  int n_steps() const { return static_cast<int>(sources.cols()); }
};

RomTrajectory unroll(const RomOperators& rom, const MlpParams& params,
                     const RomState& init, const Mat& sources, double dt,
                     std::vector<NodeStepCache>* caches = nullptr);

struct LossWeights {
  double w_i = 1.0;
  double w_phi = 1.0;
  // Per-component scales (training-set RMS); empty means unit scales.
  Vec scale_i;
  Vec scale_phi;
};

// (w_i SSE_i + w_phi SSE_phi) / (N (r_i + r_phi)): squared error pooled over
// predicted steps and components, each component divided by its scale.
double loss_mse(const Mat& pred_i, const Mat& pred_phi, const Mat& ref_i,
                const Mat& ref_phi, const LossWeights& w);

struct NodeGradient {
  double loss = 0.0;
  Vec grad;  // flattened layout of MlpParams::flatten
};

// Exact reverse-mode gradient of loss_mse over the unrolled segment, with
// the linear-solve adjoint: for A x = b, lambda = A^-T xbar, bbar = lambda,
// Abar = -lambda x^T; the dt R_psi block of Abar backpropagates into the
// network, and state cotangents flow through both b and R_psi(|i^n|).
NodeGradient backward(const RomOperators& rom, const MlpParams& params,
                      const TrainSegment& segment, const LossWeights& w);

// Max relative mismatch between backward() and central finite differences
// on n_probes randomly chosen parameters.
double gradient_check(const RomOperators& rom, const MlpParams& params,
                      const TrainSegment& segment, const LossWeights& w,
                      int n_probes, unsigned long long seed);

struct TrainConfig {
  int seq_len = 32;       // steps per unrolled segment
  int stride = 0;         // segment start spacing; 0 means seq_len
  int batch_size = 8;
  double lr = 1e-3;
  int epochs = 200;
  unsigned long long seed = 0;
  LossWeights weights;
  double val_fraction = 0.2;
  double grad_clip = 10.0;        // global-norm clip; <= 0 disables
  double lr_decay_factor = 1.0;   // multiplies lr every lr_decay_every epochs
  int lr_decay_every = 0;         // 0 disables

  void validate() const;
};

// One reduced reference trajectory (restricted FOM run) plus its sources.
struct ReducedTraj {
  Mat i_r;      // r_i x (N+1)
  Mat phi_r;    // r_phi x (N+1)
  Mat sources;  // r_i x N
  double dt = 0.0;
};

struct EpochLog {
  int epoch;
  double train_loss;
  double val_loss;
  double wall_time_s;
};

struct TrainResult {
  MlpParams params;  // best-validation parameters
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val = 0.0;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) over teacher-started segments cut
// from the dataset. Fixed seed gives a reproducible run; aborts on NaN loss.
TrainResult train(const RomOperators& rom, MlpParams params,
                  const std::vector<ReducedTraj>& dataset, const TrainConfig& cfg);

// Normalization statistics from the dataset and the output scale
// median(|diag L_r|)/dt.
void set_normalization(MlpParams& params, const RomOperators& rom,
                       const std::vector<ReducedTraj>& dataset);

// Cut teacher-started segments; val_fraction of them (seeded choice) go to
// the validation split.
void make_segments(const std::vector<ReducedTraj>& dataset, int seq_len,
                   double val_fraction, unsigned long long seed,
                   std::vector<TrainSegment>& train_out,
                   std::vector<TrainSegment>& val_out, int stride = 0);

struct NodeRunResult {
  RomTrajectory traj;
  int failed_at = -1;
};

NodeRunResult run_node(const RomOperators& rom, const MlpParams& params,
                       const ExcitationSpec& exc, const SolverConfig& cfg);

}  // namespace taperom
