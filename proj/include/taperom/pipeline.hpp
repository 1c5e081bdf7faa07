#pragma once

#include <map>
#include <optional>

#include "taperom/analysis.hpp"
#include "taperom/config.hpp"
#include "taperom/io.hpp"

namespace taperom {

// Summary statistics of one ROM-vs-FOM comparison.
struct ErrorSummary {
  double mean = 0.0, p95 = 0.0, max = 0.0;
};

struct ReproSummary {
  int r_i = 0, r_phi = 0, r_deim = 0;
  double eps_i = 0.0, eps_phi = 0.0, eps_deim = 0.0, deim_cond = 0.0;
  double projection_floor_mean = 0.0;
  std::map<std::string, ErrorSummary> within;  // backend -> stats
  std::map<std::string, ErrorSummary> ood;     // pooled over both transients
  std::map<std::string, ErrorSummary> freq;    // pooled over the three runs
  double fom_newton_iters_avg = 0.0;
  double deim_newton_iters_avg = 0.0;
  double fom_continuity = 0.0;
  double rom_continuity = 0.0;
  double loss_avg_fom = 0.0, loss_avg_node = 0.0, loss_avg_deim = 0.0;
  double loss_rel_err_node = 0.0, loss_rel_err_deim = 0.0;
  double loss_min_node = 0.0, loss_min_deim = 0.0, loss_min_fom = 0.0;
  double flops_node = 0.0, flops_deim = 0.0, flops_ratio = 0.0;
  int lagged_failed_at = -1;
  double lagged_mean_over_newton_mean = 0.0;
  int node_best_epoch = -1;
  double node_best_val = 0.0;
};

// Runs the commands of the CLI against an artifact directory; every command
// writes a manifest (producer, config hash, input hashes) next to its
// outputs. In-memory caches avoid redundant reloads when commands are chained
// in one process.
class Pipeline {
 public:
  Pipeline(RunConfig cfg, std::filesystem::path out_dir);

  const RunConfig& config() const { return cfg_; }
  const std::filesystem::path& out() const { return out_; }

  void mesh_gen();
  void fom_run(const std::string& case_name);
  void fom_run_all();
  void build_pod();
  void build_deim();
  void node_train();
  void rom_run(const std::string& backend, const std::string& case_name);
  void analyze_errors(const std::string& backend, const std::string& case_name);
  void analyze_losses(const std::string& backend, const std::string& case_name);
  void analyze_flops();
  ReproSummary repro_paper_desk();

  // Artifact access (throws DependencyError naming the producing command).
  const Mesh& mesh();
  const FomOperators& operators();
  const Trajectory& fom_trajectory(const std::string& case_name);
  const RomOperators& rom_operators();
  const DeimOperator& deim_operator();
  const MlpParams& node_params();
  RomTrajectory rom_trajectory(const std::string& backend, const std::string& case_name,
                               int* failed_at = nullptr, double* iters_avg = nullptr);

  // Steps for a case: scaled so every frequency covers the same number of
  // excitation periods as the training cases at the configured dt.
  int case_steps(const CaseSpec& c) const;
  SolverConfig case_solver(const CaseSpec& c) const;

  std::filesystem::path case_dir(const std::string& case_name) const;
  std::filesystem::path run_dir(const std::string& backend,
                                const std::string& case_name) const;

 private:
  RunConfig cfg_;
  std::filesystem::path out_;
  std::string config_hash_;

  std::optional<Mesh> mesh_;
  std::optional<FomOperators> ops_;
  std::map<std::string, Trajectory> fom_cache_;
  std::optional<PodBasis> pod_;
  std::optional<RomOperators> rom_;
  std::optional<DeimOperator> deim_;
  std::optional<MlpParams> node_;

  void save_trajectory(const std::filesystem::path& dir, const Trajectory& traj,
                       const CaseSpec& c, const SolverConfig& scfg);
  Trajectory load_trajectory(const std::filesystem::path& dir) const;
  Manifest base_manifest(const std::string& producer) const;
  std::vector<ReducedTraj> reduced_dataset();
};

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace taperom
