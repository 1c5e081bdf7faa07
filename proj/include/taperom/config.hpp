#pragma once

#include <filesystem>
#include <vector>

#include "taperom/deim.hpp"
#include "taperom/node.hpp"

namespace taperom {

struct CaseSpec {
  std::string name;
  ExcitationSpec excitation;
};

// One curriculum stage: short segments stabilize early training, longer
// segments then polish the free-running behavior (warm-started).
struct TrainStage {
  int seq_len = 32;
  int stride = 0;  // 0 means seq_len
  double lr = 1e-3;
  int epochs = 100;
};

struct NodeSettings {
  std::vector<int> hidden{168, 168, 168, 168};
  OutputMode output_mode = OutputMode::Full;
  std::string activation = "selu";
  TrainConfig train;
  std::vector<TrainStage> stages;  // when empty, one stage from `train`
};

// One structured config file drives the whole pipeline; the only environment
// overrides are the output directory and the assembly thread count.
struct RunConfig {
  unsigned long long seed = 1;
  std::string output_dir = "out";
  TapeSpec mesh;
  MaterialParams material;
  std::vector<CaseSpec> training;
  std::vector<CaseSpec> within;
  std::vector<CaseSpec> ood;
  std::vector<CaseSpec> freq;
  SolverConfig solver;
  PodTarget pod_i, pod_phi;
  PodTarget deim;
  NodeSettings node;
  QuadratureConfig quadrature;

  std::vector<CaseSpec> all_cases() const;
  const CaseSpec& find_case(const std::string& name) const;
};

// Parse failure carrying every detected problem, not just the first.
class ConfigParseError : public ConfigError {
 public:
  explicit ConfigParseError(std::vector<std::string> errs);
  std::vector<std::string> errors;
};

RunConfig default_config();
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);
std::string serialize_config(const RunConfig& cfg);

}  // namespace taperom
