#include "taperom/config.hpp"

#include <sstream>

#include <json.hpp>

#include "taperom/io.hpp"

namespace taperom {

using nlohmann::json;

ConfigParseError::ConfigParseError(std::vector<std::string> errs)
    : ConfigError([&errs] {
        std::ostringstream os;
        os << "config errors (" << errs.size() << "):";
        for (const auto& e : errs) os << "\n  - " << e;
        return os.str();
      }()),
      errors(std::move(errs)) {}

std::vector<CaseSpec> RunConfig::all_cases() const {
  std::vector<CaseSpec> out;
  for (const auto& group : {&training, &within, &ood, &freq})
    out.insert(out.end(), group->begin(), group->end());
  return out;
}

const CaseSpec& RunConfig::find_case(const std::string& name) const {
  for (const auto& group : {&training, &within, &ood, &freq})
    for (const CaseSpec& c : *group)
      if (c.name == name) return c;
  throw ConfigError("unknown case: " + name);
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.seed = 1;
  cfg.output_dir = "out";

  cfg.mesh.length = 0.020;
  cfg.mesh.width = 0.004;
  cfg.mesh.nx = 4;
  cfg.mesh.nz = 20;

  cfg.material.E_c = 1e-4;
  cfg.material.K_c = 2.36e8 * 1e-4;  // J_c x thickness
  cfg.material.n_exp = 25.0;
  cfg.material.eta_floor = 1e-14;

  auto add = [](std::vector<CaseSpec>& dst, const std::string& base, double b0,
                double f) {
    CaseSpec c;
    c.name = base + std::to_string(dst.size());
    c.excitation.B0 = b0;
    c.excitation.freq = f;
    dst.push_back(c);
  };
  for (double mt : {13.0, 15.0, 18.0, 22.0, 24.0}) add(cfg.training, "train", mt * 1e-3, 50.0);
  add(cfg.within, "within", 20e-3, 50.0);
  add(cfg.ood, "ood", 10e-3, 50.0);
  add(cfg.ood, "ood", 30e-3, 50.0);
  for (double f : {40.0, 60.0, 100.0}) add(cfg.freq, "freq", 20e-3, f);

  // 1.75 periods of the 50 Hz excitation at 128 steps per period.
  cfg.solver.dt = 0.02 / 128.0;
  cfg.solver.n_steps = 224;
  cfg.solver.newton_tol = 1e-13;
  cfg.solver.newton_max_iter = 60;

  cfg.pod_i.rank = 3;
  cfg.pod_phi.rank = 3;
  cfg.deim.target = 0.9999;

  cfg.node.hidden = {168, 168, 168, 168};
  cfg.node.train.batch_size = 8;
  cfg.node.train.val_fraction = 0.25;
  cfg.node.train.grad_clip = 0.5;
  cfg.node.train.lr_decay_factor = 0.6;
  cfg.node.stages = {{8, 4, 3e-4, 1800}, {32, 0, 1e-4, 600}};
  return cfg;
}

namespace {

const char* mode_name(OutputMode m) {
  switch (m) {
    case OutputMode::Full: return "full";
    case OutputMode::Symmetric: return "symmetric";
    case OutputMode::Spd: return "spd";
  }
  return "full";
}

struct Parser {
  std::vector<std::string> errors;

  template <typename T>
  void get(const json& j, const std::string& path, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const std::exception& e) {
      errors.push_back(path + key + ": " + e.what());
    }
  }

  void check(bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  }
};

void parse_cases(Parser& p, const json& j, const std::string& key,
                 const std::string& base, std::vector<CaseSpec>& dst) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_array()) {
    p.errors.push_back("excitations." + key + ": must be an array");
    return;
  }
  dst.clear();
  int idx = 0;
  for (const json& e : j.at(key)) {
    CaseSpec c;
    c.name = base + std::to_string(idx++);
    std::string path = "excitations." + key + "[" + std::to_string(idx - 1) + "].";
    p.get(e, path, "B0", c.excitation.B0);
    p.get(e, path, "freq", c.excitation.freq);
    if (e.contains("direction")) {
      auto d = e.at("direction");
      if (d.is_array() && d.size() == 3)
        c.excitation.direction = Vec3(d[0].get<double>(), d[1].get<double>(),
                                      d[2].get<double>());
      else
        p.errors.push_back(path + "direction: must be a 3-vector");
    }
    p.check(c.excitation.B0 > 0.0, path + "B0: must be > 0");
    p.check(c.excitation.freq > 0.0, path + "freq: must be > 0");
    dst.push_back(c);
  }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigParseError({std::string("invalid JSON: ") + e.what()});
  }

  RunConfig cfg = default_config();
  Parser p;

  p.get(j, "", "seed", cfg.seed);
  p.get(j, "", "output_dir", cfg.output_dir);

  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    p.get(m, "mesh.", "length", cfg.mesh.length);
    p.get(m, "mesh.", "width", cfg.mesh.width);
    p.get(m, "mesh.", "nx", cfg.mesh.nx);
    p.get(m, "mesh.", "nz", cfg.mesh.nz);
    if (m.contains("helix") && !m["helix"].is_null()) {
      HelixSpec h;
      p.get(m["helix"], "mesh.helix.", "radius", h.radius);
      p.get(m["helix"], "mesh.helix.", "pitch", h.pitch);
      p.get(m["helix"], "mesh.helix.", "phase", h.phase);
      cfg.mesh.helix = h;
    }
    p.check(cfg.mesh.length > 0.0, "mesh.length: must be > 0");
    p.check(cfg.mesh.width > 0.0, "mesh.width: must be > 0");
    p.check(cfg.mesh.nx >= 1, "mesh.nx: must be >= 1");
    p.check(cfg.mesh.nz >= 1, "mesh.nz: must be >= 1");
    if (cfg.mesh.helix)
      p.check(cfg.mesh.helix->radius > cfg.mesh.width / (2.0 * kPi),
              "mesh.helix.radius: must exceed width/(2*pi)");
  }

  if (j.contains("material")) {
    const json& m = j["material"];
    p.get(m, "material.", "E_c", cfg.material.E_c);
    p.get(m, "material.", "n_exp", cfg.material.n_exp);
    p.get(m, "material.", "eta_floor", cfg.material.eta_floor);
    if (m.contains("K_c")) {
      p.get(m, "material.", "K_c", cfg.material.K_c);
    } else if (m.contains("J_c") || m.contains("thickness")) {
      double jc = 2.36e8, th = 1e-4;
      p.get(m, "material.", "J_c", jc);
      p.get(m, "material.", "thickness", th);
      p.check(jc > 0.0, "material.J_c: must be > 0");
      p.check(th > 0.0, "material.thickness: must be > 0");
      cfg.material.K_c = jc * th;
    }
    p.check(cfg.material.E_c > 0.0, "material.E_c: must be > 0");
    p.check(cfg.material.K_c > 0.0, "material.K_c: must be > 0");
    p.check(cfg.material.n_exp >= 1.0, "material.n_exp: must be >= 1");
    p.check(cfg.material.eta_floor >= 0.0, "material.eta_floor: must be >= 0");
  }

  if (j.contains("excitations")) {
    const json& e = j["excitations"];
    parse_cases(p, e, "training", "train", cfg.training);
    parse_cases(p, e, "within", "within", cfg.within);
    parse_cases(p, e, "ood", "ood", cfg.ood);
    parse_cases(p, e, "frequency", "freq", cfg.freq);
    p.check(!cfg.training.empty(), "excitations.training: must be nonempty");
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    p.get(s, "solver.", "dt", cfg.solver.dt);
    p.get(s, "solver.", "n_steps", cfg.solver.n_steps);
    p.get(s, "solver.", "newton_tol", cfg.solver.newton_tol);
    p.get(s, "solver.", "newton_max_iter", cfg.solver.newton_max_iter);
    p.get(s, "solver.", "line_search_shrink", cfg.solver.line_search_shrink);
    p.get(s, "solver.", "gauge_face", cfg.solver.gauge_face);
    p.check(cfg.solver.dt > 0.0, "solver.dt: must be > 0");
    p.check(cfg.solver.n_steps >= 1, "solver.n_steps: must be >= 1");
    p.check(cfg.solver.newton_tol > 0.0, "solver.newton_tol: must be > 0");
    p.check(cfg.solver.newton_max_iter >= 1, "solver.newton_max_iter: must be >= 1");
    p.check(cfg.solver.line_search_shrink > 0.0 && cfg.solver.line_search_shrink < 1.0,
            "solver.line_search_shrink: must be in (0,1)");
  }

  auto parse_pod_target = [&](const json& src, const std::string& path, PodTarget& t,
                              const char* rank_key, const char* target_key) {
    if (src.contains(rank_key) && !src.at(rank_key).is_null()) {
      int r = 0;
      p.get(src, path, rank_key, r);
      p.check(r >= 1, path + rank_key + ": must be >= 1");
      t.rank = r;
      t.target.reset();
    } else if (src.contains(target_key) && !src.at(target_key).is_null()) {
      double v = 0.0;
      p.get(src, path, target_key, v);
      p.check(v > 0.0 && v <= 1.0, path + target_key + ": must be in (0,1]");
      t.target = v;
      t.rank.reset();
    }
  };

  if (j.contains("pod")) {
    const json& s = j["pod"];
    parse_pod_target(s, "pod.", cfg.pod_i, "rank_i", "target_i");
    parse_pod_target(s, "pod.", cfg.pod_phi, "rank_phi", "target_phi");
    std::string crit = "sum";
    p.get(s, "pod.", "criterion", crit);
    if (crit == "sum")
      cfg.pod_i.criterion = cfg.pod_phi.criterion = EnergyCriterion::SumSigma;
    else if (crit == "energy")
      cfg.pod_i.criterion = cfg.pod_phi.criterion = EnergyCriterion::SumSigmaSquared;
    else
      p.errors.push_back("pod.criterion: must be \"sum\" or \"energy\"");
  }

  if (j.contains("deim")) {
    parse_pod_target(j["deim"], "deim.", cfg.deim, "rank", "target");
    cfg.deim.criterion = cfg.pod_i.criterion;
  }

  if (j.contains("node")) {
    const json& s = j["node"];
    if (s.contains("hidden")) {
      cfg.node.hidden.clear();
      for (const json& h : s["hidden"]) cfg.node.hidden.push_back(h.get<int>());
      for (int h : cfg.node.hidden)
        p.check(h >= 1, "node.hidden: layer sizes must be >= 1");
    }
    std::string mode = mode_name(cfg.node.output_mode);
    p.get(s, "node.", "output", mode);
    if (mode == "full")
      cfg.node.output_mode = OutputMode::Full;
    else if (mode == "symmetric")
      cfg.node.output_mode = OutputMode::Symmetric;
    else if (mode == "spd")
      cfg.node.output_mode = OutputMode::Spd;
    else
      p.errors.push_back("node.output: must be full, symmetric or spd");
    p.get(s, "node.", "activation", cfg.node.activation);
    p.check(cfg.node.activation == "selu", "node.activation: only \"selu\" is supported");
    p.get(s, "node.", "seq_len", cfg.node.train.seq_len);
    p.get(s, "node.", "batch_size", cfg.node.train.batch_size);
    p.get(s, "node.", "lr", cfg.node.train.lr);
    p.get(s, "node.", "epochs", cfg.node.train.epochs);
    p.get(s, "node.", "w_i", cfg.node.train.weights.w_i);
    p.get(s, "node.", "w_phi", cfg.node.train.weights.w_phi);
    p.get(s, "node.", "val_fraction", cfg.node.train.val_fraction);
    p.get(s, "node.", "grad_clip", cfg.node.train.grad_clip);
    p.get(s, "node.", "lr_decay_factor", cfg.node.train.lr_decay_factor);
    p.get(s, "node.", "lr_decay_every", cfg.node.train.lr_decay_every);
    if (s.contains("stages")) {
      cfg.node.stages.clear();
      int idx = 0;
      for (const json& st : s["stages"]) {
        TrainStage stage;
        std::string path = "node.stages[" + std::to_string(idx++) + "].";
        p.get(st, path, "seq_len", stage.seq_len);
        p.get(st, path, "stride", stage.stride);
        p.get(st, path, "lr", stage.lr);
        p.get(st, path, "epochs", stage.epochs);
        p.check(stage.seq_len >= 2, path + "seq_len: must be >= 2");
        p.check(stage.lr >= 0.0, path + "lr: must be >= 0");
        p.check(stage.epochs >= 1, path + "epochs: must be >= 1");
        cfg.node.stages.push_back(stage);
      }
    }
    p.check(cfg.node.train.seq_len >= 2, "node.seq_len: must be >= 2");
    p.check(cfg.node.train.lr >= 0.0, "node.lr: must be >= 0");
    p.check(cfg.node.train.epochs >= 1, "node.epochs: must be >= 1");
    p.check(cfg.node.train.val_fraction >= 0.0 && cfg.node.train.val_fraction < 1.0,
            "node.val_fraction: must be in [0,1)");
  }
  cfg.node.train.seed = cfg.seed;

  if (j.contains("quadrature")) {
    const json& s = j["quadrature"];
    p.get(s, "quadrature.", "far_order", cfg.quadrature.far_order);
    p.get(s, "quadrature.", "outer_order", cfg.quadrature.outer_order);
    p.get(s, "quadrature.", "duffy_order", cfg.quadrature.duffy_order);
    p.get(s, "quadrature.", "near_depth", cfg.quadrature.near_depth);
    for (int o : {cfg.quadrature.far_order, cfg.quadrature.outer_order})
      p.check(o == 1 || o == 3 || o == 7,
              "quadrature: triangle orders must be one of 1, 3, 7");
    p.check(cfg.quadrature.duffy_order >= 2 && cfg.quadrature.duffy_order <= 32,
            "quadrature.duffy_order: must be in [2,32]");
    p.check(cfg.quadrature.near_depth >= 0 && cfg.quadrature.near_depth <= 8,
            "quadrature.near_depth: must be in [0,8]");
  }

  if (!p.errors.empty()) throw ConfigParseError(std::move(p.errors));
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigParseError({"config file does not exist: " + path.string()});
  return parse_config_text(read_text(path));
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;

  json m;
  m["length"] = cfg.mesh.length;
  m["width"] = cfg.mesh.width;
  m["nx"] = cfg.mesh.nx;
  m["nz"] = cfg.mesh.nz;
  if (cfg.mesh.helix)
    m["helix"] = {{"radius", cfg.mesh.helix->radius},
                  {"pitch", cfg.mesh.helix->pitch},
                  {"phase", cfg.mesh.helix->phase}};
  j["mesh"] = m;

  j["material"] = {{"E_c", cfg.material.E_c},
                   {"K_c", cfg.material.K_c},
                   {"n_exp", cfg.material.n_exp},
                   {"eta_floor", cfg.material.eta_floor}};

  auto dump_cases = [](const std::vector<CaseSpec>& cases) {
    json arr = json::array();
    for (const CaseSpec& c : cases) {
      json e;
      e["B0"] = c.excitation.B0;
      e["freq"] = c.excitation.freq;
      e["direction"] = {c.excitation.direction[0], c.excitation.direction[1],
                        c.excitation.direction[2]};
      arr.push_back(e);
    }
    return arr;
  };
  j["excitations"] = {{"training", dump_cases(cfg.training)},
                      {"within", dump_cases(cfg.within)},
                      {"ood", dump_cases(cfg.ood)},
                      {"frequency", dump_cases(cfg.freq)}};

  j["solver"] = {{"dt", cfg.solver.dt},
                 {"n_steps", cfg.solver.n_steps},
                 {"newton_tol", cfg.solver.newton_tol},
                 {"newton_max_iter", cfg.solver.newton_max_iter},
                 {"line_search_shrink", cfg.solver.line_search_shrink},
                 {"gauge_face", cfg.solver.gauge_face}};

  json pod;
  if (cfg.pod_i.rank) pod["rank_i"] = *cfg.pod_i.rank;
  if (cfg.pod_i.target) pod["target_i"] = *cfg.pod_i.target;
  if (cfg.pod_phi.rank) pod["rank_phi"] = *cfg.pod_phi.rank;
  if (cfg.pod_phi.target) pod["target_phi"] = *cfg.pod_phi.target;
  pod["criterion"] = cfg.pod_i.criterion == EnergyCriterion::SumSigma ? "sum" : "energy";
  j["pod"] = pod;

  json deim;
  if (cfg.deim.rank) deim["rank"] = *cfg.deim.rank;
  if (cfg.deim.target) deim["target"] = *cfg.deim.target;
  j["deim"] = deim;

  json stages = json::array();
  for (const TrainStage& st : cfg.node.stages)
    stages.push_back({{"seq_len", st.seq_len},
                      {"stride", st.stride},
                      {"lr", st.lr},
                      {"epochs", st.epochs}});
  j["node"] = {{"hidden", cfg.node.hidden},
               {"output", mode_name(cfg.node.output_mode)},
               {"activation", cfg.node.activation},
               {"seq_len", cfg.node.train.seq_len},
               {"batch_size", cfg.node.train.batch_size},
               {"lr", cfg.node.train.lr},
               {"epochs", cfg.node.train.epochs},
               {"w_i", cfg.node.train.weights.w_i},
               {"w_phi", cfg.node.train.weights.w_phi},
               {"val_fraction", cfg.node.train.val_fraction},
               {"grad_clip", cfg.node.train.grad_clip},
               {"lr_decay_factor", cfg.node.train.lr_decay_factor},
               {"lr_decay_every", cfg.node.train.lr_decay_every},
               {"stages", stages}};

  j["quadrature"] = {{"far_order", cfg.quadrature.far_order},
                     {"outer_order", cfg.quadrature.outer_order},
                     {"duffy_order", cfg.quadrature.duffy_order},
                     {"near_depth", cfg.quadrature.near_depth}};
  return j.dump(1);
}

}  // namespace taperom
