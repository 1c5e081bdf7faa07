#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "taperom/pipeline.hpp"

using namespace taperom;

namespace {

int fail_with_report(const std::string& kind, const std::string& message,
                     const std::string& producer = "") {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  if (!producer.empty()) j["producer"] = producer;
  std::cerr << j.dump() << "\n";
  return 1;
}

Pipeline make_pipeline(const std::string& config_path, const std::string& out_override) {
  RunConfig cfg = parse_config(config_path);
  std::string out = cfg.output_dir;
  if (!out_override.empty()) out = out_override;
  if (const char* env = std::getenv("TAPEROM_OUTPUT_DIR")) out = env;
  return Pipeline(std::move(cfg), out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integral-equation tape solver with POD-DEIM and learned ROM backends"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  std::string out_dir;
  app.add_option("--config", config_path, "path to the run configuration")
      ->capture_default_str();
  app.add_option("--out", out_dir, "output directory override");

  auto* mesh = app.add_subcommand("mesh", "mesh commands");
  auto* mesh_gen = mesh->add_subcommand("gen", "generate the tape mesh");

  auto* fom = app.add_subcommand("fom", "full-order model commands");
  auto* fom_run = fom->add_subcommand("run", "run full-order transients");
  std::string fom_case = "all";
  fom_run->add_option("--case", fom_case, "case name (or 'all')")->capture_default_str();

  auto* rom = app.add_subcommand("rom", "reduced-order model commands");
  auto* rom_pod = rom->add_subcommand("build-pod", "build the POD basis and projections");
  auto* rom_deim = rom->add_subcommand("build-deim", "build the DEIM operator");
  auto* rom_run = rom->add_subcommand("run", "run a reduced-order transient");
  std::string backend = "deim-newton";
  std::string rom_case;
  rom_run->add_option("--backend", backend, "deim-newton | deim-lagged | node")
      ->capture_default_str();
  rom_run->add_option("--case", rom_case, "case name")->required();

  auto* node_cmd = app.add_subcommand("node", "learned-operator commands");
  auto* node_train = node_cmd->add_subcommand("train", "train the reduced resistance network");

  auto* analyze = app.add_subcommand("analyze", "post-processing");
  auto* an_err = analyze->add_subcommand("errors", "error statistics CSV");
  auto* an_loss = analyze->add_subcommand("losses", "AC-loss comparison CSV");
  auto* an_flops = analyze->add_subcommand("flops", "per-step cost model JSON");
  std::string an_backend = "node", an_case;
  for (auto* sub : {an_err, an_loss}) {
    sub->add_option("--backend", an_backend, "deim-newton | deim-lagged | node");
    sub->add_option("--case", an_case, "case name")->required();
  }

  auto* repro = app.add_subcommand("repro", "reproduction pipelines");
  auto* repro_desk = repro->add_subcommand(
      "paper-desk", "run the full desk-scale pipeline and emit all tables");

  CLI11_PARSE(app, argc, argv);

  try {
    Pipeline p = make_pipeline(config_path, out_dir);
    if (mesh_gen->parsed()) {
      p.mesh_gen();
      std::cout << "mesh: " << p.mesh().n_e() << " interior edges, " << p.mesh().n_f()
                << " faces\n";
    } else if (fom_run->parsed()) {
      if (fom_case == "all")
        p.fom_run_all();
      else
        p.fom_run(fom_case);
      std::cout << "fom run complete\n";
    } else if (rom_pod->parsed()) {
      p.build_pod();
      std::cout << "pod: r_i=" << p.rom_operators().r_i()
                << " r_phi=" << p.rom_operators().r_phi() << "\n";
    } else if (rom_deim->parsed()) {
      p.build_deim();
      std::cout << "deim: r=" << p.deim_operator().r_deim()
                << " cond=" << p.deim_operator().cond_ptvf << "\n";
    } else if (rom_run->parsed()) {
      p.rom_run(backend, rom_case);
      std::cout << "rom run complete: " << backend << " " << rom_case << "\n";
    } else if (node_train->parsed()) {
      p.node_train();
      std::cout << "node training complete\n";
    } else if (an_err->parsed()) {
      p.analyze_errors(an_backend, an_case);
      std::cout << "errors table written\n";
    } else if (an_loss->parsed()) {
      p.analyze_losses(an_backend, an_case);
      std::cout << "losses table written\n";
    } else if (an_flops->parsed()) {
      p.analyze_flops();
      std::cout << "flops table written\n";
    } else if (repro_desk->parsed()) {
      ReproSummary s = p.repro_paper_desk();
      std::cout << "repro paper-desk complete\n"
                << "  pod r_i=" << s.r_i << " r_phi=" << s.r_phi
                << " deim r=" << s.r_deim << "\n"
                << "  within mean error [A/m]: deim-newton="
                << s.within.at("deim-newton").mean << " node=" << s.within.at("node").mean
                << " lagged=" << s.within.at("deim-lagged").mean << "\n"
                << "  projection floor: " << s.projection_floor_mean << "\n"
                << "  flops/step: node=" << s.flops_node << " deim=" << s.flops_deim
                << " ratio=" << s.flops_ratio << "\n";
    }
    return 0;
  } catch (const DependencyError& e) {
    return fail_with_report("missing-dependency", e.missing, e.producer_command);
  } catch (const ConfigParseError& e) {
    return fail_with_report("config", e.what());
  } catch (const ConfigError& e) {
    return fail_with_report("config", e.what());
  } catch (const IoError& e) {
    return fail_with_report("io", e.what());
  } catch (const StepFailure& e) {
    return fail_with_report("solver", e.what());
  } catch (const std::exception& e) {
    return fail_with_report("internal", e.what());
  }
}
