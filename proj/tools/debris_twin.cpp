#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

#include "debris/pipeline.hpp"

namespace {

void print_timings(const std::vector<debris::StageTiming>& timings) {
  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  for (const auto& t : timings)
    report.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  std::cout << report.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"debris-twin: occlusion-aware semantic point-cloud fusion,\n"
               "debris volumetry and wind risk heatmaps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int threads = 1;
  app.add_option("--config", config_path, "pipeline config file")->required();
  app.add_option("--threads", threads, "worker thread cap (1 = sequential)");
  app.add_option("--out", out_override, "override the config's output directory");

  auto* cmd_depth = app.add_subcommand("depth", "build per-camera depth maps");
  auto* cmd_fuse = app.add_subcommand("fuse", "depth-aware label fusion to a PLY");
  auto* cmd_risk = app.add_subcommand("risk", "volumetry, instances and risk maps");
  auto* cmd_all = app.add_subcommand("all", "full pipeline: depth, fuse, risk");

  CLI11_PARSE(app, argc, argv);

  try {
    debris::PipelineConfig cfg = debris::PipelineConfig::load(config_path);
    cfg.threads = threads;
    if (!out_override.empty()) cfg.outdir = out_override;
    cfg.validate();

    std::vector<debris::StageTiming> timings;
    if (cmd_depth->parsed()) {
      std::cerr << "[debris-twin] depth stage\n";
      timings.push_back(debris::run_depth(cfg));
    } else if (cmd_fuse->parsed()) {
      std::cerr << "[debris-twin] fuse stage\n";
      timings.push_back(debris::run_fuse(cfg));
    } else if (cmd_risk->parsed()) {
      std::cerr << "[debris-twin] risk stage\n";
      timings.push_back(debris::run_risk(cfg));
    } else if (cmd_all->parsed()) {
      std::cerr << "[debris-twin] full pipeline\n";
      timings = debris::run_all(cfg);
    }
    print_timings(timings);
    std::cout << cfg.outdir << "\n";
    return 0;
  } catch (const debris::DebrisError& e) {
    std::cerr << "error [" << debris::DebrisError::kind_name(e.kind()) << "] "
              << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
