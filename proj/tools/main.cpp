#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "protorep/errors.hpp"
#include "protorep/experiment.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{
      "protorep: reward-aware proto-representation toolkit "
      "(learning, shaping, option discovery, exploration, transfer)"};
  app.require_subcommand(1);

  std::string run_config, sweep_config, summarize_path;
  std::string heat_csv, heat_env, heat_variant = "standard";
  std::string out_override;
  int workers = 0;
  int heat_row = 0;

  CLI::App* run = app.add_subcommand("run", "execute a config over its seed grid");
  run->add_option("config", run_config, "key = value config file")->required();
  run->add_option("--out", out_override, "override the config's output directory");
  run->add_option("--workers", workers, "worker threads (default: PROTOREP_WORKERS or 1)");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "grid-search a config, then re-run the winner with fresh seeds");
  sweep->add_option("config", sweep_config, "key = value config file")->required();
  sweep->add_option("--out", out_override, "override the config's output directory");
  sweep->add_option("--workers", workers, "worker threads (default: PROTOREP_WORKERS or 1)");

  CLI::App* summarize =
      app.add_subcommand("summarize", "recompute summary.csv from raw/ series");
  summarize->add_option("dir", summarize_path, "artifact directory")->required();

  CLI::App* heatmap =
      app.add_subcommand("heatmap", "render a stored vector over a grid map");
  heatmap->add_option("csv", heat_csv, "vector or square-matrix CSV")->required();
  heatmap->add_option("map", heat_env, "grid environment name")->required();
  heatmap->add_option("--variant", heat_variant, "map variant (default standard)");
  heatmap->add_option("--row", heat_row, "matrix row to render (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const std::optional<fs::path> out =
        out_override.empty() ? std::nullopt : std::optional<fs::path>(out_override);
    if (run->parsed()) {
      const auto plan = protorep::make_plan(protorep::KvConfig::load(run_config), out);
      protorep::run_experiment(plan, protorep::resolve_workers(workers));
    } else if (sweep->parsed()) {
      const auto plan = protorep::make_plan(protorep::KvConfig::load(sweep_config), out);
      protorep::sweep_experiment(plan, protorep::resolve_workers(workers));
    } else if (summarize->parsed()) {
      protorep::summarize_dir(summarize_path);
    } else if (heatmap->parsed()) {
      protorep::heatmap_file(heat_csv, heat_env, heat_variant, heat_row);
    }
  } catch (const protorep::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const protorep::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
