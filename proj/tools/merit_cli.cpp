#include <iostream>

#include "CLI11.hpp"
#include "merit/core/container.hpp"
#include "merit/harness.hpp"
#include "merit/kernels/kernels.hpp"

namespace {

merit::harness::ExperimentConfig load_config(const std::string& path, std::uint64_t* seed,
                                             const std::string& out) {
  merit::harness::ExperimentConfig cfg;
  if (!path.empty()) cfg = merit::harness::ExperimentConfig::from_kv(merit::read_text(path));
  if (seed != nullptr) cfg.seed = *seed;
  if (!out.empty()) cfg.out_dir = out;
  return cfg;
}

std::vector<merit::harness::AblateCell> default_cells() {
  using merit::fusion::Modality;
  using merit::harness::RadarMode;
  return {{Modality::kBoth, true, RadarMode::kAnt},
          {Modality::kRadarOnly, true, RadarMode::kAnt},
          {Modality::kImuOnly, true, RadarMode::kAnt},
          {Modality::kBoth, false, RadarMode::kAnt},
          {Modality::kBoth, true, RadarMode::kIdx}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic radar+IMU to ECG reconstruction experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param = "alpha", runs_csv;
  std::uint64_t seed = 1;
  bool seed_set = false, force = false;
  std::vector<double> values;

  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--seed", seed, "base seed (overrides config)")->each([&](std::string) {
    seed_set = true;
  });
  app.add_flag("--force", force, "redo completed work");

  auto* gen = app.add_subcommand("generate", "build the synthetic dataset");
  auto* run = app.add_subcommand("run", "full pipeline run");
  auto* ablate = app.add_subcommand("ablate", "modality/ICA/radar-mode ablation matrix");
  auto* sweep = app.add_subcommand("sweep", "hyperparameter sweep");
  sweep->add_option("--param", param, "alpha or batch_size");
  sweep->add_option("--values", values, "sweep values")->expected(-1);
  auto* report = app.add_subcommand("report", "tables and plots from finished runs");
  report->add_option("--runs", runs_csv, "comma-separated run directories");

  CLI11_PARSE(app, argc, argv);

  try {
    merit::harness::ExperimentConfig cfg =
        load_config(config_path, seed_set ? &seed : nullptr, out_dir);
    std::cerr << "kernel lane: " << merit::kern::active_name() << "\n";

    if (gen->parsed()) {
      std::string dir = merit::harness::cmd_generate(cfg, force);
      std::cout << "dataset: " << dir << "\n";
    } else if (run->parsed()) {
      merit::harness::RunRecord r = merit::harness::cmd_run(cfg, force);
      std::cout << "run: " << r.run_dir << "\n"
                << "pooled CC " << r.reports.at("pooled").cc << "\n";
    } else if (ablate->parsed()) {
      auto cells = default_cells();
      auto records = merit::harness::cmd_ablate(cfg, cells, force);
      for (const auto& r : records)
        std::cout << r.method << ": pooled CC " << r.reports.at("pooled").cc << "\n";
      if (records.size() != cells.size()) return 1;
    } else if (sweep->parsed()) {
      if (values.empty()) values = {1.0, 5.0, 9.0, 13.0};
      auto records = merit::harness::cmd_sweep(cfg, param, values, force);
      std::cout << "sweep wrote " << records.size() << " runs\n";
    } else if (report->parsed()) {
      std::vector<std::string> dirs;
      std::size_t pos = 0;
      while (pos <= runs_csv.size() && !runs_csv.empty()) {
        std::size_t comma = runs_csv.find(',', pos);
        dirs.push_back(runs_csv.substr(pos, comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (dirs.empty()) {
        std::cerr << "report: --runs required\n";
        return 1;
      }
      std::string dir = out_dir.empty() ? cfg.out_dir + "/report" : out_dir;
      merit::harness::cmd_report(dirs, dir);
      std::cout << "report: " << dir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
