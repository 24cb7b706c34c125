#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fpslab/campaigns.hpp"
#include "fpslab/error.hpp"
#include "fpslab/io.hpp"

namespace {

int cmd_calibrate(const std::string& config) {
  const auto cfg = fpslab::load_config(config);
  try {
    const auto results = fpslab::calibrate_experiment(cfg);
    for (const auto& r : results)
      std::cout << "mesh " << r.profile.mesh << ": kappa " << r.profile.kappa << ", s " << r.profile.self_singularity
                << ", worst variance z " << r.profile.max_variance_z << '\n';
    return 0;
  } catch (const fpslab::Error& e) {
    if (e.code() != fpslab::ErrorCode::kCalibrationFailure) throw;
    std::cerr << e.what() << '\n';
    return 1;
  }
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, std::optional<int> samples,
            std::optional<int> workers, std::optional<std::string> out) {
  auto cfg = fpslab::load_config(config);
  if (seed) cfg.seed = *seed;
  if (samples) cfg.samples = *samples;
  if (workers) cfg.workers = *workers;
  if (out) cfg.out_dir = *out;
  const auto rep = fpslab::run_experiment(cfg);
  std::cout << fpslab::format_report(rep.to_json()) << "results in " << rep.directory << '\n';
  return rep.pass() ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  std::filesystem::path p(dir);
  if (std::filesystem::is_directory(p)) p /= "report.json";
  std::cout << fpslab::format_report(nlohmann::json::parse(fpslab::read_file(p.string())));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks for first passage sets of the planar Gaussian free field"};
  app.require_subcommand(1);

  std::string config;
  auto* calibrate = app.add_subcommand("calibrate", "fit and persist calibration profiles");
  calibrate->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "run the selected tests");
  std::optional<std::uint64_t> seed;
  std::optional<int> samples, workers;
  std::optional<std::string> out;
  run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "master seed");
  run->add_option("--samples", samples, "sample count for every test")->check(CLI::NonNegativeNumber);
  run->add_option("--workers", workers, "worker threads (default: FPSLAB_WORKERS or all cores)")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", out, "output directory");

  std::string dir;
  auto* report = app.add_subcommand("report", "pretty-print a run's report.json");
  report->add_option("DIR", dir, "run directory or report file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*calibrate) return cmd_calibrate(config);
    if (*run) return cmd_run(config, seed, samples, workers, out);
    if (*report) return cmd_report(dir);
  } catch (const std::exception& e) {
    std::cerr << "fpslab: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
