#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpslab/observables.hpp"
#include "fpslab/potential.hpp"

namespace fpslab {

/// Calibration profiles keyed by mesh. Profiles found in `dir` (written by
/// `fpslab calibrate`) are used as is; other meshes are fitted on demand.
class ProfileStore {
 public:
  explicit ProfileStore(std::string dir = {}) : dir_(std::move(dir)) {}

  CalibrationProfile get(double mesh);
  /// Profiles handed out so far, keyed by mesh.
  nlohmann::json used();
  static std::string file_name(double mesh);
  static std::vector<double> default_probes();

 private:
  std::string dir_;
  std::mutex mutex_;
  std::map<long long, CalibrationProfile> cache_;
};

struct RunOptions {
  std::uint64_t seed = 1;
  int workers = 1;
  std::optional<int> samples;  // replaces every test's main sample count
};

struct Check {
  std::string name;
  bool pass = false;
  nlohmann::json detail;
};

struct TestReport {
  std::string name;
  int criterion = 0;
  bool pass = false;
  std::string error;       // set when the test aborted
  nlohmann::json summary;  // headline comparison: n, statistic, p_value, reject, law
  nlohmann::json params;
  std::vector<Check> checks;
  std::vector<ObservableSeries> series;  // series[0] goes to {name}.csv
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct TestDefinition {
  std::string name;
  int criterion = 0;
  std::string description;
  int min_samples = 1;
  nlohmann::json defaults;
};

const std::vector<TestDefinition>& test_catalog();
/// Throws InvalidArgument for unknown names.
const TestDefinition& find_test(const std::string& name);
const TestDefinition& find_test(int criterion);

/// Run one test with `params` layered over its defaults. Failures inside
/// the test are reported, not thrown.
TestReport run_test(const std::string& name, const nlohmann::json& params, const RunOptions& opts,
                    ProfileStore& profiles);

struct CalibrationResult {
  CalibrationProfile profile;
  std::vector<double> probe_g;         // fitted g at each probe
  std::vector<double> variance;        // Monte Carlo variance at each probe
  std::vector<double> variance_exact;  // G(z,z) at each probe
  std::vector<double> variance_z;      // (variance - exact) / SE
  double z_threshold = 0.0;            // per probe, Bonferroni at 1%
  std::vector<double> first_probe_values;  // field at probe 0, per sample
  std::vector<std::uint64_t> seeds;
  int samples = 0;
  bool fit_pass = false;
  bool monte_carlo_pass = false;

  bool pass() const { return fit_pass && monte_carlo_pass; }
  nlohmann::json to_json() const;
};

/// Fit kappa and s on the unit disk at `mesh`, then check sample variances
/// at the probes against the exact diagonal (3 SE each).
CalibrationResult calibrate_mesh(double mesh, std::span<const double> probe_radii, int samples, std::uint64_t seed,
                                 int workers);

struct ExperimentConfig {
  struct Selected {
    std::string name;
    nlohmann::json params;
  };
  std::vector<Selected> tests;
  std::vector<double> meshes;  // calibration meshes, descending
  std::vector<double> probe_radii;
  int calibration_samples = 10000;
  std::uint64_t seed = 1;
  std::optional<int> samples;
  int workers = 1;
  std::string out_dir = "fpslab-out";
  std::string profile_dir;  // defaults to {out_dir}/profiles

  /// Hash of everything that affects results (not workers or paths).
  std::string hash() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

struct ExperimentReport {
  std::string config_hash;
  std::string version;
  std::string directory;
  nlohmann::json profiles;
  std::vector<TestReport> tests;
  double seconds = 0.0;

  bool pass() const;
  nlohmann::json to_json() const;
};

/// Write calibration profiles for every configured mesh; throws
/// CalibrationFailure (after writing the report) if any mesh fails.
std::vector<CalibrationResult> calibrate_experiment(const ExperimentConfig& cfg);

/// Run the selected tests and write {out}/{hash}/{test}.csv and report.json.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Human-readable summary of a report.json document.
std::string format_report(const nlohmann::json& report);

inline constexpr const char* kVersion = "fpslab 0.1.0";

}  // namespace fpslab
