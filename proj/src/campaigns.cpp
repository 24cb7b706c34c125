#include "fpslab/campaigns.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

#include "criteria.hpp"
#include "fpslab/error.hpp"
#include "fpslab/field.hpp"
#include "fpslab/io.hpp"
#include "fpslab/parallel.hpp"
#include "fpslab/rng.hpp"
#include "fpslab/stats.hpp"

namespace fpslab {

using nlohmann::json;
namespace fs = std::filesystem;

int default_workers() {
  if (const char* env = std::getenv("FPSLAB_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string mesh_tag(double mesh) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", mesh);
  return buf;
}

long long mesh_key(double mesh) { return std::llround(mesh * 1e9); }

}  // namespace

// --- profiles -------------------------------------------------------------------

std::string ProfileStore::file_name(double mesh) { return "profile_" + mesh_tag(mesh) + ".json"; }

std::vector<double> ProfileStore::default_probes() {
  std::vector<double> r;
  for (int k = 0; k < 10; ++k) r.push_back(0.1 * k);
  return r;
}

CalibrationProfile ProfileStore::get(double mesh) {
  std::lock_guard lock(mutex_);
  const auto key = mesh_key(mesh);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  CalibrationProfile p;
  const fs::path file = fs::path(dir_) / file_name(mesh);
  if (!dir_.empty() && fs::exists(file)) {
    p = load_profile(file.string());
  } else {
    const auto probes = default_probes();
    p = fit_calibration(build_lattice(DomainSpec::unit_disk(), mesh), probes);
  }
  p.require_calibrated();
  cache_.emplace(key, p);
  return p;
}

json ProfileStore::used() {
  std::lock_guard lock(mutex_);
  json j = json::object();
  for (const auto& [key, p] : cache_) j[mesh_tag(p.mesh)] = p;
  return j;
}

// --- calibration ------------------------------------------------------------------

json CalibrationResult::to_json() const {
  return {{"profile", profile},       {"probe_g", probe_g},       {"variance", variance},
          {"variance_exact", variance_exact}, {"variance_z", variance_z}, {"z_threshold", z_threshold}, {"samples", samples},
          {"fit_pass", fit_pass},     {"monte_carlo_pass", monte_carlo_pass}, {"pass", pass()}};
}

CalibrationResult calibrate_mesh(double mesh, std::span<const double> probe_radii, int samples, std::uint64_t seed,
                                 int workers) {
  if (samples < 100) throw Error(ErrorCode::kTooFewSamples, "calibration needs at least 100 samples");
  const auto dom = build_lattice(DomainSpec::unit_disk(), mesh);
  CalibrationResult res;
  res.profile = fit_calibration(dom, probe_radii);
  res.samples = samples;
  const GreenOracle oracle(dom, res.profile.kappa);
  std::vector<int> probes;
  for (double r : probe_radii) probes.push_back(dom.nearest_interior({r, 0.0}));
  res.probe_g = regularized_diagonal(oracle, res.profile, probes).g_values;
  res.fit_pass = true;
  for (double x : res.profile.residuals) res.fit_pass = res.fit_pass && std::abs(x) < 0.05;

  const std::size_t np = probes.size();
  std::vector<std::vector<double>> sq(np, std::vector<double>(samples));
  res.first_probe_values.resize(samples);
  res.seeds.resize(samples);
  for (int i = 0; i < samples; ++i) res.seeds[i] = derive_seed(seed, i);
  parallel_for(samples, workers, [&](int i) {
    const auto f = sample_gff(oracle, res.seeds[i]);
    for (std::size_t k = 0; k < np; ++k) sq[k][i] = f.phi[probes[k]] * f.phi[probes[k]];
    res.first_probe_values[i] = f.phi[probes[0]];
  });
  // The field is centred, so the mean square estimates the variance.
  // Bonferroni over the probes at family level 1%: erfc(z / sqrt 2) = 0.01 / np.
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::numbers::sqrt2) > 0.01 / static_cast<double>(np) ? lo : hi) = mid;
  }
  res.z_threshold = hi;
  res.monte_carlo_pass = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < np; ++k) {
    const auto ms = mean_se(sq[k]);
    const double exact = oracle.green_diag(probes[k]);
    const double z = ms.se > 0.0 ? (ms.mean - exact) / ms.se : 0.0;
    res.variance.push_back(ms.mean);
    res.variance_exact.push_back(exact);
    res.variance_z.push_back(z);
    worst = std::max(worst, std::abs(z));
    res.monte_carlo_pass = res.monte_carlo_pass && std::abs(z) < res.z_threshold;
  }
  res.profile.max_variance_z = worst;
  return res;
}

// --- catalog ------------------------------------------------------------------------

namespace {

struct Entry {
  TestDefinition def;
  detail::TestBody body;
};

const std::vector<Entry>& entries() {
  static const double lambda = std::sqrt(3.141592653589793 / 8.0);
  static const std::vector<Entry> list = [] {
    std::vector<Entry> e;
    auto add = [&](const char* name, int criterion, const char* description, int min_samples, json defaults,
                   detail::TestBody body) {
      e.push_back({{name, criterion, description, min_samples, std::move(defaults)}, body});
    };
    add("calibration", 1, "fitted Green diagonal on the unit disk against the analytic one", 100,
        {{"mesh", 0.01}, {"samples", 10000}, {"probe_radii", ProfileStore::default_probes()}}, detail::run_calibration);
    add("hitting_time", 2, "hitting-time observable at the origin against the one-sided hitting law", 100,
        {{"meshes", {0.02, 0.01}},
         {"levels", {0.5, 1.0}},
         {"z", {0.0, 0.0}},
         {"samples", 10000},
         {"walk_paths", 100000},
         {"walk_steps", 25}},
        detail::run_hitting_time);
    const json bridge = {{"inner_radius", 0.3},   {"meshes", {0.04, 0.02}},  {"samples", 5000},
                         {"oracle_paths", 100000}, {"oracle_steps", 200},     {"oracle_depth", 8},
                         {"reference_paths", 1000000}, {"u_outer", 0.0}};
    json fps = bridge;
    fps["a"] = 1.0;
    fps["u_inner"] = -1.0;
    add("extremal_distance", 3, "annulus extremal-length decrement of the FPS against a bridge hitting law", 100, fps,
        detail::run_extremal_distance);
    json tvs = bridge;
    tvs["a"] = lambda;
    tvs["b"] = lambda;
    tvs["u_inner"] = -lambda;
    add("tvs_extremal_distance", 4, "annulus extremal-length decrement of the TVS against a two-barrier bridge law",
        100, tvs, detail::run_tvs_extremal_distance);
    add("mean_measure", 5, "mean nu mass of a window equals a times its area", 2,
        {{"mesh", 0.02}, {"levels", {0.5, 1.0, 2.0}}, {"samples", 10000}, {"window_radius", 0.5}, {"allowance", 0.05}},
        detail::run_mean_measure);
    add("minkowski_gauge", 6, "gauge-weighted neighbourhood mass approaches the nu mass as r shrinks", 2,
        {{"mesh", 0.004}, {"a", 0.5}, {"radii", {0.05, 0.02, 0.01}}, {"samples", 500}, {"window_radius", 0.5}},
        detail::run_minkowski_gauge);
    add("level_recovery", 7, "level estimated from conformal radii near the boundary", 2,
        {{"mesh", 0.005},
         {"a", 1.0},
         {"gamma", 0.5},
         {"rho", 0.95},
         {"angles", 0},
         {"samples", 2000},
         {"tolerance", 0.1}},
        detail::run_level_recovery);
    add("gmc_conditional", 8, "conditional chaos mass: resampling against the closed form", 2,
        {{"mesh", 0.02}, {"b", lambda}, {"gammas", {0.0, 0.2, 0.3}}, {"samples", 2000}, {"inner", 50},
         {"window_radius", 0.5}},
        detail::run_gmc_conditional);
    add("structural_invariants", 9, "monotonicity, connectivity, positivity, symmetry, avoidance, containment", 1,
        {{"mesh", 0.02},
         {"inner_radius", 0.3},
         {"u_outer", 0.0},
         {"u_inner", -1.2},
         {"levels", {0.5, 1.0}},
         {"u_shift", 0.3},
         {"b", 0.8},
         {"samples", 10000}},
        detail::run_structural_invariants);
    add("tvs_threshold", 10, "frequency of macroscopic TVS below and above the 2 lambda gap", 2,
        {{"meshes", {0.04, 0.02, 0.01}}, {"sums_over_lambda", {1.0, 3.0}}, {"radius", 0.95}, {"info_radius", 0.75},
         {"samples", 10000}},
        detail::run_tvs_threshold);
    add("brute_force_oracles", 11, "extraction, edge crossings and Green values against brute force", 1,
        {{"samples", 1000},
         {"edge_keys", 100000},
         {"bridge_paths", 100000},
         {"bridge_steps", {1000, 4000}},
         {"dense_tolerance", 1e-10}},
        detail::run_brute_force_oracles);
    add("h_minus_one_trend", 12, "H^-1 distance between the field and the recentred nu shrinks with a", 2,
        {{"mesh", 0.02}, {"levels", {1.0, 2.0, 4.0}}, {"samples", 500}}, detail::run_h_minus_one_trend);
    return e;
  }();
  return list;
}

const Entry& find_entry(const std::string& name) {
  for (const auto& e : entries())
    if (e.def.name == name) return e;
  throw Error(ErrorCode::kInvalidArgument, "unknown test '" + name + "'");
}

}  // namespace

const std::vector<TestDefinition>& test_catalog() {
  static const std::vector<TestDefinition> defs = [] {
    std::vector<TestDefinition> d;
    for (const auto& e : entries()) d.push_back(e.def);
    return d;
  }();
  return defs;
}

const TestDefinition& find_test(const std::string& name) { return find_entry(name).def; }

const TestDefinition& find_test(int criterion) {
  for (const auto& d : test_catalog())
    if (d.criterion == criterion) return d;
  throw Error(ErrorCode::kInvalidArgument, "no test for criterion " + std::to_string(criterion));
}

json TestReport::to_json() const {
  json j = {{"name", name}, {"criterion", criterion}, {"pass", pass}, {"seconds", seconds}, {"params", params}};
  for (const char* key : {"n", "statistic", "p_value", "reject", "law"})
    if (summary.is_object() && summary.contains(key)) j[key] = summary[key];
  if (!error.empty()) j["error"] = error;
  json extra = summary.is_object() ? summary : json::object();
  for (const char* key : {"n", "statistic", "p_value", "reject", "law"}) extra.erase(key);
  if (!extra.empty()) j["details"] = extra;
  j["checks"] = json::array();
  for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["series"] = json::array();
  for (const auto& s : series) j["series"].push_back({{"name", s.name}, {"n", s.size()}});
  return j;
}

TestReport run_test(const std::string& name, const json& params, const RunOptions& opts, ProfileStore& profiles) {
  const auto t0 = std::chrono::steady_clock::now();
  TestReport r;
  r.name = name;
  try {
    const auto& e = find_entry(name);
    r.criterion = e.def.criterion;
    json merged = e.def.defaults;
    if (!params.is_null()) {
      if (!params.is_object()) throw Error(ErrorCode::kInvalidArgument, "test params must be an object");
      merged.merge_patch(params);
    }
    if (opts.samples) merged["samples"] = *opts.samples;
    r.params = merged;
    const int n = merged.at("samples");
    if (n < e.def.min_samples)
      throw Error(ErrorCode::kTooFewSamples, name + " needs at least " + std::to_string(e.def.min_samples) +
                                                 " samples, got " + std::to_string(n));
    RunOptions o = opts;
    o.workers = std::max(1, opts.workers);
    detail::TestContext ctx{merged, o, profiles, derive_seed(opts.seed, fnv1a(name)), r};
    e.body(ctx);
    r.pass = !r.checks.empty();
    for (const auto& c : r.checks) r.pass = r.pass && c.pass;
  } catch (const std::exception& ex) {
    r.pass = false;
    r.error = ex.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

// --- experiments -------------------------------------------------------------------

std::string ExperimentConfig::hash() const {
  json j;
  j["tests"] = json::array();
  for (const auto& t : tests) j["tests"].push_back({{"name", t.name}, {"params", t.params}});
  j["meshes"] = meshes;
  j["probe_radii"] = probe_radii;
  j["calibration_samples"] = calibration_samples;
  j["seed"] = seed;
  j["samples"] = samples ? json(*samples) : json(nullptr);
  j["version"] = kVersion;
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return out.str();
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config must be a JSON object");
  ExperimentConfig c;
  if (!j.contains("tests")) {
    for (const auto& d : test_catalog()) c.tests.push_back({d.name, json::object()});
  } else {
    for (const auto& t : j.at("tests")) {
      ExperimentConfig::Selected s;
      if (t.is_string()) {
        s.name = t.get<std::string>();
        s.params = json::object();
      } else {
        s.name = t.at("name").get<std::string>();
        s.params = t.value("params", json::object());
      }
      find_test(s.name);
      c.tests.push_back(std::move(s));
    }
  }
  c.meshes = j.value("meshes", std::vector<double>{0.02, 0.01});
  for (std::size_t k = 0; k < c.meshes.size(); ++k) {
    if (!(c.meshes[k] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "meshes must be positive");
    if (k > 0 && !(c.meshes[k] < c.meshes[k - 1]))
      throw Error(ErrorCode::kInvalidArgument, "mesh list must be sorted descending");
  }
  c.probe_radii = j.value("probe_radii", ProfileStore::default_probes());
  c.calibration_samples = j.value("calibration_samples", c.calibration_samples);
  c.seed = j.value("seed", c.seed);
  if (j.contains("samples") && !j.at("samples").is_null()) c.samples = j.at("samples").get<int>();
  c.workers = j.value("workers", default_workers());
  c.out_dir = j.value("out_dir", c.out_dir);
  c.profile_dir = j.value("profile_dir", std::string());
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
  return config_from_json(j);
}

namespace {

std::string profile_dir_of(const ExperimentConfig& cfg) {
  return cfg.profile_dir.empty() ? (fs::path(cfg.out_dir) / "profiles").string() : cfg.profile_dir;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path.string(), j.dump(2) + "\n"); }

}  // namespace

std::vector<CalibrationResult> calibrate_experiment(const ExperimentConfig& cfg) {
  const fs::path dir = profile_dir_of(cfg);
  fs::create_directories(dir);
  std::vector<CalibrationResult> out;
  json report = json::array();
  std::string failures;
  for (std::size_t k = 0; k < cfg.meshes.size(); ++k) {
    auto res = calibrate_mesh(cfg.meshes[k], cfg.probe_radii, cfg.calibration_samples,
                              derive_seed(cfg.seed, fnv1a("calibrate:" + mesh_tag(cfg.meshes[k]))), cfg.workers);
    auto j = res.to_json();
    j["mesh"] = cfg.meshes[k];
    report.push_back(j);
    if (res.pass()) {
      write_json(dir / ProfileStore::file_name(cfg.meshes[k]), res.profile);
    } else {
      std::ostringstream msg;
      msg << "mesh " << cfg.meshes[k] << ": residuals";
      for (double x : res.profile.residuals) msg << ' ' << x;
      msg << "; variance z";
      for (double x : res.variance_z) msg << ' ' << x;
      failures += (failures.empty() ? "" : "; ") + msg.str();
    }
    out.push_back(std::move(res));
  }
  write_json(dir / "calibration.json", report);
  if (!failures.empty()) throw Error(ErrorCode::kCalibrationFailure, failures);
  return out;
}

bool ExperimentReport::pass() const {
  for (const auto& t : tests)
    if (!t.pass) return false;
  return true;
}

json ExperimentReport::to_json() const {
  json j = {{"config_hash", config_hash}, {"version", version}, {"profiles", profiles}, {"seconds", seconds},
            {"pass", pass()}};
  j["tests"] = json::array();
  for (const auto& t : tests) j["tests"].push_back(t.to_json());
  return j;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.config_hash = cfg.hash();
  rep.version = kVersion;
  const fs::path dir = fs::path(cfg.out_dir) / rep.config_hash;
  fs::create_directories(dir);
  rep.directory = dir.string();
  ProfileStore profiles(profile_dir_of(cfg));
  RunOptions opts;
  opts.seed = cfg.seed;
  opts.workers = cfg.workers;
  opts.samples = cfg.samples;
  for (const auto& sel : cfg.tests) {
    auto r = run_test(sel.name, sel.params, opts, profiles);
    for (std::size_t k = 0; k < r.series.size(); ++k) {
      const auto& s = r.series[k];
      const std::string file = k == 0 ? sel.name + ".csv" : s.name + ".csv";
      write_series_csv(s, (dir / file).string());
    }
    rep.tests.push_back(std::move(r));
  }
  rep.profiles = profiles.used();
  rep.seconds = seconds_since(t0);
  write_json(dir / "report.json", rep.to_json());
  return rep;
}

std::string format_report(const json& report) {
  std::ostringstream out;
  out << "config " << report.value("config_hash", "?") << "  (" << report.value("version", "?") << ")\n";
  out << std::fixed << std::setprecision(1) << "wall time " << report.value("seconds", 0.0) << " s\n\n";
  for (const auto& t : report.value("tests", json::array())) {
    out << (t.value("pass", false) ? "PASS " : "FAIL ") << std::left << std::setw(24) << t.value("name", "?")
        << std::right << std::setw(8) << std::setprecision(1) << t.value("seconds", 0.0) << " s";
    if (t.contains("statistic") && t["statistic"].is_number())
      out << "  statistic " << std::setprecision(4) << t["statistic"].get<double>();
    if (t.contains("p_value") && t["p_value"].is_number())
      out << "  p " << std::setprecision(4) << t["p_value"].get<double>();
    out << '\n';
    if (t.contains("error")) out << "     error: " << t["error"].get<std::string>() << '\n';
    for (const auto& c : t.value("checks", json::array()))
      out << "     " << (c.value("pass", false) ? "ok   " : "FAIL ") << c.value("name", "?") << '\n';
  }
  const bool pass = report.value("pass", false);
  out << '\n' << (pass ? "all tests passed" : "some tests failed") << '\n';
  return out.str();
}

}  // namespace fpslab
