#include "criteria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "fpslab/bridge.hpp"
#include "fpslab/error.hpp"
#include "fpslab/local_sets.hpp"
#include "fpslab/observables.hpp"
#include "fpslab/parallel.hpp"
#include "fpslab/rng.hpp"
#include "fpslab/stats.hpp"

namespace fpslab::detail {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) { return derive_seed(seed, 0x5eed0000ull + tag); }

std::string tag(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

struct Lattice {
  std::shared_ptr<const LatticeDomain> dom;
  BoundaryData u;
  std::shared_ptr<const Problem> problem;
};

Lattice make_lattice(const DomainSpec& spec, double mesh, ProfileStore& profiles) {
  Lattice l;
  l.dom = std::make_shared<const LatticeDomain>(build_lattice(spec, mesh));
  l.u = boundary_data_from_spec(*l.dom);
  l.problem = make_problem(l.dom, l.u, profiles.get(mesh));
  return l;
}

std::vector<double> disk_indicator(const LatticeDomain& dom, double radius) {
  std::vector<double> f(dom.interior_count(), 0.0);
  for (int v = 0; v < dom.interior_count(); ++v)
    if (std::abs(dom.interior_point(v)) < radius) f[v] = 1.0;
  return f;
}

std::vector<std::uint64_t> seeds_for(std::uint64_t seed, int n) {
  std::vector<std::uint64_t> s(n);
  for (int i = 0; i < n; ++i) s[i] = derive_seed(seed, i);
  return s;
}

json ks_json(const KsResult& k, const ReferenceLaw& law) {
  return {{"n", k.n}, {"statistic", k.statistic}, {"p_value", k.p_value}, {"reject", k.reject}, {"law", law.describe()}};
}

void add_check(TestReport& r, std::string name, bool pass, json detail) {
  r.checks.push_back({std::move(name), pass, std::move(detail)});
}

void add_series(TestReport& r, std::string name, std::vector<double> values, std::vector<std::uint64_t> seeds) {
  r.series.push_back({std::move(name), std::move(values), std::move(seeds)});
}

// Copy the series called `from` to the front under the test's own name.
void promote(TestReport& r, const std::string& from) {
  for (const auto& s : r.series)
    if (s.name == from) {
      auto copy = s;
      copy.name = r.name;
      r.series.insert(r.series.begin(), std::move(copy));
      return;
    }
}

template <class T>
std::vector<T> vec(const json& j, const char* key) {
  return j.at(key).get<std::vector<T>>();
}

bool strictly_decreasing(const std::vector<double>& x) {
  for (std::size_t k = 1; k < x.size(); ++k)
    if (!(x[k] < x[k - 1])) return false;
  return true;
}

bool subset(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

// Breadth-first search from the Dirichlet nodes through nodes with
// `enter(node)` over cables with `open(edge)`.
template <class Enter, class Open>
std::vector<std::uint8_t> bfs(const CableGraph& g, Enter enter, Open open) {
  const int nf = g.free_count();
  std::vector<std::uint8_t> seen(g.node_count(), 0);
  std::deque<int> queue;
  for (int k = nf; k < g.node_count(); ++k)
    if (enter(k)) {
      seen[k] = 1;
      queue.push_back(k);
    }
  while (!queue.empty()) {
    const int x = queue.front();
    queue.pop_front();
    for (int e : g.incident(x)) {
      const int y = g.other_end(e, x);
      if (seen[y] || !enter(y) || !open(g.edge(e))) continue;
      seen[y] = 1;
      queue.push_back(y);
    }
  }
  return {seen.begin(), seen.begin() + nf};
}

// Independent recomputation of an extracted set, for checking the
// union-find extractors.
std::vector<std::uint8_t> bfs_cluster(const LocalSetSample& ls, const EdgeCrossings& ec) {
  const auto& g = ls.problem->graph();
  const int nf = g.free_count();
  auto value = [&](int node) { return node < nf ? ls.total[node] : g.fixed_node(node).value; };
  auto down = [&] {
    return bfs(
        g, [&](int k) { return value(k) >= -ls.a; },
        [&](const CableEdge& e) { return !ec.crossed_below(e, value(e.a), value(e.b), -ls.a); });
  };
  auto up = [&] {
    return bfs(
        g, [&](int k) { return value(k) <= ls.b; },
        [&](const CableEdge& e) { return !ec.crossed_above(e, value(e.a), value(e.b), ls.b); });
  };
  switch (ls.kind) {
    case LocalSetKind::kFpsDown: return down();
    case LocalSetKind::kFpsUp: return up();
    case LocalSetKind::kTvs: break;
  }
  const auto d = down(), u = up();
  return bfs(
      g, [&](int k) { return k >= nf || (d[k] && u[k]); }, [](const CableEdge&) { return true; });
}

}  // namespace

// --- calibration ------------------------------------------------------------

void run_calibration(TestContext& ctx) {
  const auto& p = ctx.params;
  const auto probes = vec<double>(p, "probe_radii");
  const auto res =
      calibrate_mesh(p.at("mesh").get<double>(), probes, p.at("samples").get<int>(), ctx.seed, ctx.opts.workers);
  auto& r = ctx.report;
  const auto j = res.to_json();
  add_check(r, "fit_within_5_percent", res.fit_pass,
            {{"residuals", res.profile.residuals}, {"probe_g", res.probe_g}, {"probe_radii", probes}});
  add_check(r, "monte_carlo_variance", res.monte_carlo_pass,
            {{"variance", res.variance}, {"exact", res.variance_exact}, {"z", res.variance_z},
             {"z_threshold", res.z_threshold}});
  double worst = 0.0;
  for (double x : res.profile.residuals) worst = std::max(worst, std::abs(x));
  r.summary = {{"n", res.samples},
               {"statistic", worst},
               {"law", {{"kind", "DiskGreenDiagonal"}, {"profile", j.at("profile")}}}};
  add_series(r, "calibration", res.first_probe_values, res.seeds);
}

// --- hitting time -------------------------------------------------------------

void run_hitting_time(TestContext& ctx) {
  const auto& p = ctx.params;
  const auto meshes = vec<double>(p, "meshes");
  const auto levels = vec<double>(p, "levels");
  const auto zc = vec<double>(p, "z");
  const int n = p.at("samples");
  const int walk_paths = p.at("walk_paths");
  const int walk_steps = p.at("walk_steps");
  auto& r = ctx.report;

  struct Cell {
    double mesh, a, horizon;
    std::vector<double> values;
    KsResult full;
  };
  std::vector<Cell> cells;
  double best_p = 2.0;
  json details = json::array();
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const auto lat = make_lattice(DomainSpec::unit_disk(), meshes[m], ctx.profiles);
    const int z = lat.dom->nearest_interior({zc.at(0), zc.at(1)});
    const double horizon = lat.problem->oracle->green_diag(z);
    const auto seeds = seeds_for(sub_seed(ctx.seed, m), n);
    std::vector<std::vector<double>> values(levels.size(), std::vector<double>(n));
    parallel_for(n, ctx.opts.workers, [&](int i) {
      const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
      const auto ec = sample_edge_crossings(field, lat.problem->profile);
      for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto ls = extract_fps(lat.problem, field, ec, levels[k]);
        values[k][i] = ls.contains(z) ? kInf : hitting_time_observable(ls, z);
      }
    });
    const bool finest = m + 1 == meshes.size();
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const double a = levels[k];
      const auto& v = values[k];
      std::vector<double> hits;
      for (double x : v)
        if (std::isfinite(x)) hits.push_back(x);
      // Lattice lifetime: the walk from z is killed at time G(z,z).
      const double censored = static_cast<double>(n - hits.size()) / n;
      const double expected = std::erf(a / std::sqrt(2.0 * horizon));
      const double se = std::sqrt(expected * (1.0 - expected) / n);
      const double cz = se > 0.0 ? (censored - expected) / se : 0.0;
      const auto truncated = levy_hitting_truncated(a, horizon);
      const auto ks_trunc = ks_test(hits, truncated);
      const auto levy = levy_hitting(a);
      const auto ks_full = ks_test(v, levy);
      const auto ks_cens = ks_test(v, levy_hitting_censored(a, horizon));
      details.push_back({{"mesh", meshes[m]},
                         {"a", a},
                         {"horizon", horizon},
                         {"censored_fraction", censored},
                         {"censored_expected", expected},
                         {"censored_z", cz},
                         {"ks_truncated", ks_json(ks_trunc, truncated)},
                         {"ks_untruncated", ks_json(ks_full, levy)},
                         {"ks_censored_p_value", ks_cens.p_value}});
      if (finest) {
        add_check(r, "levy_truncated_a" + tag(a), !ks_trunc.reject, ks_json(ks_trunc, truncated));
        add_check(r, "censored_fraction_a" + tag(a), std::abs(cz) < 3.0,
                  {{"observed", censored}, {"expected", expected}, {"z", cz}});
        if (ks_trunc.p_value < best_p) {
          best_p = ks_trunc.p_value;
          r.summary = ks_json(ks_trunc, truncated);
        }
        // Independent cross-check of the reference law.
        const auto walk = simulate_walk_hitting(a, walk_steps, horizon, walk_paths, sub_seed(ctx.seed, 100 + k));
        const auto censored_law = levy_hitting_censored(a, horizon);
        const auto ks_walk = ks_test(walk, censored_law);
        add_check(r, "random_walk_oracle_a" + tag(a), !ks_walk.reject, ks_json(ks_walk, censored_law));
      }
      cells.push_back({meshes[m], a, horizon, v, ks_full});
    }
    for (std::size_t k = 0; k < levels.size(); ++k)
      add_series(r, "hitting_time.a" + tag(levels[k]) + "_mesh" + tag(meshes[m]), values[k], seeds);
  }
  promote(r, "hitting_time.a" + tag(levels.at(0)) + "_mesh" + tag(meshes.back()));
  for (std::size_t k = 0; k < levels.size(); ++k) {
    std::vector<double> stats;
    for (const auto& c : cells)
      if (c.a == levels[k]) stats.push_back(c.full.statistic);
    add_check(r, "ks_decreases_with_mesh_a" + tag(levels[k]), strictly_decreasing(stats),
              {{"meshes", meshes}, {"statistics", stats}});
  }
  r.summary["details"] = details;
}

// --- extremal distance ----------------------------------------------------------

namespace {

void bridge_campaign(TestContext& ctx, bool two_valued) {
  const auto& p = ctx.params;
  const double r_in = p.at("inner_radius");
  const double a = p.at("a");
  const double b = two_valued ? p.at("b").get<double>() : kInf;
  const auto meshes = vec<double>(p, "meshes");
  const int n = p.at("samples");
  const int oracle_paths = p.at("oracle_paths");
  const int steps = p.at("oracle_steps");
  const int depth = p.at("oracle_depth");
  const int ref_paths = p.at("reference_paths");
  auto& r = ctx.report;
  const std::string name = r.name;

  DomainSpec spec = DomainSpec::annulus(r_in);
  spec.set_constant(0, p.at("u_outer")).set_constant(1, p.at("u_inner"));
  const ComponentSet outer{0}, inner{1};
  const double lo = -a, hi = b;

  json details = json::array();
  std::vector<double> closed_stats;
  double start = 0.0, end = 0.0, length = 0.0;
  std::vector<double> fine;
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const auto lat = make_lattice(spec, meshes[m], ctx.profiles);
    const double el = extremal_length(*lat.problem->oracle, outer, inner);
    const auto seeds = seeds_for(sub_seed(ctx.seed, m), n);
    std::vector<double> values(n), starts(n), ends(n);
    parallel_for(n, ctx.opts.workers, [&](int i) {
      const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
      const auto ec = sample_edge_crossings(field, lat.problem->profile);
      const auto ls = two_valued ? extract_tvs(lat.problem, field, ec, a, b) : extract_fps(lat.problem, field, ec, a);
      const auto d = extremal_distance_observable(ls, outer, el);
      values[i] = d.decrement;
      starts[i] = d.u_start;
      ends[i] = d.u_end;
    });
    start = starts[0];
    end = ends[0];
    length = lat.problem->oracle->kappa() * el;
    const auto closed = bridge_hitting(start, end, length, lo, hi);
    const auto ks_closed = ks_test(values, closed);
    closed_stats.push_back(ks_closed.statistic);
    const auto ms = mean_se(values);
    details.push_back({{"mesh", meshes[m]},
                       {"extremal_length", el},
                       {"bridge_length", length},
                       {"u_start", start},
                       {"u_end", end},
                       {"mean", ms.mean},
                       {"se", ms.se},
                       {"ks_closed_form", ks_json(ks_closed, closed)}});
    add_series(r, name + ".mesh" + tag(meshes[m]), values, seeds);
    if (m + 1 == meshes.size()) fine = values;
  }

  // Simulation oracle: two constructions must agree before one is used.
  const auto grid = simulate_bridge_exit_grid(start, end, length, lo, hi, oracle_paths, steps, sub_seed(ctx.seed, 200));
  const auto dyadic =
      simulate_bridge_exit_dyadic(start, end, length, lo, hi, oracle_paths, depth, sub_seed(ctx.seed, 201));
  const auto self = ks_two_sample(grid, dyadic);
  add_check(r, "oracle_self_consistency", !self.reject,
            {{"statistic", self.statistic}, {"p_value", self.p_value}, {"paths", oracle_paths}, {"steps", steps},
             {"depth", depth}});
  json params = {{"start", start}, {"end", end}, {"length", length}, {"lo", lo}, {"steps", steps}};
  if (std::isfinite(hi)) params["hi"] = hi;
  const auto law = empirical_law("BridgeHittingSimulated", params,
                                 simulate_bridge_exit_grid(start, end, length, lo, hi, ref_paths, steps,
                                                           sub_seed(ctx.seed, 202)));
  const auto ks = ks_test(fine, law);
  add_check(r, "ks_vs_bridge_oracle", !ks.reject, ks_json(ks, law));
  promote(r, name + ".mesh" + tag(meshes.back()));
  r.summary = ks_json(ks, law);
  r.summary["details"] = details;
  r.summary["continuum_extremal_length"] = std::log(1.0 / r_in) / (2.0 * kPi);
  r.summary["closed_form_statistic_by_mesh"] = closed_stats;
  r.summary["closed_form_statistic_nonincreasing"] =
      closed_stats.size() < 2 || closed_stats.front() >= closed_stats.back();
}

}  // namespace

void run_extremal_distance(TestContext& ctx) { bridge_campaign(ctx, false); }
void run_tvs_extremal_distance(TestContext& ctx) { bridge_campaign(ctx, true); }

// --- mean measure -------------------------------------------------------------

void run_mean_measure(TestContext& ctx) {
  const auto& p = ctx.params;
  const double mesh = p.at("mesh");
  const auto levels = vec<double>(p, "levels");
  const int n = p.at("samples");
  const double radius = p.at("window_radius");
  const double allowance = p.at("allowance");
  auto& r = ctx.report;

  const auto lat = make_lattice(DomainSpec::unit_disk(), mesh, ctx.profiles);
  const auto f = disk_indicator(*lat.dom, radius);
  const auto seeds = seeds_for(ctx.seed, n);
  std::vector<std::vector<double>> values(levels.size(), std::vector<double>(n));
  parallel_for(n, ctx.opts.workers, [&](int i) {
    const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
    const auto ec = sample_edge_crossings(field, lat.problem->profile);
    for (std::size_t k = 0; k < levels.size(); ++k)
      values[k][i] = measure_nu(extract_fps(lat.problem, field, ec, levels[k]), f);
  });
  const double area = kPi * radius * radius;
  double lattice_area = 0.0;
  for (double x : f) lattice_area += x * mesh * mesh;
  double worst = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double target = levels[k] * area;
    const auto ms = mean_se(values[k]);
    const double tol = 3.0 * ms.se + allowance * target;
    worst = std::max(worst, std::abs(ms.mean - target) / target);
    add_check(r, "mean_nu_a" + tag(levels[k]), std::abs(ms.mean - target) <= tol,
              {{"mean", ms.mean}, {"se", ms.se}, {"target", target}, {"tolerance", tol},
               {"lattice_target", levels[k] * lattice_area}});
    add_series(r, "mean_measure.a" + tag(levels[k]), values[k], seeds);
  }
  promote(r, "mean_measure.a" + tag(levels.at(0)));
  r.summary = {{"n", n}, {"statistic", worst}, {"law", {{"kind", "MeanMeasure"}, {"window_area", area}}}};
}

// --- Minkowski gauge ------------------------------------------------------------

void run_minkowski_gauge(TestContext& ctx) {
  const auto& p = ctx.params;
  const double mesh = p.at("mesh");
  const double a = p.at("a");
  const auto radii = vec<double>(p, "radii");
  const int n = p.at("samples");
  auto& r = ctx.report;

  const auto lat = make_lattice(DomainSpec::unit_disk(), mesh, ctx.profiles);
  const auto f = disk_indicator(*lat.dom, p.at("window_radius"));
  const auto seeds = seeds_for(ctx.seed, n);
  std::vector<double> nu(n);
  std::vector<std::vector<double>> mass(radii.size(), std::vector<double>(n));
  parallel_for(n, ctx.opts.workers, [&](int i) {
    const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
    const auto ls = extract_fps(lat.problem, field, sample_edge_crossings(field, lat.problem->profile), a);
    nu[i] = measure_nu(ls, f);
    const auto est = minkowski_estimate(ls, f, radii);
    for (std::size_t k = 0; k < radii.size(); ++k) mass[k][i] = est.masses[k];
  });
  std::vector<double> rel(radii.size(), 0.0), rel_se(radii.size(), 0.0);
  int used = 0;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    std::vector<double> d;
    for (int i = 0; i < n; ++i)
      if (nu[i] > 0.0) d.push_back(std::abs(mass[k][i] - nu[i]) / nu[i]);
    used = static_cast<int>(d.size());
    const auto ms = mean_se(d);
    rel[k] = ms.mean;
    rel_se[k] = ms.se;
  }
  std::vector<double> mean_mass;
  for (const auto& m : mass) mean_mass.push_back(mean_se(m).mean);
  add_check(r, "relative_discrepancy_decreases", strictly_decreasing(rel),
            {{"radii", radii}, {"mean_relative_discrepancy", rel}, {"se", rel_se}, {"samples_with_mass", used},
             {"mean_nu", mean_se(nu).mean}, {"mean_minkowski", mean_mass}});
  r.summary = {{"n", n}, {"statistic", rel.empty() ? 0.0 : rel.back()}, {"law", {{"kind", "MinkowskiGaugeTrend"}}}};
  add_series(r, "minkowski_gauge", nu, seeds);
  for (std::size_t k = 0; k < radii.size(); ++k) add_series(r, "minkowski_gauge.r" + tag(radii[k]), mass[k], seeds);
}

// --- level recovery ----------------------------------------------------------------

void run_level_recovery(TestContext& ctx) {
  const auto& p = ctx.params;
  const double mesh = p.at("mesh");
  const double a = p.at("a");
  const double gamma = p.at("gamma");
  const double rho = p.at("rho");
  const int angles = p.at("angles");
  const int n = p.at("samples");
  const double tolerance = p.at("tolerance");
  auto& r = ctx.report;

  const auto lat = make_lattice(DomainSpec::unit_disk(), mesh, ctx.profiles);
  const Eigen::VectorXd d = lat.problem->oracle->diagonal();
  const std::vector<double> base(d.data(), d.data() + d.size());
  const auto seeds = seeds_for(ctx.seed, n);
  std::vector<double> est(n), integral(n), covered(n);
  parallel_for(n, ctx.opts.workers, [&](int i) {
    const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
    const auto ls = extract_fps(lat.problem, field, sample_edge_crossings(field, lat.problem->profile), a);
    const auto lr = level_recovery(*lat.problem, ls.lattice_in_set, gamma, rho, angles, base);
    est[i] = lr.estimate;
    integral[i] = lr.integral;
    covered[i] = static_cast<double>(lr.ring_in_set) / lr.ring_points;
  });
  const auto ms = mean_se(est);
  const auto mi = mean_se(integral);
  const double target_i = 2.0 * kPi * std::exp(-gamma * std::sqrt(2.0 * kPi) * a);
  const bool pass = std::abs(ms.mean - a) <= tolerance * a;
  add_check(r, "mean_estimate_within_tolerance", pass,
            {{"mean_estimate", ms.mean}, {"se", ms.se}, {"a", a}, {"tolerance", tolerance * a},
             {"mean_integral", mi.mean}, {"integral_se", mi.se}, {"limit_integral", target_i},
             {"mean_ring_fraction_in_set", mean_se(covered).mean}});
  r.summary = {{"n", n}, {"statistic", std::abs(ms.mean - a) / a}, {"law", {{"kind", "LevelRecovery"}, {"a", a}}}};
  add_series(r, "level_recovery", est, seeds);
  add_series(r, "level_recovery.integral", integral, seeds);
}

// --- GMC ------------------------------------------------------------------------

void run_gmc_conditional(TestContext& ctx) {
  const auto& p = ctx.params;
  const double mesh = p.at("mesh");
  const double b = p.at("b");
  const auto gammas = vec<double>(p, "gammas");
  const int n = p.at("samples");
  const int inner = p.at("inner");
  auto& r = ctx.report;

  const auto lat = make_lattice(DomainSpec::unit_disk(), mesh, ctx.profiles);
  const auto f = disk_indicator(*lat.dom, p.at("window_radius"));
  const Eigen::VectorXd d = lat.problem->oracle->diagonal();
  const std::vector<double> base(d.data(), d.data() + d.size());
  double unconditional = 0.0;
  for (double x : f) unconditional += x * mesh * mesh;
  const auto seeds = seeds_for(ctx.seed, n);
  std::vector<std::vector<GmcRoutes>> routes(n);
  parallel_for(n, ctx.opts.workers, [&](int i) {
    const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
    const auto ls = extract_fps_up(lat.problem, field, sample_edge_crossings(field, lat.problem->profile), b);
    routes[i] = gmc_routes(ls, base, gammas, f, inner, seeds[i]);
  });
  json reports = json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    std::vector<GmcRoutes> per(n);
    std::vector<double> diff(n);
    for (int i = 0; i < n; ++i) {
      per[i] = routes[i][k];
      diff[i] = per[i].resampled - per[i].closed_form;
    }
    const auto rep = summarize_gmc(per, gammas[k], inner, unconditional);
    reports.push_back(to_json(rep));
    if (gammas[k] == 0.0) {
      add_check(r, "exact_zero_at_gamma_0", rep.discrepancy == 0.0 && rep.mean_closed_form == unconditional,
                to_json(rep));
    } else {
      add_check(r, "routes_agree_gamma" + tag(gammas[k]), rep.pass, to_json(rep));
      if (rep.se > 0.0) worst = std::max(worst, std::abs(rep.discrepancy) / rep.se);
    }
    add_series(r, "gmc_conditional.gamma" + tag(gammas[k]), diff, seeds);
  }
  promote(r, "gmc_conditional.gamma" + tag(gammas.at(gammas.size() - 1)));
  r.summary = {{"n", n}, {"statistic", worst}, {"law", {{"kind", "GmcTwoRoutes"}, {"reports", reports}}}};
}

// --- structural invariants -------------------------------------------------------

void run_structural_invariants(TestContext& ctx) {
  const auto& p = ctx.params;
  const double mesh = p.at("mesh");
  const auto levels = vec<double>(p, "levels");
  const double shift = p.at("u_shift");
  const double b = p.at("b");
  const double u_inner = p.at("u_inner");
  const int n = p.at("samples");
  auto& r = ctx.report;
  if (levels.size() != 2 || !(levels[0] < levels[1]))
    throw Error(ErrorCode::kInvalidArgument, "structural invariants need two increasing levels");

  DomainSpec spec = DomainSpec::annulus(p.at("inner_radius"));
  spec.set_constant(0, p.at("u_outer")).set_constant(1, u_inner);
  const auto lat = make_lattice(spec, mesh, ctx.profiles);
  const auto& base = *lat.problem->oracle;
  auto shifted_u = lat.u, mirror_u = lat.u;
  for (auto& x : shifted_u.values) x += shift;
  for (auto& x : shifted_u.harmonic_extension) x += shift;
  for (auto& x : mirror_u.values) x = -x;
  for (auto& x : mirror_u.harmonic_extension) x = -x;
  const auto shifted = make_problem(lat.dom, shifted_u, lat.problem->profile, &base);
  const auto mirror = make_problem(lat.dom, mirror_u, lat.problem->profile, &base);
  int inner_sites = 0;
  for (int k = 0; k < lat.dom->boundary_count(); ++k) inner_sites += lat.dom->boundary_component(k) == 1;

  enum { kMonoA, kMonoU, kConnected, kNu, kSymmetry, kAvoid, kTvsSubset, kCount };
  const char* names[kCount] = {"monotone_in_a",  "monotone_in_u", "boundary_connected", "nu_nonnegative",
                               "up_down_symmetry", "avoidance",   "tvs_subset"};
  const auto seeds = seeds_for(ctx.seed, n);
  std::vector<std::array<int, kCount>> counts(n);
  parallel_for(n, ctx.opts.workers, [&](int i) {
    auto& c = counts[i];
    c.fill(0);
    const auto field = sample_gff(base, seeds[i]);
    const auto ec = sample_edge_crossings(field, lat.problem->profile);
    const auto lo = extract_fps(lat.problem, field, ec, levels[0]);
    const auto hi = extract_fps(lat.problem, field, ec, levels[1]);
    const auto lo_u = extract_fps(shifted, field, ec, levels[0]);
    const auto hi_u = extract_fps(shifted, field, ec, levels[1]);
    const auto up = extract_fps_up(lat.problem, field, ec, b);
    const auto tvs = extract_tvs(lat.problem, field, ec, levels[1], b);
    FieldSample neg = field;
    for (auto& x : neg.phi) x = -x;
    const auto up_mirror = extract_fps(mirror, neg, ec.negated(), b);

    c[kMonoA] += !subset(lo.lattice_in_set, hi.lattice_in_set) + !subset(lo_u.lattice_in_set, hi_u.lattice_in_set);
    c[kMonoU] += !subset(lo.lattice_in_set, lo_u.lattice_in_set) + !subset(hi.lattice_in_set, hi_u.lattice_in_set);
    for (const auto* ls : {&lo, &hi, &lo_u, &hi_u, &up, &tvs}) c[kConnected] += bfs_cluster(*ls, ec) != ls->in_set;
    for (const auto* ls : {&lo, &hi, &lo_u, &hi_u, &up})
      for (double x : ls->nu) c[kNu] += x < 0.0;
    c[kSymmetry] += up.in_set != up_mirror.in_set || up.nu != up_mirror.nu;
    for (const auto* ls : {&lo, &hi}) {
      if (u_inner > -ls->a) continue;
      // Every inner boundary vertex must survive, joined by a cable, in the complement.
      const auto g = complement_graph(*ls);
      int kept = 0;
      for (int k = 0; k < g->fixed_count(); ++k) {
        const auto& fx = g->fixed(k);
        if (fx.kind != FixedKind::kBoundary || fx.component != 1) continue;
        for (int e : g->incident(g->free_count() + k))
          if (g->edge(e).resistance > 0.0) {
            ++kept;
            break;
          }
      }
      c[kAvoid] += kept != inner_sites;
    }
    for (std::size_t v = 0; v < tvs.in_set.size(); ++v)
      if (tvs.in_set[v] && !(hi.in_set[v] && up.in_set[v])) {
        ++c[kTvsSubset];
        break;
      }
  });
  std::vector<double> per_sample(n, 0.0);
  bool all = true;
  json totals;
  for (int k = 0; k < kCount; ++k) {
    int total = 0;
    for (int i = 0; i < n; ++i) total += counts[i][k];
    for (int i = 0; i < n; ++i) per_sample[i] += counts[i][k];
    totals[names[k]] = total;
    all = all && total == 0;
    add_check(r, names[k], total == 0, {{"violations", total}, {"samples", n}});
  }
  r.summary = {{"n", n}, {"statistic", all ? 0 : 1}, {"violations", totals}, {"law", {{"kind", "Invariants"}}}};
  add_series(r, "structural_invariants", per_sample, seeds);
}

// --- 2 lambda threshold ---------------------------------------------------------------

void run_tvs_threshold(TestContext& ctx) {
  const auto& p = ctx.params;
  const auto meshes = vec<double>(p, "meshes");
  const auto sums = vec<double>(p, "sums_over_lambda");
  const double radius = p.at("radius");
  const double info_radius = p.at("info_radius");
  const int n = p.at("samples");
  const double lambda = std::sqrt(kPi / 8.0);
  auto& r = ctx.report;

  // Per sample: smallest |z| over interior vertices of the TVS (1 when none).
  std::vector<std::vector<double>> freq(sums.size()), se(sums.size()), info(sums.size());
  for (std::size_t m = 0; m < meshes.size(); ++m) {
    const auto lat = make_lattice(DomainSpec::unit_disk(), meshes[m], ctx.profiles);
    std::vector<double> modulus(lat.dom->interior_count());
    for (int v = 0; v < lat.dom->interior_count(); ++v) modulus[v] = std::abs(lat.dom->interior_point(v));
    const auto seeds = seeds_for(sub_seed(ctx.seed, m), n);
    std::vector<std::vector<double>> reach(sums.size(), std::vector<double>(n));
    parallel_for(n, ctx.opts.workers, [&](int i) {
      const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
      const auto ec = sample_edge_crossings(field, lat.problem->profile);
      for (std::size_t s = 0; s < sums.size(); ++s) {
        const double half = 0.5 * sums[s] * lambda;
        const auto tvs = extract_tvs(lat.problem, field, ec, half, half);
        double lowest = 1.0;
        for (std::size_t v = 0; v < modulus.size(); ++v)
          if (tvs.lattice_in_set[v]) lowest = std::min(lowest, modulus[v]);
        reach[s][i] = lowest;
      }
    });
    for (std::size_t s = 0; s < sums.size(); ++s) {
      std::vector<double> hit(n), hit_info(n);
      for (int i = 0; i < n; ++i) {
        hit[i] = reach[s][i] <= radius;
        hit_info[i] = reach[s][i] <= info_radius;
      }
      const auto ms = mean_se(hit);
      freq[s].push_back(ms.mean);
      se[s].push_back(ms.se);
      info[s].push_back(mean_se(hit_info).mean);
      add_series(r, "tvs_threshold.sum" + tag(sums[s]) + "_mesh" + tag(meshes[m]), reach[s], seeds);
    }
  }
  for (std::size_t s = 0; s < sums.size(); ++s) {
    const json detail = {{"meshes", meshes},         {"radius", radius},       {"frequency", freq[s]},
                         {"se", se[s]},              {"sum", sums[s] * lambda}, {"info_radius", info_radius},
                         {"frequency_at_info_radius", info[s]}};
    if (sums[s] < 2.0) {
      add_check(r, "below_threshold_decreases_sum" + tag(sums[s]), strictly_decreasing(freq[s]), detail);
    } else {
      bool ok = true;
      for (std::size_t m = 1; m < meshes.size(); ++m)
        ok = ok && freq[s][m] >= freq[s][m - 1] - 3.0 * std::hypot(se[s][m], se[s][m - 1]);
      add_check(r, "above_threshold_no_decrease_sum" + tag(sums[s]), ok, detail);
    }
  }
  promote(r, "tvs_threshold.sum" + tag(sums.at(0)) + "_mesh" + tag(meshes.back()));
  r.summary = {{"n", n}, {"statistic", freq.empty() ? 0.0 : freq[0].back()}, {"law", {{"kind", "TvsThreshold"}}}};
}

// --- brute-force oracles ---------------------------------------------------------------

namespace {

// n x n interior block; the ring of sites around it are boundary nodes.
std::shared_ptr<CableGraph> block_graph(int n, const std::vector<double>& boundary_values) {
  std::vector<int> sites(n * n);
  for (int i = 0; i < n * n; ++i) sites[i] = i;
  std::vector<FixedNode> fixed;
  std::vector<CableEdge> edges;
  std::uint64_t key = 0;
  const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 4; ++k) {
        const int x = i + di[k], y = j + dj[k];
        if (x >= 0 && y >= 0 && x < n && y < n) {
          if (y * n + x > j * n + i) edges.push_back({j * n + i, y * n + x, 1.0, key++});
        } else {
          const double v = boundary_values[fixed.size() % boundary_values.size()];
          fixed.push_back({v, FixedKind::kBoundary, 0, static_cast<int>(fixed.size())});
          edges.push_back({j * n + i, n * n + static_cast<int>(fixed.size()) - 1, 1.0, key++});
        }
      }
  return std::make_shared<CableGraph>(std::move(sites), std::move(fixed), std::move(edges));
}

struct Proportion {
  double p = 0.0;
  double se = 0.0;
};

Proportion proportion(long long hits, long long n) {
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p, std::sqrt(std::max(p * (1.0 - p), 1.0 / n) / n)};
}

// Bridge from x to y over [0, T], observed at `steps` equal intervals; the
// fraction of paths whose grid minimum reaches `level`.
Proportion discrete_bridge_min(double x, double y, double T, double level, int steps, int paths, std::uint64_t seed) {
  std::vector<double> w(steps + 1);
  const double sd = std::sqrt(T / steps);
  long long hits = 0;
  for (int path = 0; path < paths; ++path) {
    Stream s(seed, static_cast<std::uint64_t>(path));
    w[0] = 0.0;
    for (int k = 1; k <= steps; ++k) w[k] = w[k - 1] + sd * s.normal();
    const double drift = (y - x) - w[steps];
    for (int k = 1; k < steps; ++k)
      if (x + w[k] + drift * k / steps <= level) {
        ++hits;
        break;
      }
  }
  return proportion(hits, paths);
}

}  // namespace

void run_brute_force_oracles(TestContext& ctx) {
  const auto& p = ctx.params;
  const int instances = p.at("samples");
  const int keys = p.at("edge_keys");
  const int paths = p.at("bridge_paths");
  const auto steps = vec<int>(p, "bridge_steps");
  auto& r = ctx.report;

  // 1. Small-grid extraction against breadth-first search.
  {
    CalibrationProfile unit;
    unit.mesh = 0.1;
    unit.calibrated = true;
    std::vector<double> mismatch(instances, 0.0);
    const auto seeds = seeds_for(sub_seed(ctx.seed, 1), instances);
    parallel_for(instances, ctx.opts.workers, [&](int inst) {
      Stream s(seeds[inst], 0);
      std::vector<double> bv(16);
      for (auto& v : bv) v = 2.0 * s.uniform() - 1.2;
      auto g = block_graph(4, bv);
      auto prob = make_graph_problem(g, 0.1, unit);
      FieldSample f;
      for (int i = 0; i < 16; ++i) f.phi.push_back(1.5 * s.normal() - prob->harmonic[i]);
      const EdgeCrossings ec(seeds[inst], 0.5 + s.uniform());
      const double a = 1.5 * s.uniform();
      const double b = 1.5 * s.uniform();
      const auto down = extract_fps(prob, f, ec, a);
      const auto up = extract_fps_up(prob, f, ec, b);
      const auto tvs = extract_tvs(prob, f, ec, a, b);
      mismatch[inst] = (bfs_cluster(down, ec) != down.in_set) + (bfs_cluster(up, ec) != up.in_set) +
                       (bfs_cluster(tvs, ec) != tvs.in_set);
    });
    int bad = 0;
    for (double x : mismatch) bad += x > 0.0;
    add_check(r, "grid_4x4_matches_bfs", bad == 0, {{"instances", instances}, {"mismatches", bad}});
    add_series(r, "brute_force_oracles", mismatch, seeds);
  }

  // 2. Edge-crossing probability against discretely monitored bridges.
  {
    struct Case {
      double x, y, resistance, level;
      bool below;
    };
    const Case cases[] = {{0.3, 0.1, 1.0, -0.2, true}, {0.2, 0.6, 0.5, 0.9, false}};
    const double variance = 1.0;
    int c = 0;
    for (const auto& cs : cases) {
      const EdgeCrossings ec(sub_seed(ctx.seed, 10 + c), variance);
      long long hits = 0;
      for (int k = 0; k < keys; ++k) {
        const CableEdge e{0, 1, cs.resistance, static_cast<std::uint64_t>(k)};
        hits += cs.below ? ec.crossed_below(e, cs.x, cs.y, cs.level) : ec.crossed_above(e, cs.x, cs.y, cs.level);
      }
      const auto emp = proportion(hits, keys);
      // Mirror upward crossings so the simulation always watches the minimum.
      const double sx = cs.below ? cs.x : -cs.x, sy = cs.below ? cs.y : -cs.y;
      const double sl = cs.below ? cs.level : -cs.level;
      const double T = variance * cs.resistance;
      json sims = json::array();
      std::vector<Proportion> sim;
      for (std::size_t k = 0; k < steps.size(); ++k) {
        sim.push_back(discrete_bridge_min(sx, sy, T, sl, steps[k], paths, sub_seed(ctx.seed, 20 + 4 * c + k)));
        sims.push_back({{"steps", steps[k]}, {"p", sim.back().p}, {"se", sim.back().se}});
      }
      // The discrete-monitoring bias shrinks like steps^{-1/2}; with two step
      // counts in ratio 4 the Richardson combination removes it.
      double target = sim.front().p, target_se = sim.front().se;
      if (steps.size() >= 2) {
        target = 2.0 * sim[1].p - sim[0].p;
        target_se = std::hypot(2.0 * sim[1].se, sim[0].se);
      }
      const double tol = 3.0 * std::hypot(emp.se, target_se);
      const double closed = bridge::prob_min_below(sx, sy, T, sl);
      add_check(r, "edge_crossing_case" + std::to_string(c), std::abs(emp.p - target) <= tol,
                {{"empirical", emp.p},
                 {"empirical_se", emp.se},
                 {"simulated", sims},
                 {"extrapolated", target},
                 {"extrapolated_se", target_se},
                 {"tolerance", tol},
                 {"closed_form", closed},
                 {"plain_difference_in_se", (emp.p - sim.front().p) / std::hypot(emp.se, sim.front().se)}});
      ++c;
    }
  }

  // 3. Green values against dense inversion.
  {
    const double tol = p.at("dense_tolerance");
    struct Dom {
      const char* name;
      DomainSpec spec;
      double mesh;
    };
    const Dom doms[] = {{"disk", DomainSpec::unit_disk(), 0.1}, {"annulus", DomainSpec::annulus(0.3), 0.1}};
    for (const auto& d : doms) {
      const auto lat = build_lattice(d.spec, d.mesh);
      if (lat.interior_count() > 400) throw Error(ErrorCode::kInvalidArgument, "dense check domain too large");
      const GreenOracle oracle(lat, 1.0);
      const Eigen::MatrixXd lap(lat.cable_graph()->laplacian());
      const Eigen::MatrixXd inv = lap.inverse();
      double err = 0.0;
      for (int y = 0; y < oracle.size(); ++y) err = std::max(err, (oracle.green_column(y) - inv.col(y)).cwiseAbs().maxCoeff());
      const double diag_err = (oracle.diagonal() - inv.diagonal()).cwiseAbs().maxCoeff();
      add_check(r, std::string("dense_inverse_") + d.name, err <= tol && diag_err <= tol,
                {{"vertices", lat.interior_count()}, {"max_error", err}, {"diagonal_error", diag_err}, {"tolerance", tol}});
    }
  }
  r.summary = {{"n", instances}, {"statistic", 0}, {"law", {{"kind", "BruteForce"}}}};
}

// --- H^-1 trend ---------------------------------------------------------------------

void run_h_minus_one_trend(TestContext& ctx) {
  const auto& p = ctx.params;
  const double mesh = p.at("mesh");
  const auto levels = vec<double>(p, "levels");
  const int n = p.at("samples");
  auto& r = ctx.report;

  const auto lat = make_lattice(DomainSpec::unit_disk(), mesh, ctx.profiles);
  const auto seeds = seeds_for(ctx.seed, n);
  std::vector<std::vector<double>> dist(levels.size(), std::vector<double>(n));
  parallel_for(n, ctx.opts.workers, [&](int i) {
    const auto field = sample_gff(*lat.problem->oracle, seeds[i]);
    const auto ec = sample_edge_crossings(field, lat.problem->profile);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const auto ls = extract_fps(lat.problem, field, ec, levels[k]);
      dist[k][i] = h_minus_one_distance(*lat.problem->oracle, field.phi, recentered_nu_density(ls), mesh);
    }
  });
  std::vector<double> means, ses;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const auto ms = mean_se(dist[k]);
    means.push_back(ms.mean);
    ses.push_back(ms.se);
    add_series(r, "h_minus_one_trend.a" + tag(levels[k]), dist[k], seeds);
  }
  promote(r, "h_minus_one_trend.a" + tag(levels.at(0)));
  add_check(r, "mean_distance_decreases", strictly_decreasing(means),
            {{"levels", levels}, {"mean", means}, {"se", ses}});
  r.summary = {{"n", n}, {"statistic", means.empty() ? 0.0 : means.back()}, {"law", {{"kind", "HMinusOneTrend"}}}};
}

}  // namespace fpslab::detail
