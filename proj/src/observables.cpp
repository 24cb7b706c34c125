#include "fpslab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fpslab/error.hpp"
#include "fpslab/io.hpp"
#include "fpslab/stats.hpp"

namespace fpslab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool in_components(const ComponentSet& b, int c) { return std::find(b.begin(), b.end(), c) != b.end(); }

// Values of u on the boundary components outside B, which must agree.
double constant_off(const CableGraph& g, const ComponentSet& b) {
  double value = 0.0;
  bool seen = false;
  for (const auto& f : g.fixed_nodes()) {
    if (f.kind != FixedKind::kBoundary || in_components(b, f.component)) continue;
    if (seen && f.value != value) throw Error(ErrorCode::kConfigViolation, "u is not constant off B");
    value = f.value;
    seen = true;
  }
  if (!seen) throw Error(ErrorCode::kConfigViolation, "B covers the whole boundary");
  return value;
}

double flux_weighted_start(const Problem& p, const ComponentSet& b) {
  const auto& g = p.graph();
  BoundaryData u;
  int sites = 0;
  for (const auto& f : g.fixed_nodes())
    if (f.kind == FixedKind::kBoundary) sites = std::max(sites, f.site + 1);
  u.values.assign(sites, 0.0);
  for (const auto& f : g.fixed_nodes())
    if (f.kind == FixedKind::kBoundary) u.values[f.site] = f.value;
  return weighted_boundary_average(*p.oracle, b, u);
}

ExtremalDecrement decrement(const LocalSetSample& ls, const ComponentSet& b, std::optional<double> el_before,
                            double u_end) {
  const auto& p = *ls.problem;
  ExtremalDecrement out;
  out.u_end = u_end;
  out.u_start = flux_weighted_start(p, b);
  if (el_before) {
    out.before = *el_before;
  } else {
    ComponentSet rest;
    for (const auto& f : p.graph().fixed_nodes())
      if (f.kind == FixedKind::kBoundary && !in_components(b, f.component) && !in_components(rest, f.component))
        rest.push_back(f.component);
    out.before = extremal_length(*p.oracle, b, rest);
  }
  // On the complement, the rest of the boundary is pinned at 0 and
  // everything that touches the set (cuts, B) at 1.
  const auto g = complement_graph(ls);
  std::vector<std::int8_t> role(g->fixed_count(), 1);
  bool any_rest = false;
  for (int k = 0; k < g->fixed_count(); ++k) {
    const auto& f = g->fixed(k);
    if (f.kind == FixedKind::kBoundary && !in_components(b, f.component)) {
      role[k] = 0;
      any_rest = true;
    }
  }
  if (!any_rest) throw Error(ErrorCode::kConfigViolation, "the set swallowed the rest of the boundary");
  const double m = solve_pinned(*g, role).energy;
  if (!(m > 0.0)) throw Error(ErrorCode::kSolverFailure, "set and boundary are not connected");
  out.after = 1.0 / m;
  out.decrement = p.oracle->kappa() * (out.before - out.after);
  return out;
}

// Mean of identical values comes out exact.
double stable_mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v - x[0];
  return x[0] + s / static_cast<double>(x.size());
}

}  // namespace

std::string series_csv(const ObservableSeries& series) {
  std::ostringstream out;
  out.precision(17);
  out << "sample_index,seed,value\n";
  for (std::size_t i = 0; i < series.values.size(); ++i)
    out << i << ',' << (i < series.seeds.size() ? series.seeds[i] : 0) << ',' << series.values[i] << '\n';
  return out.str();
}

void write_series_csv(const ObservableSeries& series, const std::string& path) {
  write_file_atomic(path, series_csv(series));
}

double hitting_time_observable(const LocalSetSample& ls, int z, const Problem* before) {
  const Problem& p0 = before ? *before : *ls.problem;
  const int z0 = free_node_of(p0, z);
  if (z0 < 0) throw Error(ErrorCode::kVertexOutOfDomain, "vertex " + std::to_string(z) + " is not free");
  if (ls.contains(z)) throw Error(ErrorCode::kVertexInSet, "vertex " + std::to_string(z) + " belongs to the set");
  const auto comp = complement_problem(ls, z);
  return p0.oracle->green_diag(z0) - comp->oracle->green_diag(free_node_of(*comp, z));
}

ExtremalDecrement extremal_distance_observable(const LocalSetSample& ls, const ComponentSet& b,
                                               std::optional<double> el_before) {
  if (ls.kind == LocalSetKind::kTvs) return tvs_extremal_distance_observable(ls, b, el_before);
  const double u_end = constant_off(ls.problem->graph(), b);
  if (ls.kind == LocalSetKind::kFpsDown && !(u_end <= -ls.a))
    throw Error(ErrorCode::kConfigViolation, "u off B must be at most -a");
  if (ls.kind == LocalSetKind::kFpsUp && !(u_end >= ls.b))
    throw Error(ErrorCode::kConfigViolation, "u off B must be at least b");
  return decrement(ls, b, el_before, u_end);
}

ExtremalDecrement tvs_extremal_distance_observable(const LocalSetSample& tvs, const ComponentSet& b,
                                                   std::optional<double> el_before) {
  if (tvs.kind != LocalSetKind::kTvs) throw Error(ErrorCode::kInvalidArgument, "not a two-valued set");
  const auto& g = tvs.problem->graph();
  int components = 0;
  for (const auto& f : g.fixed_nodes())
    if (f.kind == FixedKind::kBoundary) components = std::max(components, f.component + 1);
  if (components != 2) throw Error(ErrorCode::kConfigViolation, "two-valued decrement needs an annulus");
  for (const auto& f : g.fixed_nodes())
    if (f.kind == FixedKind::kBoundary && in_components(b, f.component) && (f.value < -tvs.a || f.value > tvs.b))
      throw Error(ErrorCode::kConfigViolation, "u on B must lie in [-a, b]");
  const double u_end = constant_off(g, b);
  if (u_end > -tvs.a && u_end < tvs.b) throw Error(ErrorCode::kConfigViolation, "u off B must lie outside (-a, b)");
  return decrement(tvs, b, el_before, u_end);
}

LevelRecovery level_recovery(const Problem& lattice, std::span<const std::uint8_t> lattice_in_set, double gamma,
                             double rho, int angles, std::span<const double> base_diag) {
  if (!(gamma >= 0.05 && gamma < 1.0)) throw Error(ErrorCode::kInvalidArgument, "gamma must lie in [0.05, 1)");
  if (!lattice.domain) throw Error(ErrorCode::kInvalidArgument, "level recovery needs a lattice domain");
  if (lattice.free_count() != lattice.lattice_size)
    throw Error(ErrorCode::kInvalidArgument, "level recovery runs on the full lattice problem");
  const auto& dom = *lattice.domain;
  const Point c = dom.spec().outer.center;
  if (!(rho > 0.0) || rho >= dom.spec().outer.radius)
    throw Error(ErrorCode::kRingOutsideDomain, "ring radius outside the domain");
  if (angles <= 0) angles = std::max(8, static_cast<int>(std::ceil(kTwoPi * rho / dom.mesh())));

  std::vector<int> ring(angles);
  for (int k = 0; k < angles; ++k) {
    const Point z = c + std::polar(rho, kTwoPi * k / angles);
    if (!dom.spec().contains(z)) throw Error(ErrorCode::kRingOutsideDomain, "ring point outside the domain");
    try {
      ring[k] = dom.nearest_interior(z);
    } catch (const Error&) {
      throw Error(ErrorCode::kRingOutsideDomain, "no lattice vertex near the ring");
    }
  }

  LevelRecovery out;
  out.ring_points = angles;
  const auto& g = lattice.graph();
  std::vector<std::uint8_t> pin(g.free_count(), 0);
  for (int i = 0; i < g.free_count(); ++i) pin[i] = lattice_in_set[g.free_site(i)];
  std::vector<int> outside;
  for (int v : ring)
    if (lattice_in_set[v]) ++out.ring_in_set;
    else outside.push_back(v);

  std::vector<double> g_after(dom.interior_count(), 0.0);
  if (!outside.empty()) {
    const CableGraph all = g.pin_free(pin, 0.0);
    // Only complement components reaching the ring matter.
    const auto comps = all.free_components();
    std::vector<std::uint8_t> wanted(comps.count, 0), keep(all.free_count(), 0);
    {
      const auto sites = all.free_sites();
      for (int v : outside)
        wanted[comps.label[std::lower_bound(sites.begin(), sites.end(), v) - sites.begin()]] = 1;
      for (int i = 0; i < all.free_count(); ++i) keep[i] = wanted[comps.label[i]];
    }
    auto pinned = std::make_shared<CableGraph>(all.restrict_to(keep));
    const GreenOracle oracle(pinned, lattice.oracle->kappa());
    auto node_of = [&](int v) {
      const auto sites = pinned->free_sites();
      return static_cast<int>(std::lower_bound(sites.begin(), sites.end(), v) - sites.begin());
    };
    if (outside.size() > 64) {
      const Eigen::VectorXd d = oracle.diagonal();
      for (int v : outside) g_after[v] = d[node_of(v)];
    } else {
      for (int v : outside) g_after[v] = oracle.green_diag(node_of(v));
    }
  }
  Eigen::VectorXd own_diag;
  if (base_diag.empty()) {
    own_diag = lattice.oracle->diagonal();
    base_diag = {own_diag.data(), static_cast<std::size_t>(own_diag.size())};
  }
  const double p = 0.5 * gamma * gamma;
  const double dtheta = kTwoPi / angles;
  for (int v : ring) {
    if (lattice_in_set[v]) continue;
    const double log_ratio = kTwoPi * (g_after[v] - base_diag[v]);
    out.integral += std::exp(p * log_ratio) * dtheta;
  }
  out.estimate = -std::log(out.integral / kTwoPi) / (gamma * std::sqrt(kTwoPi));
  return out;
}

std::vector<GmcRoutes> gmc_routes(const LocalSetSample& ls, std::span<const double> base_diag,
                                  std::span<const double> gammas, std::span<const double> f, int inner,
                                  std::uint64_t seed) {
  const auto& p = *ls.problem;
  if (p.free_count() != p.lattice_size)
    throw Error(ErrorCode::kInvalidArgument, "GMC check runs on sets of the full lattice problem");
  if (inner < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one inner sample");
  const int n = p.lattice_size;
  const double cell = p.mesh * p.mesh;
  // Zero-boundary part of the field: total minus u.
  auto phi_of = [&](int v, double total) { return total - p.harmonic[v]; };

  std::shared_ptr<const Problem> comp;
  Eigen::VectorXd comp_diag;
  std::vector<int> comp_node(n, -1);
  bool any_free = false;
  for (int v = 0; v < n; ++v) any_free = any_free || (!ls.lattice_in_set[v] && f[v] != 0.0);
  if (any_free) {
    comp = complement_problem(ls);
    comp_diag = comp->oracle->diagonal();
    for (int i = 0; i < comp->free_count(); ++i) comp_node[comp->graph().free_site(i)] = i;
  }

  const std::size_t ng = gammas.size();
  std::vector<GmcRoutes> out(ng);
  for (std::size_t k = 0; k < ng; ++k) {
    const double gt = std::sqrt(kTwoPi) * gammas[k];
    for (int v = 0; v < n; ++v) {
      if (f[v] == 0.0) continue;
      if (ls.lattice_in_set[v]) {
        out[k].closed_form +=
            f[v] * std::exp(gt * phi_of(v, ls.lattice_total[v]) - 0.5 * gt * gt * base_diag[v]) * cell;
      } else {
        const int i = comp_node[v];
        const double h = phi_of(v, comp->harmonic[i]);
        out[k].closed_form += f[v] * std::exp(gt * h - 0.5 * gt * gt * (base_diag[v] - comp_diag[i])) * cell;
      }
    }
  }
  std::vector<std::vector<double>> masses(ng, std::vector<double>(inner, 0.0));
  for (int j = 0; j < inner; ++j) {
    FieldSample fresh;
    if (comp) fresh = sample_gff(*comp->oracle, derive_seed(seed, j), streams::kResample);
    for (int v = 0; v < n; ++v) {
      if (f[v] == 0.0) continue;
      double total;
      if (ls.lattice_in_set[v]) {
        total = ls.lattice_total[v];
      } else {
        const int i = comp_node[v];
        total = comp->harmonic[i] + fresh.phi[i];
      }
      for (std::size_t k = 0; k < ng; ++k) {
        const double gt = std::sqrt(kTwoPi) * gammas[k];
        masses[k][j] += f[v] * std::exp(gt * phi_of(v, total) - 0.5 * gt * gt * base_diag[v]) * cell;
      }
    }
  }
  for (std::size_t k = 0; k < ng; ++k) out[k].resampled = stable_mean(masses[k]);
  return out;
}

GmcReport summarize_gmc(std::span<const GmcRoutes> routes, double gamma, int inner, double unconditional) {
  GmcReport r;
  r.gamma = gamma;
  r.outer = static_cast<int>(routes.size());
  r.inner = inner;
  r.unconditional = unconditional;
  std::vector<double> res, closed, diff;
  for (const auto& x : routes) {
    res.push_back(x.resampled);
    closed.push_back(x.closed_form);
    diff.push_back(x.resampled - x.closed_form);
  }
  r.mean_resampled = stable_mean(res);
  r.mean_closed_form = stable_mean(closed);
  const auto d = mean_se(diff);
  r.discrepancy = d.mean;
  r.se = d.se;
  r.relative = r.mean_closed_form != 0.0 ? d.mean / r.mean_closed_form : 0.0;
  const auto c = mean_se(closed);
  r.unconditional_z = c.se > 0.0 ? (c.mean - unconditional) / c.se : (c.mean == unconditional ? 0.0 : INFINITY);
  const bool routes_agree = d.se > 0.0 ? std::abs(d.mean) < 3.0 * d.se : d.mean == 0.0;
  r.pass = routes_agree && std::abs(r.unconditional_z) < 3.0;
  return r;
}

GmcReport gmc_conditional_check(std::shared_ptr<const Problem> lattice, double b, double gamma,
                                std::span<const double> f, int outer, int inner, std::uint64_t seed) {
  const Eigen::VectorXd diag = lattice->oracle->diagonal();
  const std::vector<double> base(diag.data(), diag.data() + diag.size());
  double unconditional = 0.0;
  for (double x : f) unconditional += x * lattice->mesh * lattice->mesh;
  std::vector<GmcRoutes> routes;
  for (int j = 0; j < outer; ++j) {
    const std::uint64_t s = derive_seed(seed, j);
    const auto field = sample_gff(*lattice->oracle, s);
    const auto ls = extract_fps_up(lattice, field, sample_edge_crossings(field, lattice->profile), b);
    const double g[1] = {gamma};
    routes.push_back(gmc_routes(ls, base, g, f, inner, s)[0]);
  }
  return summarize_gmc(routes, gamma, inner, unconditional);
}

double h_minus_one_distance(const GreenOracle& reference, std::span<const double> x, std::span<const double> y,
                            double mesh) {
  if (static_cast<int>(x.size()) != reference.size() || x.size() != y.size())
    throw Error(ErrorCode::kInvalidArgument, "measures do not match the reference domain");
  Eigen::VectorXd d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  if (d.isZero(0.0)) return 0.0;
  const double m2 = mesh * mesh;
  return std::max(0.0, reference.quadratic_form(d) * m2 * m2);
}

std::vector<double> recentered_nu_density(const LocalSetSample& ls) {
  if (ls.kind != LocalSetKind::kFpsDown) throw Error(ErrorCode::kInvalidArgument, "needs a first passage set");
  const double w = ls.problem->mesh * ls.problem->mesh * ls.problem->profile.cell_weight;
  std::vector<double> out(ls.nu.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = ls.nu[v] / w - ls.a;
  return out;
}

nlohmann::json to_json(const GmcReport& r) {
  return {{"gamma", r.gamma},
          {"outer", r.outer},
          {"inner", r.inner},
          {"mean_resampled", r.mean_resampled},
          {"mean_closed_form", r.mean_closed_form},
          {"discrepancy", r.discrepancy},
          {"relative", r.relative},
          {"se", r.se},
          {"unconditional", r.unconditional},
          {"unconditional_z", r.unconditional_z},
          {"pass", r.pass}};
}

}  // namespace fpslab
