#include "fpslab/local_sets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "fpslab/error.hpp"
#include "fpslab/io.hpp"
#include "fpslab/union_find.hpp"

namespace fpslab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double node_total(const Problem& p, std::span<const double> total, int node) {
  const auto& g = p.graph();
  return g.is_fixed(node) ? g.fixed_node(node).value : total[node];
}

// Boundary-connected cluster of admissible nodes joined by open cables.
template <class Admissible, class Open>
std::vector<std::uint8_t> cluster(const Problem& p, std::span<const double> total, Admissible admissible, Open open) {
  const auto& g = p.graph();
  const int n = g.node_count();
  UnionFind uf(n);
  for (const auto& e : g.edges()) {
    const double ta = node_total(p, total, e.a), tb = node_total(p, total, e.b);
    if (admissible(ta) && admissible(tb) && open(e, ta, tb)) uf.unite(e.a, e.b);
  }
  std::vector<std::uint8_t> rooted(n, 0);
  for (int k = g.free_count(); k < n; ++k)
    if (admissible(g.fixed_node(k).value)) rooted[uf.find(k)] = 1;
  std::vector<std::uint8_t> in(g.free_count(), 0);
  for (int i = 0; i < g.free_count(); ++i) in[i] = admissible(total[i]) && rooted[uf.find(i)];
  return in;
}

std::vector<double> totals_of(const Problem& p, const FieldSample& s) {
  if (static_cast<int>(s.phi.size()) != p.free_count())
    throw Error(ErrorCode::kInvalidArgument, "field sample does not match the problem");
  std::vector<double> t(s.phi.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = s.phi[i] + p.harmonic[i];
  return t;
}

void fill_lattice(LocalSetSample& ls) {
  const auto& p = *ls.problem;
  const int n = p.lattice_size;
  ls.lattice_in_set.assign(n, 1);
  ls.lattice_total.assign(n, 0.0);
  // Vertices outside this problem's free nodes belong to earlier stages and
  // are filled by the caller.
  for (int i = 0; i < p.free_count(); ++i) {
    const int v = p.graph().free_site(i);
    ls.lattice_in_set[v] = ls.in_set[i];
    ls.lattice_total[v] = ls.total[i];
  }
}

void fill_nu(LocalSetSample& ls) {
  if (ls.kind == LocalSetKind::kTvs) {
    ls.nu.clear();
    return;
  }
  const double w = ls.problem->mesh * ls.problem->mesh * ls.problem->profile.cell_weight;
  ls.nu.assign(ls.lattice_total.size(), 0.0);
  for (std::size_t v = 0; v < ls.nu.size(); ++v) {
    if (!ls.lattice_in_set[v]) continue;
    ls.nu[v] = (ls.kind == LocalSetKind::kFpsDown ? ls.lattice_total[v] + ls.a : ls.b - ls.lattice_total[v]) * w;
  }
}

}  // namespace

std::string_view to_string(LocalSetKind kind) {
  switch (kind) {
    case LocalSetKind::kFpsDown: return "fps_down";
    case LocalSetKind::kFpsUp: return "fps_up";
    case LocalSetKind::kTvs: return "tvs";
  }
  return "unknown";
}

std::shared_ptr<const Problem> make_problem(std::shared_ptr<const LatticeDomain> domain, const BoundaryData& u,
                                            const CalibrationProfile& profile, const GreenOracle* base) {
  const auto& lg = *domain->cable_graph();
  if (static_cast<int>(u.values.size()) != domain->boundary_count() ||
      static_cast<int>(u.harmonic_extension.size()) != domain->interior_count())
    throw Error(ErrorCode::kInvalidArgument, "boundary data does not match the lattice");
  std::vector<FixedNode> fixed(lg.fixed_nodes().begin(), lg.fixed_nodes().end());
  for (auto& f : fixed) f.value = u.values[f.site];
  auto g = std::make_shared<CableGraph>(std::vector<int>(lg.free_sites().begin(), lg.free_sites().end()),
                                        std::move(fixed), std::vector<CableEdge>(lg.edges().begin(), lg.edges().end()));
  auto p = std::make_shared<Problem>();
  p->lattice_size = domain->interior_count();
  p->mesh = domain->mesh();
  p->domain = std::move(domain);
  p->oracle = std::make_shared<GreenOracle>(base ? base->with_graph(g) : GreenOracle(g, profile.kappa));
  p->harmonic = u.harmonic_extension;
  p->profile = profile;
  return p;
}

std::shared_ptr<const Problem> make_graph_problem(std::shared_ptr<const CableGraph> graph, double mesh,
                                                  const CalibrationProfile& profile) {
  auto p = std::make_shared<Problem>();
  p->mesh = mesh;
  for (int s : graph->free_sites()) p->lattice_size = std::max(p->lattice_size, s + 1);
  p->oracle = std::make_shared<GreenOracle>(graph, profile.kappa);
  const auto fv = graph->fixed_values();
  const Eigen::VectorXd h = p->oracle->harmonic(fv);
  p->harmonic.assign(h.data(), h.data() + h.size());
  p->profile = profile;
  return p;
}

int LocalSetSample::interior_size() const {
  return static_cast<int>(std::count(lattice_in_set.begin(), lattice_in_set.end(), std::uint8_t{1}));
}

std::vector<int> LocalSetSample::interior_vertices() const {
  std::vector<int> v;
  for (int i = 0; i < static_cast<int>(lattice_in_set.size()); ++i)
    if (lattice_in_set[i]) v.push_back(i);
  return v;
}

bool LocalSetSample::admissible(double value) const {
  switch (kind) {
    case LocalSetKind::kFpsDown: return value >= -a;
    case LocalSetKind::kFpsUp: return value <= b;
    case LocalSetKind::kTvs: return value >= -a && value <= b;
  }
  return false;
}

LocalSetSample extract_fps(std::shared_ptr<const Problem> problem, const FieldSample& sample,
                           const EdgeCrossings& crossings, double a) {
  LocalSetSample ls;
  ls.kind = LocalSetKind::kFpsDown;
  ls.a = a;
  ls.problem = std::move(problem);
  ls.crossings = crossings;
  ls.total = totals_of(*ls.problem, sample);
  const double level = -a;
  ls.in_set = cluster(
      *ls.problem, ls.total, [level](double t) { return t >= level; },
      [&](const CableEdge& e, double ta, double tb) { return !crossings.crossed_below(e, ta, tb, level); });
  fill_lattice(ls);
  fill_nu(ls);
  return ls;
}

LocalSetSample extract_fps_up(std::shared_ptr<const Problem> problem, const FieldSample& sample,
                              const EdgeCrossings& crossings, double b) {
  // Run the down extraction on the mirrored problem so both share one code path.
  auto mirrored = std::make_shared<Problem>(*problem);
  {
    const auto& g = problem->graph();
    std::vector<FixedNode> fixed(g.fixed_nodes().begin(), g.fixed_nodes().end());
    for (auto& f : fixed) f.value = -f.value;
    auto mg = std::make_shared<CableGraph>(std::vector<int>(g.free_sites().begin(), g.free_sites().end()),
                                           std::move(fixed), std::vector<CableEdge>(g.edges().begin(), g.edges().end()));
    mirrored->oracle = std::make_shared<GreenOracle>(problem->oracle->with_graph(mg));
    for (auto& h : mirrored->harmonic) h = -h;
  }
  FieldSample neg = sample;
  for (auto& x : neg.phi) x = -x;
  const auto down = extract_fps(mirrored, neg, crossings.negated(), b);
  LocalSetSample ls;
  ls.kind = LocalSetKind::kFpsUp;
  ls.b = b;
  ls.problem = std::move(problem);
  ls.crossings = crossings;
  ls.total = totals_of(*ls.problem, sample);
  ls.in_set = down.in_set;
  fill_lattice(ls);
  fill_nu(ls);
  return ls;
}

LocalSetSample extract_tvs(std::shared_ptr<const Problem> problem, const FieldSample& sample,
                           const EdgeCrossings& crossings, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::kInvalidArgument, "levels must be positive");
  const auto down = extract_fps(problem, sample, crossings, a);
  const auto up = extract_fps_up(problem, sample, crossings, b);
  LocalSetSample ls;
  ls.kind = LocalSetKind::kTvs;
  ls.a = a;
  ls.b = b;
  ls.problem = std::move(problem);
  ls.crossings = crossings;
  ls.total = down.total;
  // Components of the vertex intersection that reach a Dirichlet node.
  const auto& g = ls.problem->graph();
  const int nf = g.free_count();
  auto both = [&](int node) { return node >= nf || (down.in_set[node] && up.in_set[node]); };
  UnionFind uf(g.node_count());
  for (const auto& e : g.edges())
    if (both(e.a) && both(e.b)) uf.unite(e.a, e.b);
  std::vector<std::uint8_t> rooted(g.node_count(), 0);
  for (int k = nf; k < g.node_count(); ++k) rooted[uf.find(k)] = 1;
  ls.in_set.assign(nf, 0);
  for (int i = 0; i < nf; ++i) ls.in_set[i] = both(i) && rooted[uf.find(i)];
  fill_lattice(ls);
  return ls;
}

int free_node_of(const Problem& problem, int lattice_vertex) {
  const auto sites = problem.graph().free_sites();
  // Free nodes keep the lattice order, so the sites are sorted.
  const auto it = std::lower_bound(sites.begin(), sites.end(), lattice_vertex);
  return it != sites.end() && *it == lattice_vertex ? static_cast<int>(it - sites.begin()) : -1;
}

std::shared_ptr<const CableGraph> complement_graph(const LocalSetSample& ls, std::optional<int> component_of) {
  const auto& p = *ls.problem;
  const auto& g = p.graph();
  const int nf = g.free_count();
  auto in_a = [&](int node) { return g.is_fixed(node) || ls.in_set[node]; };
  auto total = [&](int node) { return node_total(p, ls.total, node); };

  std::vector<int> map(nf, -1), sites;
  for (int i = 0; i < nf; ++i)
    if (!ls.in_set[i]) {
      map[i] = static_cast<int>(sites.size());
      sites.push_back(g.free_site(i));
    }
  const int n2 = static_cast<int>(sites.size());

  std::vector<FixedNode> fixed;
  std::vector<int> kept_fixed(g.fixed_count(), -1);
  auto keep_fixed = [&](int node) {
    int& k = kept_fixed[node - nf];
    if (k < 0) {
      k = static_cast<int>(fixed.size());
      fixed.push_back(g.fixed_node(node));
    }
    return n2 + k;
  };
  auto add_cut = [&](double value) {
    fixed.push_back(FixedNode{value, FixedKind::kCut, -1, -1});
    return n2 + static_cast<int>(fixed.size()) - 1;
  };
  // Where the field first leaves the admissible range, walking from `x`.
  auto cut_from = [&](const CableEdge& e, int x) -> std::pair<double, double> {
    const bool from_a = e.a == x;
    const double ta = total(e.a), tb = total(e.b);
    double frac = kInf, value = 0.0;
    if (ls.kind != LocalSetKind::kFpsUp && ls.crossings.crossed_below(e, ta, tb, -ls.a)) {
      frac = ls.crossings.hit_fraction_below(e, from_a, ta, tb, -ls.a);
      value = -ls.a;
    }
    if (ls.kind != LocalSetKind::kFpsDown && ls.crossings.crossed_above(e, ta, tb, ls.b)) {
      const double f = ls.crossings.hit_fraction_above(e, from_a, ta, tb, ls.b);
      if (f < frac) {
        frac = f;
        value = ls.b;
      }
    }
    if (!std::isfinite(frac)) throw Error(ErrorCode::kSolverFailure, "open cable between set and complement");
    return {std::min(frac, 1.0 - 1e-12), value};
  };

  // A Dirichlet node sitting exactly on a level would get a cut at itself;
  // keep it as is so boundary components stay identifiable.
  auto explored = [&](int node) {
    const double t = total(node);
    if (!ls.admissible(t)) return false;
    const bool on_low = ls.kind != LocalSetKind::kFpsUp && t == -ls.a;
    const bool on_high = ls.kind != LocalSetKind::kFpsDown && t == ls.b;
    return !(g.is_fixed(node) && (on_low || on_high));
  };

  std::vector<CableEdge> edges;
  for (const auto& e : g.edges()) {
    const bool ia = in_a(e.a), ib = in_a(e.b);
    if (!ia && !ib) {
      edges.push_back({map[e.a], map[e.b], e.resistance, e.key});
      continue;
    }
    if (ia != ib) {
      const int x = ia ? e.a : e.b, y = ia ? e.b : e.a;
      if (explored(x)) {
        const auto [f, value] = cut_from(e, x);
        edges.push_back({add_cut(value), map[y], e.resistance * (1.0 - f), e.key});
      } else {
        edges.push_back({keep_fixed(x), map[y], e.resistance, e.key});
      }
      continue;
    }
    // Both ends in A: keep the stretch between a cut and an inadmissible
    // Dirichlet node, which still carries energy.
    const bool adm_a = explored(e.a), adm_b = explored(e.b);
    if (adm_a && adm_b) continue;
    if (!adm_a && !adm_b) {
      if (g.is_fixed(e.a) && g.is_fixed(e.b)) edges.push_back({keep_fixed(e.a), keep_fixed(e.b), e.resistance, e.key});
      continue;
    }
    const int x = adm_a ? e.a : e.b, y = adm_a ? e.b : e.a;
    const auto [f, value] = cut_from(e, x);
    edges.push_back({add_cut(value), keep_fixed(y), e.resistance * (1.0 - f), e.key});
  }
  auto graph = std::make_shared<CableGraph>(std::move(sites), std::move(fixed), std::move(edges));

  if (component_of) {
    const int z = free_node_of(p, *component_of);
    if (z < 0 || ls.in_set[z]) throw Error(ErrorCode::kVertexInSet, "vertex belongs to the set");
    const auto comps = graph->free_components();
    const int label = comps.label[map[z]];
    std::vector<std::uint8_t> keep(graph->free_count());
    for (int i = 0; i < graph->free_count(); ++i) keep[i] = comps.label[i] == label;
    graph = std::make_shared<CableGraph>(graph->restrict_to(keep));
  }
  return graph;
}

std::shared_ptr<const Problem> complement_problem(const LocalSetSample& ls, std::optional<int> component_of) {
  const auto& p = *ls.problem;
  auto graph = complement_graph(ls, component_of);
  if (graph->free_count() == 0) throw Error(ErrorCode::kEmptyComplement, "the set covers every vertex");
  auto out = std::make_shared<Problem>();
  out->domain = p.domain;
  out->lattice_size = p.lattice_size;
  out->mesh = p.mesh;
  out->profile = p.profile;
  out->oracle = std::make_shared<GreenOracle>(graph, p.oracle->kappa());
  const auto fv = graph->fixed_values();
  const Eigen::VectorXd h = out->oracle->harmonic(fv);
  out->harmonic.assign(h.data(), h.data() + h.size());
  return out;
}

std::vector<LocalSetSample> nested_fps(std::shared_ptr<const Problem> lattice, std::span<const double> levels,
                                       std::uint64_t seed) {
  if (levels.empty()) throw Error(ErrorCode::kInvalidArgument, "no levels");
  for (std::size_t k = 1; k < levels.size(); ++k)
    if (!(levels[k] > levels[k - 1])) throw Error(ErrorCode::kInvalidArgument, "levels must increase");
  std::vector<LocalSetSample> out;
  std::shared_ptr<const Problem> current = std::move(lattice);
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const std::uint64_t stage_seed = k == 0 ? seed : derive_seed(seed, k << streams::kStageShift);
    const auto field = sample_gff(*current->oracle, stage_seed);
    const auto cross = sample_edge_crossings(field, current->profile);
    auto ls = extract_fps(current, field, cross, levels[k]);
    if (k > 0) {
      // Merge with the earlier stages: their set stays, their totals are final.
      const auto& prev = out.back();
      for (std::size_t v = 0; v < ls.lattice_in_set.size(); ++v)
        if (prev.lattice_in_set[v]) ls.lattice_total[v] = prev.lattice_total[v];
      fill_nu(ls);
    }
    out.push_back(std::move(ls));
    if (k + 1 < levels.size()) {
      if (out.back().interior_size() == static_cast<int>(out.back().lattice_in_set.size())) {
        // Nothing left to explore; later stages repeat the full set.
        for (std::size_t j = k + 1; j < levels.size(); ++j) {
          auto full = out.back();
          full.a = levels[j];
          fill_nu(full);
          out.push_back(std::move(full));
        }
        break;
      }
      current = complement_problem(out.back());
    }
  }
  return out;
}

double measure_nu(const LocalSetSample& ls, std::span<const double> f) {
  if (ls.kind == LocalSetKind::kTvs) throw Error(ErrorCode::kInvalidArgument, "nu is defined for first passage sets");
  if (f.size() != ls.nu.size()) throw Error(ErrorCode::kInvalidArgument, "test function size mismatch");
  double s = 0.0;
  for (std::size_t v = 0; v < f.size(); ++v)
    if (ls.lattice_in_set[v]) s += f[v] * ls.nu[v];
  return s;
}

namespace {

// 1-D squared distance transform (lower envelope of parabolas) over the
// finite entries of f.
void edt_1d(const double* f, int n, double* d, int* v, double* z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = -kInf;
    while (k >= 0) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k]) {
        --k;
        continue;
      }
      break;
    }
    if (k < 0) s = -kInf;
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

std::vector<double> distance_to_marked(const LatticeDomain& dom, std::span<const std::uint8_t> marked) {
  const auto box = dom.grid_box();
  const int ni = box.ni, nj = box.nj;
  std::vector<double> grid(static_cast<std::size_t>(ni) * nj, kInf);
  for (int v = 0; v < dom.interior_count(); ++v)
    if (marked[v]) {
      const auto [i, j] = dom.interior_ij(v);
      grid[static_cast<std::size_t>(j - box.j0) * ni + (i - box.i0)] = 0.0;
    }
  const int m = std::max(ni, nj);
  std::vector<double> f(m), d(m), z(m + 1);
  std::vector<int> vv(m);
  for (int j = 0; j < nj; ++j) {
    for (int i = 0; i < ni; ++i) f[i] = grid[static_cast<std::size_t>(j) * ni + i];
    edt_1d(f.data(), ni, d.data(), vv.data(), z.data());
    for (int i = 0; i < ni; ++i) grid[static_cast<std::size_t>(j) * ni + i] = d[i];
  }
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < nj; ++j) f[j] = grid[static_cast<std::size_t>(j) * ni + i];
    edt_1d(f.data(), nj, d.data(), vv.data(), z.data());
    for (int j = 0; j < nj; ++j) grid[static_cast<std::size_t>(j) * ni + i] = d[j];
  }
  std::vector<double> out(dom.interior_count());
  for (int v = 0; v < dom.interior_count(); ++v) {
    const auto [i, j] = dom.interior_ij(v);
    out[v] = std::sqrt(grid[static_cast<std::size_t>(j - box.j0) * ni + (i - box.i0)]) * dom.mesh();
  }
  return out;
}

MinkowskiEstimate minkowski_estimate(const LocalSetSample& ls, std::span<const double> f, std::span<const double> radii) {
  if (!ls.problem->domain) throw Error(ErrorCode::kInvalidArgument, "Minkowski content needs a lattice domain");
  const auto& dom = *ls.problem->domain;
  const double h = dom.mesh();
  if (f.size() != ls.lattice_in_set.size()) throw Error(ErrorCode::kInvalidArgument, "test function size mismatch");
  for (double r : radii)
    if (!(r >= 2.0 * h)) throw Error(ErrorCode::kRadiusBelowResolution, "radius below two lattice spacings");
  const auto dist = distance_to_marked(dom, ls.lattice_in_set);
  MinkowskiEstimate est;
  for (double r : radii) {
    double area = 0.0;
    for (std::size_t v = 0; v < f.size(); ++v)
      if (f[v] != 0.0 && dist[v] <= r) area += f[v];
    est.radii.push_back(r);
    est.masses.push_back(0.5 * std::sqrt(std::abs(std::log(r))) * area * h * h);
  }
  return est;
}

std::string local_set_json(const LocalSetSample& ls) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(ls.kind));
  j["a"] = ls.a;
  j["b"] = ls.b;
  j["mesh"] = ls.problem->mesh;
  j["vertices"] = ls.interior_vertices();
  return j.dump();
}

void write_local_set_pgm(const LocalSetSample& ls, const std::string& path) {
  if (!ls.problem->domain) throw Error(ErrorCode::kInvalidArgument, "raster export needs a lattice domain");
  const auto& dom = *ls.problem->domain;
  const auto box = dom.grid_box();
  std::vector<unsigned char> img(static_cast<std::size_t>(box.ni) * box.nj, 0);
  for (int j = 0; j < box.nj; ++j)
    for (int i = 0; i < box.ni; ++i) {
      const auto kind = dom.site_kind(i + box.i0, j + box.j0);
      // Row 0 of the image is the top of the domain.
      auto& px = img[static_cast<std::size_t>(box.nj - 1 - j) * box.ni + i];
      if (kind == SiteKind::kBoundary) px = 128;
      if (kind == SiteKind::kInterior) px = ls.contains(*dom.interior_at(i + box.i0, j + box.j0)) ? 255 : 32;
    }
  std::string bytes = "P5\n" + std::to_string(box.ni) + ' ' + std::to_string(box.nj) + "\n255\n";
  bytes.append(reinterpret_cast<const char*>(img.data()), img.size());
  write_file_atomic(path, bytes);
}

}  // namespace fpslab
