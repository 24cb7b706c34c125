#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <deque>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fpslab/error.hpp"
#include "fpslab/local_sets.hpp"
#include "fpslab/rng.hpp"

using namespace fpslab;

namespace {

CalibrationProfile unit_profile(double mesh) {
  CalibrationProfile p;
  p.mesh = mesh;
  p.calibrated = true;
  return p;
}

// n x n interior block; the outer ring of sites are boundary nodes with the
// given values.
std::shared_ptr<CableGraph> block(int n, const std::vector<double>& boundary_values) {
  std::vector<int> sites(n * n);
  for (int i = 0; i < n * n; ++i) sites[i] = i;
  std::vector<FixedNode> fixed;
  std::vector<CableEdge> edges;
  std::uint64_t key = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k], b = j + dj[k];
        if (a >= 0 && b >= 0 && a < n && b < n) {
          if (b * n + a > j * n + i) edges.push_back({j * n + i, b * n + a, 1.0, key++});
        } else {
          const double v = boundary_values[fixed.size() % boundary_values.size()];
          fixed.push_back({v, FixedKind::kBoundary, 0, static_cast<int>(fixed.size())});
          edges.push_back({j * n + i, n * n + static_cast<int>(fixed.size()) - 1, 1.0, key++});
        }
      }
    }
  return std::make_shared<CableGraph>(std::move(sites), std::move(fixed), std::move(edges));
}

// Breadth-first search from the admissible boundary nodes.
std::vector<std::uint8_t> bfs_oracle(const CableGraph& g, const std::vector<double>& total, const EdgeCrossings& ec,
                                     double level) {
  const int nf = g.free_count();
  auto value = [&](int node) { return node < nf ? total[node] : g.fixed_node(node).value; };
  std::vector<std::uint8_t> seen(g.node_count(), 0);
  std::deque<int> queue;
  for (int k = nf; k < g.node_count(); ++k)
    if (value(k) >= level) {
      seen[k] = 1;
      queue.push_back(k);
    }
  while (!queue.empty()) {
    const int x = queue.front();
    queue.pop_front();
    for (const auto& e : g.edges()) {
      if (e.a != x && e.b != x) continue;
      const int y = e.a == x ? e.b : e.a;
      if (seen[y] || value(y) < level) continue;
      if (ec.crossed_below(e, value(e.a), value(e.b), level)) continue;
      seen[y] = 1;
      queue.push_back(y);
    }
  }
  return {seen.begin(), seen.begin() + nf};
}

struct Disk {
  std::shared_ptr<const LatticeDomain> dom;
  BoundaryData u;
  std::shared_ptr<const Problem> problem;
};

Disk make_disk(double mesh, double u_value = 0.0, DomainSpec spec = DomainSpec::unit_disk()) {
  Disk d;
  spec.set_constant(0, u_value);
  d.dom = std::make_shared<LatticeDomain>(build_lattice(spec, mesh));
  d.u = boundary_data_from_spec(*d.dom);
  d.problem = make_problem(d.dom, d.u, unit_profile(mesh));
  return d;
}

bool subset(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("4x4 extraction equals breadth-first search") {
  for (int inst = 0; inst < 1000; ++inst) {
    Stream s(555, static_cast<std::uint64_t>(inst));
    std::vector<double> bv(16);
    for (auto& v : bv) v = 2.0 * s.uniform() - 1.2;
    auto g = block(4, bv);
    auto prob = make_graph_problem(g, 0.1, unit_profile(0.1));
    FieldSample f;
    std::vector<double> total(16);
    for (int i = 0; i < 16; ++i) {
      total[i] = 1.5 * s.normal();
      f.phi.push_back(total[i] - prob->harmonic[i]);
    }
    const EdgeCrossings ec(derive_seed(8, inst), 0.5 + s.uniform());
    const double a = 1.5 * s.uniform();
    const auto ls = extract_fps(prob, f, ec, a);
    REQUIRE(ls.in_set == bfs_oracle(*g, ls.total, ec, -a));
  }
}

TEST_CASE("trivial FPS cases") {
  auto d = make_disk(0.05, -1.0);
  const auto field = sample_gff(*d.problem->oracle, 3);
  const auto ec = sample_edge_crossings(field, d.problem->profile);
  const auto ls = extract_fps(d.problem, field, ec, 1.0);
  CHECK(ls.interior_size() == 0);
  std::vector<double> ones(d.dom->interior_count(), 1.0);
  CHECK(measure_nu(ls, ones) == 0.0);

  auto z = make_disk(0.05);
  const auto f2 = sample_gff(*z.problem->oracle, 4);
  double lo = 0.0;
  for (double x : f2.phi) lo = std::min(lo, x);
  const auto all = extract_fps(z.problem, f2, sample_edge_crossings(f2, z.problem->profile), 50.0 - lo);
  CHECK(all.interior_size() == z.dom->interior_count());
  CHECK_THROWS_AS(complement_problem(all), Error);
}

TEST_CASE("structural invariants on the unit disk") {
  auto d = make_disk(0.04);
  auto shifted = make_disk(0.04, 0.3);
  std::vector<double> neg_u = d.u.values;
  for (auto& v : neg_u) v = -v;
  for (int k = 0; k < 30; ++k) {
    const auto field = sample_gff(*d.problem->oracle, derive_seed(40, k));
    const auto ec = sample_edge_crossings(field, d.problem->profile);
    const auto a1 = extract_fps(d.problem, field, ec, 0.5);
    const auto a2 = extract_fps(d.problem, field, ec, 1.0);
    CHECK(subset(a1.lattice_in_set, a2.lattice_in_set));
    // Larger boundary data gives a larger set.
    const auto a1u = extract_fps(shifted.problem, field, ec, 0.5);
    CHECK(subset(a1.lattice_in_set, a1u.lattice_in_set));
    for (double nu : a2.nu) REQUIRE(nu >= 0.0);

    // Up set equals the down set of the mirrored field.
    const auto up = extract_fps_up(d.problem, field, ec, 0.7);
    FieldSample mirrored = field;
    for (auto& x : mirrored.phi) x = -x;
    const auto down_mirror = extract_fps(d.problem, mirrored, ec.negated(), 0.7);
    CHECK(up.in_set == down_mirror.in_set);
    CHECK(up.nu == down_mirror.nu);
    for (std::size_t v = 0; v < up.nu.size(); ++v)
      if (up.lattice_in_set[v]) REQUIRE(up.nu[v] == doctest::Approx((0.7 - up.lattice_total[v]) * 0.04 * 0.04));

    const auto tvs = extract_tvs(d.problem, field, ec, 0.5, 0.7);
    const auto tvs_big = extract_tvs(d.problem, field, ec, 1.0, 0.9);
    for (std::size_t v = 0; v < tvs.in_set.size(); ++v)
      if (tvs.in_set[v]) REQUIRE((a1.in_set[v] && up.in_set[v]));
    CHECK(subset(tvs.lattice_in_set, tvs_big.lattice_in_set));
  }
}

TEST_CASE("complement harmonic function") {
  auto d = make_disk(0.04);
  const auto field = sample_gff(*d.problem->oracle, 77);
  const auto ec = sample_edge_crossings(field, d.problem->profile);
  const auto ls = extract_fps(d.problem, field, ec, 1.0);
  const auto comp = complement_problem(ls);
  const auto& g = comp->graph();
  // u = 0 >= -a everywhere on the boundary, so every boundary cable is cut
  // and h_A + u is identically -a.
  for (const auto& f : g.fixed_nodes()) CHECK(f.kind == FixedKind::kCut);
  for (double h : comp->harmonic) REQUIRE(h == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(g.free_count() + ls.interior_size() == d.dom->interior_count());

  // Restriction to one component.
  const int z = g.free_site(0);
  const auto one = complement_problem(ls, z);
  CHECK(one->free_count() <= g.free_count());
  CHECK(free_node_of(*one, z) >= 0);
  const int in_set = ls.interior_vertices().empty() ? -1 : ls.interior_vertices().front();
  if (in_set >= 0) CHECK_THROWS_AS(complement_problem(ls, in_set), Error);
}

TEST_CASE("avoidance of a boundary component at the level") {
  DomainSpec s = DomainSpec::annulus(0.3);
  s.set_constant(1, -1.0);
  auto d = make_disk(0.03, 0.0, s);
  const auto inner = d.dom->boundary_vertices(std::vector<int>{1});
  for (int k = 0; k < 20; ++k) {
    const auto field = sample_gff(*d.problem->oracle, derive_seed(13, k));
    const auto ec = sample_edge_crossings(field, d.problem->profile);
    const auto ls = extract_fps(d.problem, field, ec, 1.0);
    const auto comp = complement_problem(ls);
    std::vector<std::uint8_t> kept(d.dom->boundary_count(), 0);
    for (const auto& f : comp->graph().fixed_nodes())
      if (f.kind == FixedKind::kBoundary && f.component == 1) kept[f.site] = 1;
    // Inner vertices next to the complement stay Dirichlet nodes at -a
    // rather than being replaced by cuts.
    std::vector<std::uint8_t> touched(d.dom->boundary_count(), 0);
    const auto& lg = d.problem->graph();
    for (const auto& e : lg.edges()) {
      const int b = lg.is_fixed(e.b) ? e.b : e.a;
      const int x = b == e.b ? e.a : e.b;
      if (!lg.is_fixed(b) || lg.fixed_node(b).component != 1) continue;
      CHECK(ec.crossed_below(e, ls.total[x], -1.0, -1.0));
      if (!ls.in_set[x]) touched[lg.fixed_node(b).site] = 1;
    }
    int touching = 0;
    for (int b : inner) {
      touching += touched[b];
      if (touched[b]) REQUIRE(kept[b]);
    }
    CHECK(touching > 0);
  }
}

TEST_CASE("nested FPS") {
  auto d = make_disk(0.04);
  const double lam = std::sqrt(std::numbers::pi / 8);
  const std::vector<double> levels{lam, 2 * lam, 3 * lam, 4 * lam};
  const auto nest = nested_fps(d.problem, levels, 91);
  REQUIRE(nest.size() == 4);
  for (std::size_t k = 1; k < nest.size(); ++k) {
    CHECK(subset(nest[k - 1].lattice_in_set, nest[k].lattice_in_set));
    CHECK(nest[k].interior_size() >= nest[k - 1].interior_size());
    for (double nu : nest[k].nu) REQUIRE(nu >= 0.0);
  }
  const std::vector<double> single{lam};
  const auto one = nested_fps(d.problem, single, 91);
  const auto field = sample_gff(*d.problem->oracle, 91);
  const auto direct = extract_fps(d.problem, field, sample_edge_crossings(field, d.problem->profile), lam);
  CHECK(one[0].in_set == direct.in_set);
  const std::vector<double> bad{1.0, 0.5};
  CHECK_THROWS_AS(nested_fps(d.problem, bad, 1), Error);
}

TEST_CASE("distance transform matches brute force") {
  auto d = make_disk(0.1);
  const int n = d.dom->interior_count();
  std::vector<std::uint8_t> marked(n, 0);
  Stream s(4, 4);
  for (auto& m : marked) m = s.uniform() < 0.05;
  const auto dist = distance_to_marked(*d.dom, marked);
  for (int v = 0; v < n; ++v) {
    double best = INFINITY;
    for (int w = 0; w < n; ++w)
      if (marked[w]) best = std::min(best, std::abs(d.dom->interior_point(v) - d.dom->interior_point(w)));
    REQUIRE(dist[v] == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("Minkowski estimate edge cases") {
  auto d = make_disk(0.02);
  const int n = d.dom->interior_count();
  std::vector<double> f(n, 0.0);
  double window = 0.0;
  for (int v = 0; v < n; ++v)
    if (std::abs(d.dom->interior_point(v)) < 0.5) {
      f[v] = 1.0;
      window += 0.02 * 0.02;
    }
  const auto field = sample_gff(*d.problem->oracle, 1);
  const auto ec = sample_edge_crossings(field, d.problem->profile);
  const auto all = extract_fps(d.problem, field, ec, 1e3);
  const std::vector<double> radii{0.05, 0.1};
  const auto est = minkowski_estimate(all, f, radii);
  for (std::size_t k = 0; k < radii.size(); ++k)
    CHECK(est.masses[k] == doctest::Approx(0.5 * std::sqrt(std::abs(std::log(radii[k]))) * window));
  const auto none = extract_fps(d.problem, field, ec, -1e3);
  CHECK(minkowski_estimate(none, f, radii).masses[0] == 0.0);
  const std::vector<double> tiny{0.03};
  CHECK_THROWS_AS(minkowski_estimate(all, f, tiny), Error);
}

TEST_CASE("local set exports") {
  auto d = make_disk(0.05);
  const auto field = sample_gff(*d.problem->oracle, 2);
  const auto ls = extract_fps(d.problem, field, sample_edge_crossings(field, d.problem->profile), 1.0);
  const auto j = nlohmann::json::parse(local_set_json(ls));
  CHECK(j["kind"] == "fps_down");
  CHECK(j["vertices"].size() == static_cast<std::size_t>(ls.interior_size()));
  const std::string path = "fpslab_set_test.pgm";
  write_local_set_pgm(ls, path);
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  REQUIRE(fp != nullptr);
  char magic[3] = {};
  CHECK(std::fread(magic, 1, 2, fp) == 2);
  std::fclose(fp);
  CHECK(std::string(magic) == "P5");
  std::remove(path.c_str());
}
