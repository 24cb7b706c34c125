#include "fpslab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/SparseCholesky>
#include <nlohmann/json.hpp>

#include "fpslab/cable_graph.hpp"
#include "fpslab/error.hpp"

namespace fpslab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double t) {
  t = std::fmod(t, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

}  // namespace

DomainSpec DomainSpec::unit_disk() { return DomainSpec{}; }

DomainSpec DomainSpec::annulus(double inner_radius, double outer_radius) {
  DomainSpec s;
  s.outer.radius = outer_radius;
  s.holes.push_back(Disk{{0.0, 0.0}, inner_radius});
  return s;
}

void DomainSpec::validate() const {
  if (!(outer.radius > 0.0) || !std::isfinite(outer.radius))
    throw Error(ErrorCode::kDegenerateDomain, "outer radius must be positive");
  for (std::size_t k = 0; k < holes.size(); ++k) {
    const auto& h = holes[k];
    if (!(h.radius > 0.0)) throw Error(ErrorCode::kDegenerateDomain, "hole radius must be positive");
    if (!(std::abs(h.center - outer.center) + h.radius < outer.radius))
      throw Error(ErrorCode::kDegenerateDomain, "hole " + std::to_string(k) + " not strictly inside outer disk");
    for (std::size_t l = 0; l < k; ++l) {
      if (!(std::abs(h.center - holes[l].center) > h.radius + holes[l].radius))
        throw Error(ErrorCode::kDegenerateDomain, "holes " + std::to_string(l) + " and " + std::to_string(k) + " overlap");
    }
  }
  // Arcs of each component must tile the circle.
  for (int c = 0; c < component_count(); ++c) {
    std::vector<std::pair<double, double>> pieces;
    for (const auto& a : arcs) {
      if (a.component < 0 || a.component >= component_count())
        throw Error(ErrorCode::kInvalidArgument, "arc refers to unknown component " + std::to_string(a.component));
      if (a.component != c) continue;
      const double len = a.to - a.from;
      if (!(len > 0.0) || len > kTwoPi + 1e-12 || !std::isfinite(a.value))
        throw Error(ErrorCode::kInvalidArgument, "bad arc on component " + std::to_string(c));
      pieces.emplace_back(wrap_angle(a.from), len);
    }
    if (pieces.empty()) continue;
    std::sort(pieces.begin(), pieces.end());
    double total = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      total += pieces[i].second;
      const double next = i + 1 < pieces.size() ? pieces[i + 1].first : pieces[0].first + kTwoPi;
      if (std::abs(pieces[i].first + pieces[i].second - next) > 1e-9)
        throw Error(ErrorCode::kInvalidArgument, "arcs on component " + std::to_string(c) + " do not partition the circle");
    }
    if (std::abs(total - kTwoPi) > 1e-9)
      throw Error(ErrorCode::kInvalidArgument, "arcs on component " + std::to_string(c) + " do not cover the circle");
  }
}

double DomainSpec::value_at(int component, double theta) const {
  theta = wrap_angle(theta);
  for (const auto& a : arcs) {
    if (a.component != component) continue;
    const double offset = wrap_angle(theta - a.from);
    if (offset < a.to - a.from) return a.value;
  }
  return 0.0;
}

DomainSpec& DomainSpec::set_constant(int component, double value) {
  std::erase_if(arcs, [&](const BoundaryArc& a) { return a.component == component; });
  arcs.push_back(BoundaryArc{component, 0.0, kTwoPi, value});
  return *this;
}

bool DomainSpec::contains(Point z) const {
  if (!(std::abs(z - outer.center) < outer.radius)) return false;
  for (const auto& h : holes)
    if (!(std::abs(z - h.center) > h.radius)) return false;
  return true;
}

void to_json(nlohmann::json& j, const DomainSpec& spec) {
  auto disk = [](const Disk& d) {
    return nlohmann::json{{"center", {d.center.real(), d.center.imag()}}, {"radius", d.radius}};
  };
  j = nlohmann::json::object();
  j["outer"] = disk(spec.outer);
  j["holes"] = nlohmann::json::array();
  for (const auto& h : spec.holes) j["holes"].push_back(disk(h));
  j["arcs"] = nlohmann::json::array();
  for (const auto& a : spec.arcs)
    j["arcs"].push_back({{"component", a.component}, {"from", a.from}, {"to", a.to}, {"value", a.value}});
}

void from_json(const nlohmann::json& j, DomainSpec& spec) {
  auto disk = [](const nlohmann::json& d) {
    const auto& c = d.at("center");
    return Disk{{c.at(0).get<double>(), c.at(1).get<double>()}, d.at("radius").get<double>()};
  };
  spec = DomainSpec{};
  spec.outer = disk(j.at("outer"));
  if (j.contains("holes"))
    for (const auto& h : j.at("holes")) spec.holes.push_back(disk(h));
  if (j.contains("arcs"))
    for (const auto& a : j.at("arcs"))
      spec.arcs.push_back(BoundaryArc{a.at("component").get<int>(), a.at("from").get<double>(),
                                      a.at("to").get<double>(), a.at("value").get<double>()});
  spec.validate();
}

DomainSpec load_domain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in).get<DomainSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path + ": " + e.what());
  }
}

Point LatticeDomain::interior_point(int v) const {
  const auto [i, j] = interior_ij_[v];
  return {i * mesh_, j * mesh_};
}

Point LatticeDomain::boundary_point(int b) const {
  const auto [i, j] = boundary_ij_[b];
  return {i * mesh_, j * mesh_};
}

Point LatticeDomain::node_point(int node) const {
  return node < interior_count() ? interior_point(node) : boundary_point(node - interior_count());
}

std::vector<int> LatticeDomain::boundary_vertices(std::span<const int> components) const {
  std::vector<int> out;
  for (int b = 0; b < boundary_count(); ++b)
    if (std::find(components.begin(), components.end(), boundary_component_[b]) != components.end()) out.push_back(b);
  return out;
}

int LatticeDomain::site_index(int i, int j) const {
  const int a = i - i0_, b = j - j0_;
  if (a < 0 || b < 0 || a >= ni_ || b >= nj_) return -1;
  return b * ni_ + a;
}

SiteKind LatticeDomain::site(int i, int j) const {
  const int s = site_index(i, j);
  return s < 0 ? SiteKind::kOutside : kind_[s];
}

std::optional<int> LatticeDomain::interior_at(int i, int j) const {
  const int s = site_index(i, j);
  if (s < 0 || kind_[s] != SiteKind::kInterior) return std::nullopt;
  return local_[s];
}

int LatticeDomain::nearest_interior(Point z) const {
  const int ci = static_cast<int>(std::lround(z.real() / mesh_));
  const int cj = static_cast<int>(std::lround(z.imag() / mesh_));
  int best = -1;
  double best_d = 2.0 * mesh_;
  for (int di = -2; di <= 2; ++di)
    for (int dj = -2; dj <= 2; ++dj)
      if (auto v = interior_at(ci + di, cj + dj)) {
        const double d = std::abs(interior_point(*v) - z);
        if (d <= best_d) {
          if (d < best_d || best < 0 || *v < best) best = *v;
          best_d = d;
        }
      }
  if (best < 0) throw Error(ErrorCode::kVertexOutOfDomain, "no interior vertex near the requested point");
  return best;
}

std::vector<double> LatticeDomain::boundary_values_from_spec() const {
  std::vector<double> v(boundary_count());
  for (int b = 0; b < boundary_count(); ++b) v[b] = spec_.value_at(boundary_component_[b], boundary_angle_[b]);
  return v;
}

LatticeDomain build_lattice(const DomainSpec& spec, double mesh) {
  if (!(mesh > 0.0) || !std::isfinite(mesh)) throw Error(ErrorCode::kInvalidArgument, "mesh must be positive");
  spec.validate();
  LatticeDomain d;
  d.spec_ = spec;
  d.mesh_ = mesh;
  const auto c = spec.outer.center;
  const double r = spec.outer.radius;
  d.i0_ = static_cast<int>(std::floor((c.real() - r) / mesh)) - 1;
  d.j0_ = static_cast<int>(std::floor((c.imag() - r) / mesh)) - 1;
  d.ni_ = static_cast<int>(std::ceil((c.real() + r) / mesh)) + 2 - d.i0_;
  d.nj_ = static_cast<int>(std::ceil((c.imag() + r) / mesh)) + 2 - d.j0_;
  if (static_cast<double>(d.ni_) * d.nj_ > 4e8) throw Error(ErrorCode::kInvalidArgument, "mesh too fine");
  d.kind_.assign(static_cast<std::size_t>(d.ni_) * d.nj_, SiteKind::kOutside);
  d.local_.assign(d.kind_.size(), -1);

  for (int b = 0; b < d.nj_; ++b)
    for (int a = 0; a < d.ni_; ++a) {
      const Point p{(a + d.i0_) * mesh, (b + d.j0_) * mesh};
      if (spec.contains(p)) {
        const std::size_t s = static_cast<std::size_t>(b) * d.ni_ + a;
        d.kind_[s] = SiteKind::kInterior;
        d.local_[s] = static_cast<int>(d.interior_ij_.size());
        d.interior_ij_.emplace_back(a + d.i0_, b + d.j0_);
      }
    }
  if (d.interior_ij_.empty()) throw Error(ErrorCode::kMeshTooCoarse, "no interior lattice points");

  constexpr int kDi[4] = {1, 0, -1, 0};
  constexpr int kDj[4] = {0, 1, 0, -1};
  std::vector<int> per_component(spec.component_count(), 0);
  for (int b = 0; b < d.nj_; ++b)
    for (int a = 0; a < d.ni_; ++a) {
      const std::size_t s = static_cast<std::size_t>(b) * d.ni_ + a;
      if (d.kind_[s] != SiteKind::kOutside) continue;
      const int i = a + d.i0_, j = b + d.j0_;
      bool adjacent = false;
      for (int k = 0; k < 4 && !adjacent; ++k) adjacent = d.site(i + kDi[k], j + kDj[k]) == SiteKind::kInterior;
      if (!adjacent) continue;
      const Point p{i * mesh, j * mesh};
      int comp = 0;
      Point center = c;
      for (std::size_t h = 0; h < spec.holes.size(); ++h)
        if (std::abs(p - spec.holes[h].center) <= spec.holes[h].radius) {
          comp = static_cast<int>(h) + 1;
          center = spec.holes[h].center;
        }
      d.kind_[s] = SiteKind::kBoundary;
      d.local_[s] = static_cast<int>(d.boundary_ij_.size());
      d.boundary_ij_.emplace_back(i, j);
      d.boundary_component_.push_back(comp);
      d.boundary_angle_.push_back(wrap_angle(std::arg(p - center)));
      ++per_component[comp];
    }
  for (int k = 0; k < spec.component_count(); ++k)
    if (per_component[k] < kMinBoundaryVertices)
      throw Error(ErrorCode::kMeshTooCoarse, "boundary component " + std::to_string(k) + " has " +
                                                 std::to_string(per_component[k]) + " boundary vertices");

  const int n_int = d.interior_count();
  for (int v = 0; v < n_int; ++v) {
    const auto [i, j] = d.interior_ij_[v];
    for (int k = 0; k < 4; ++k) {
      const int s = d.site_index(i + kDi[k], j + kDj[k]);
      if (s < 0 || d.kind_[s] == SiteKind::kOutside) continue;
      if (d.kind_[s] == SiteKind::kBoundary)
        d.edges_.push_back({v, n_int + d.local_[s]});
      else if (d.local_[s] > v)
        d.edges_.push_back({v, d.local_[s]});
    }
  }

  std::vector<int> free_site(n_int);
  for (int v = 0; v < n_int; ++v) free_site[v] = v;
  std::vector<FixedNode> fixed(d.boundary_count());
  for (int b = 0; b < d.boundary_count(); ++b) fixed[b] = FixedNode{0.0, FixedKind::kBoundary, d.boundary_component_[b], b};
  std::vector<CableEdge> cables;
  cables.reserve(d.edges_.size());
  for (std::size_t e = 0; e < d.edges_.size(); ++e) cables.push_back({d.edges_[e].a, d.edges_[e].b, 1.0, e});
  auto graph = std::make_shared<CableGraph>(std::move(free_site), std::move(fixed), std::move(cables));

  // Every interior vertex must reach the boundary.
  const auto comps = graph->free_components();
  std::vector<std::uint8_t> touches(comps.count, 0);
  for (const auto& e : graph->edges()) {
    if (graph->is_fixed(e.b) && !graph->is_fixed(e.a)) touches[comps.label[e.a]] = 1;
    if (graph->is_fixed(e.a) && !graph->is_fixed(e.b)) touches[comps.label[e.b]] = 1;
  }
  if (comps.count != 1 || !touches[0])
    throw Error(ErrorCode::kDegenerateDomain, "lattice interior is not connected at this mesh");
  d.graph_ = std::move(graph);
  return d;
}

double BoundaryData::min_value() const {
  return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}
double BoundaryData::max_value() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

BoundaryData extend_harmonically(const LatticeDomain& dom, std::span<const double> boundary_values) {
  if (static_cast<int>(boundary_values.size()) != dom.boundary_count())
    throw Error(ErrorCode::kInvalidArgument, "boundary values must cover every boundary vertex");
  const auto& g = *dom.cable_graph();
  const Eigen::SparseMatrix<double> lap = g.laplacian();
  const Eigen::VectorXd rhs = g.dirichlet_rhs(boundary_values);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(lap);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kSolverFailure, "factorization failed");
  Eigen::VectorXd x = solver.solve(rhs);
  // One step of iterative refinement keeps the residual at round-off level.
  x += solver.solve(rhs - lap * x);
  double scale = 1.0;
  for (double v : boundary_values) scale = std::max(scale, std::abs(v));
  const double residual = (lap * x - rhs).lpNorm<Eigen::Infinity>();
  if (!std::isfinite(residual) || residual > 1e-10 * scale)
    throw Error(ErrorCode::kSolverFailure, "harmonic extension residual " + std::to_string(residual));
  BoundaryData out;
  out.values.assign(boundary_values.begin(), boundary_values.end());
  out.harmonic_extension.assign(x.data(), x.data() + x.size());
  return out;
}

BoundaryData boundary_data_from_spec(const LatticeDomain& dom) {
  const auto v = dom.boundary_values_from_spec();
  return extend_harmonically(dom, v);
}

}  // namespace fpslab
