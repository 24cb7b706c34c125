#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fpslab {

class CableGraph;

using Point = std::complex<double>;

struct Disk {
  Point center{0.0, 0.0};
  double radius = 1.0;
};

/// One piece of the piecewise-constant boundary condition. Component 0 is
/// the outer circle, component k >= 1 is hole k-1. The angular interval
/// [from, to) is measured around the component's own center.
struct BoundaryArc {
  int component = 0;
  double from = 0.0;
  double to = 0.0;
  double value = 0.0;
};

/// Circle domain: an outer disk with finitely many disjoint round holes.
struct DomainSpec {
  Disk outer;
  std::vector<Disk> holes;
  std::vector<BoundaryArc> arcs;

  static DomainSpec unit_disk();
  static DomainSpec annulus(double inner_radius, double outer_radius = 1.0);

  int component_count() const { return 1 + static_cast<int>(holes.size()); }

  /// Throws DegenerateDomain / InvalidArgument when the invariants fail.
  void validate() const;

  /// Boundary value on `component` at angle `theta`; components without
  /// arcs carry zero boundary data.
  double value_at(int component, double theta) const;

  /// Replace all arcs of `component` with a single constant piece.
  DomainSpec& set_constant(int component, double value);

  bool contains(Point z) const;
};

void to_json(nlohmann::json& j, const DomainSpec& spec);
void from_json(const nlohmann::json& j, DomainSpec& spec);
DomainSpec load_domain(const std::string& path);

enum class SiteKind : std::uint8_t { kOutside, kInterior, kBoundary };

/// Square-lattice discretization of a DomainSpec.
///
/// Nodes are numbered interior vertices first, then boundary vertices:
/// node n < interior_count() is interior vertex n, otherwise boundary
/// vertex n - interior_count(). Every edge has at least one interior end.
class LatticeDomain {
 public:
  struct Edge {
    int a;  // node id
    int b;  // node id
  };

  const DomainSpec& spec() const { return spec_; }
  double mesh() const { return mesh_; }

  int interior_count() const { return static_cast<int>(interior_ij_.size()); }
  int boundary_count() const { return static_cast<int>(boundary_ij_.size()); }
  int node_count() const { return interior_count() + boundary_count(); }

  Point interior_point(int v) const;
  Point boundary_point(int b) const;
  Point node_point(int node) const;
  std::pair<int, int> interior_ij(int v) const { return interior_ij_[v]; }

  int boundary_component(int b) const { return boundary_component_[b]; }
  /// Angle of the nearest continuum boundary point, around its circle center.
  double boundary_angle(int b) const { return boundary_angle_[b]; }
  /// Boundary vertices of the given component ids.
  std::vector<int> boundary_vertices(std::span<const int> components) const;

  std::span<const Edge> edges() const { return edges_; }

  /// Interior vertex at lattice coordinates (i, j), if any.
  std::optional<int> interior_at(int i, int j) const;
  /// Interior vertex nearest to z (Euclidean); throws VertexOutOfDomain when
  /// no interior vertex lies within two lattice spacings.
  int nearest_interior(Point z) const;

  /// Zero-boundary cable network (unit resistances) shared by oracles.
  std::shared_ptr<const CableGraph> cable_graph() const { return graph_; }

  /// Boundary values sampled from the DomainSpec arcs.
  std::vector<double> boundary_values_from_spec() const;

  /// Bounding box of the site grid: first (i, j) and extents.
  struct GridBox {
    int i0, j0, ni, nj;
  };
  GridBox grid_box() const { return {i0_, j0_, ni_, nj_}; }
  SiteKind site_kind(int i, int j) const { return site(i, j); }

 private:
  friend LatticeDomain build_lattice(const DomainSpec& spec, double mesh);

  SiteKind site(int i, int j) const;
  int site_index(int i, int j) const;

  DomainSpec spec_;
  double mesh_ = 0.0;
  int i0_ = 0, j0_ = 0, ni_ = 0, nj_ = 0;
  std::vector<SiteKind> kind_;
  std::vector<int> local_;  // index among interior or boundary vertices
  std::vector<std::pair<int, int>> interior_ij_;
  std::vector<std::pair<int, int>> boundary_ij_;
  std::vector<int> boundary_component_;
  std::vector<double> boundary_angle_;
  std::vector<Edge> edges_;
  std::shared_ptr<const CableGraph> graph_;
};

/// Throws MeshTooCoarse when any boundary component has fewer than
/// kMinBoundaryVertices boundary vertices, DegenerateDomain for invalid
/// geometry or a disconnected lattice.
LatticeDomain build_lattice(const DomainSpec& spec, double mesh);

inline constexpr int kMinBoundaryVertices = 16;

/// Piecewise-constant boundary data together with its discrete harmonic
/// extension u.
struct BoundaryData {
  std::vector<double> values;              // per boundary vertex
  std::vector<double> harmonic_extension;  // per interior vertex

  double min_value() const;
  double max_value() const;
};

/// Discrete harmonic extension; max-norm residual of the discrete Laplace
/// equation is at most 1e-10 (scaled by the data range) or SolverFailure.
BoundaryData extend_harmonically(const LatticeDomain& dom, std::span<const double> boundary_values);

/// Shorthand for extend_harmonically(dom, dom.boundary_values_from_spec()).
BoundaryData boundary_data_from_spec(const LatticeDomain& dom);

}  // namespace fpslab
