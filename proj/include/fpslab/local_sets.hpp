#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpslab/domain.hpp"
#include "fpslab/field.hpp"
#include "fpslab/potential.hpp"

namespace fpslab {

/// A Dirichlet problem for the total field: a cable network whose fixed
/// nodes carry total values, its factorized oracle, and the harmonic part
/// (u on the lattice, h_A + u on a complement) at the free nodes.
struct Problem {
  std::shared_ptr<const LatticeDomain> domain;  // may be null for hand-built networks
  int lattice_size = 0;                         // number of lattice interior vertices
  double mesh = 0.0;
  std::shared_ptr<const GreenOracle> oracle;
  std::vector<double> harmonic;
  CalibrationProfile profile;

  const CableGraph& graph() const { return oracle->graph(); }
  int free_count() const { return oracle->size(); }
};

/// Problem over an arbitrary network whose free node i sits on lattice
/// vertex i; fixed values are taken from the graph.
std::shared_ptr<const Problem> make_graph_problem(std::shared_ptr<const CableGraph> graph, double mesh,
                                                  const CalibrationProfile& profile);

/// Lattice problem with boundary data u. Pass `base` (an oracle of the same
/// lattice) to reuse its factorization.
std::shared_ptr<const Problem> make_problem(std::shared_ptr<const LatticeDomain> domain, const BoundaryData& u,
                                            const CalibrationProfile& profile, const GreenOracle* base = nullptr);

enum class LocalSetKind { kFpsDown, kFpsUp, kTvs };
std::string_view to_string(LocalSetKind kind);

/// An explored set. Quantities indexed by "free node" refer to the problem
/// the set was extracted in; "lattice" arrays cover every interior vertex
/// of the domain and accumulate over nested stages. Boundary vertices are
/// always part of the set.
struct LocalSetSample {
  LocalSetKind kind = LocalSetKind::kFpsDown;
  double a = 0.0;  // lower level is -a
  double b = 0.0;  // upper level is b
  std::shared_ptr<const Problem> problem;
  EdgeCrossings crossings;
  std::vector<double> total;          // per free node: phi + harmonic part
  std::vector<std::uint8_t> in_set;   // per free node
  std::vector<std::uint8_t> lattice_in_set;
  std::vector<double> lattice_total;
  std::vector<double> nu;             // per lattice vertex, zero off the set (empty for TVS)

  bool contains(int lattice_vertex) const { return lattice_in_set[lattice_vertex] != 0; }
  int interior_size() const;
  /// Lattice vertices of A minus the boundary.
  std::vector<int> interior_vertices() const;
  /// Is the node admissible for this set's levels?
  bool admissible(double value) const;
};

/// The discrete FPS at level -a: boundary-connected cluster of
/// {phi + u >= -a} on the metric graph.
LocalSetSample extract_fps(std::shared_ptr<const Problem> problem, const FieldSample& sample,
                           const EdgeCrossings& crossings, double a);

/// Mirror image: extract_fps applied to -phi, -u at level -b.
LocalSetSample extract_fps_up(std::shared_ptr<const Problem> problem, const FieldSample& sample,
                              const EdgeCrossings& crossings, double b);

/// Components of the vertex intersection of extract_fps(a) and
/// extract_fps_up(b) that reach the boundary (lattice adjacency).
LocalSetSample extract_tvs(std::shared_ptr<const Problem> problem, const FieldSample& sample,
                           const EdgeCrossings& crossings, double a, double b);

/// Dirichlet problem on the complement of the set. Cables leaving the set
/// are cut where the metric-graph field first reaches the level, which
/// becomes a fixed node. With `component_of`, only the complement component
/// containing that lattice vertex is kept. Throws EmptyComplement.
std::shared_ptr<const Problem> complement_problem(const LocalSetSample& ls, std::optional<int> component_of = {});

/// The cable network of complement_problem without factorizing it; may
/// have no free nodes.
std::shared_ptr<const CableGraph> complement_graph(const LocalSetSample& ls, std::optional<int> component_of = {});

/// Free node of `problem` sitting on lattice vertex v, or -1.
int free_node_of(const Problem& problem, int lattice_vertex);

/// Sample the field on the original lattice and extract FPS at increasing
/// levels, each stage exploring the complement of the previous one.
std::vector<LocalSetSample> nested_fps(std::shared_ptr<const Problem> lattice, std::span<const double> levels,
                                       std::uint64_t seed);

/// Sum of f times nu over the set; f is given per lattice vertex.
double measure_nu(const LocalSetSample& ls, std::span<const double> f);

struct MinkowskiEstimate {
  std::vector<double> radii;
  std::vector<double> masses;
};

/// (1/2) |log r|^{1/2} times the f-weighted area within Euclidean distance r
/// of the interior part of the set.
MinkowskiEstimate minkowski_estimate(const LocalSetSample& ls, std::span<const double> f, std::span<const double> radii);

/// Euclidean distance (model units) from every lattice vertex to the
/// nearest marked lattice vertex; exact separable transform.
std::vector<double> distance_to_marked(const LatticeDomain& dom, std::span<const std::uint8_t> marked);

std::string local_set_json(const LocalSetSample& ls);
void write_local_set_pgm(const LocalSetSample& ls, const std::string& path);

}  // namespace fpslab
