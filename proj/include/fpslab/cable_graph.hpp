#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

namespace fpslab {

enum class FixedKind : std::uint8_t {
  kBoundary,  // a lattice boundary vertex
  kCut,       // a point inside an edge where an explored set stops
  kSet,       // a lattice vertex turned into a Dirichlet node
};

/// Dirichlet node of a cable network. `value` is the prescribed total
/// field (harmonic part plus boundary data) at the node.
struct FixedNode {
  double value = 0.0;
  FixedKind kind = FixedKind::kBoundary;
  int component = -1;  // boundary component id, -1 for cuts and set nodes
  int site = -1;       // lattice boundary index (kBoundary) or interior index (kSet)
};

/// A cable (edge) of resistance `resistance`. `key` identifies the lattice
/// edge it lies on and keys that edge's random stream.
struct CableEdge {
  int a;
  int b;
  double resistance;
  std::uint64_t key;
};

/// Metric graph with Dirichlet nodes: the common representation of the
/// lattice domain and of complements of explored sets. Free nodes are
/// [0, free_count()), fixed nodes follow.
class CableGraph {
 public:
  CableGraph() = default;
  CableGraph(std::vector<int> free_site, std::vector<FixedNode> fixed, std::vector<CableEdge> edges);

  int free_count() const { return static_cast<int>(free_site_.size()); }
  int fixed_count() const { return static_cast<int>(fixed_.size()); }
  int node_count() const { return free_count() + fixed_count(); }
  bool is_fixed(int node) const { return node >= free_count(); }

  /// Lattice interior vertex behind free node i.
  int free_site(int i) const { return free_site_[i]; }
  std::span<const int> free_sites() const { return free_site_; }
  const FixedNode& fixed(int k) const { return fixed_[k]; }
  const FixedNode& fixed_node(int node) const { return fixed_[node - free_count()]; }
  std::span<const FixedNode> fixed_nodes() const { return fixed_; }

  std::span<const CableEdge> edges() const { return edges_; }
  const CableEdge& edge(int e) const { return edges_[e]; }

  /// Edge ids incident to a node.
  std::span<const int> incident(int node) const {
    return {adj_.data() + offset_[node], adj_.data() + offset_[node + 1]};
  }
  int other_end(int e, int node) const { return edges_[e].a == node ? edges_[e].b : edges_[e].a; }

  /// Laplacian on free nodes, conductance 1/resistance per cable.
  Eigen::SparseMatrix<double> laplacian() const;

  /// Right-hand side of the Dirichlet problem for the given fixed values.
  Eigen::VectorXd dirichlet_rhs(std::span<const double> fixed_values) const;
  std::vector<double> fixed_values() const;

  /// Free-node connected components; labels in [0, count).
  struct Components {
    std::vector<int> label;
    int count = 0;
  };
  Components free_components() const;

  /// Sub-network made of the free nodes with `keep[i] != 0`, their
  /// incident cables and the fixed nodes those cables reach.
  CableGraph restrict_to(std::span<const std::uint8_t> keep) const;

  /// Turn the free nodes with `mask[i] != 0` into kSet fixed nodes carrying
  /// `value`. Cables joining two fixed nodes are dropped.
  CableGraph pin_free(std::span<const std::uint8_t> mask, double value) const;

 private:
  std::vector<int> free_site_;
  std::vector<FixedNode> fixed_;
  std::vector<CableEdge> edges_;
  std::vector<int> offset_;
  std::vector<int> adj_;
};

}  // namespace fpslab
