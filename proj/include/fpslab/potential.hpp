#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "fpslab/cable_graph.hpp"
#include "fpslab/domain.hpp"

namespace fpslab {

/// Normalization constants tying the discrete field to the continuum one.
struct CalibrationProfile {
  double kappa = 1.0;             // Green's function scale
  double self_singularity = 0.0;  // lattice constant s in G(z,z) = log(1/h)/(2pi) + s + g(z)
  double mesh = 0.0;
  double bridge_variance = 1.0;   // edge bridge duration per unit resistance
  double cell_weight = 1.0;       // nu weight per vertex, in units of mesh^2
  bool calibrated = false;
  std::vector<double> probe_radii;
  std::vector<double> residuals;  // relative CR error per probe
  double max_variance_z = 0.0;    // worst Monte Carlo variance deviation, in SE

  void require_calibrated() const;
};

void to_json(nlohmann::json& j, const CalibrationProfile& p);
void from_json(const nlohmann::json& j, CalibrationProfile& p);
CalibrationProfile load_profile(const std::string& path);

/// Factorized Dirichlet Laplacian of a cable network. Copies share the
/// factorization; all queries are const and safe to call concurrently.
class GreenOracle {
 public:
  GreenOracle(std::shared_ptr<const CableGraph> graph, double kappa);
  /// Oracle of the full lattice domain.
  GreenOracle(const LatticeDomain& dom, double kappa = 1.0);

  /// Same factorization over a graph with identical topology but other
  /// fixed values.
  GreenOracle with_graph(std::shared_ptr<const CableGraph> graph) const;

  const CableGraph& graph() const { return *graph_; }
  std::shared_ptr<const CableGraph> graph_ptr() const { return graph_; }
  double kappa() const { return kappa_; }
  int size() const { return graph_->free_count(); }

  /// Raw solve L^{-1} rhs (no kappa).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// kappa * L^{-1}(x, y), x and y free nodes.
  double green(int x, int y) const;
  Eigen::VectorXd green_column(int y) const;
  double green_diag(int x) const { return green(x, x); }
  /// kappa * diag(L^{-1}) for every free node, by selected inversion of the
  /// Cholesky factor.
  Eigen::VectorXd diagonal() const;
  /// kappa * d^T L^{-1} d.
  double quadratic_form(const Eigen::VectorXd& d) const;
  /// Gaussian vector with covariance kappa L^{-1} built from standard normals.
  Eigen::VectorXd correlate(const Eigen::VectorXd& xi) const;
  /// Discrete harmonic function with the given values on fixed nodes.
  Eigen::VectorXd harmonic(std::span<const double> fixed_values) const;

 private:
  struct Factor;
  GreenOracle() = default;
  void check_node(int x) const;

  std::shared_ptr<const CableGraph> graph_;
  std::shared_ptr<const Factor> factor_;
  double kappa_ = 1.0;
};

struct RegularizedDiagonal {
  std::vector<int> vertices;  // free nodes of the oracle's graph
  std::vector<double> g_values;
  std::vector<double> cr_values;
};

/// g(z) = G(z,z) - log(1/h)/(2pi) - s and CR = exp(2 pi g).
RegularizedDiagonal regularized_diagonal(const GreenOracle& oracle, const CalibrationProfile& profile,
                                         std::span<const int> vertices);

/// Least-squares fit of kappa and s on the unit disk lattice, using the raw
/// diagonal at the interior vertices nearest to the given radii on the real
/// axis. Monte Carlo checks are left to the calibration campaign.
CalibrationProfile fit_calibration(const LatticeDomain& unit_disk, std::span<const double> probe_radii);

/// Per fixed node: 0 or 1 pins the potential, -1 removes the node and its
/// cables (zero flux).
struct PinnedSolution {
  double energy = 0.0;          // sum over kept cables of c * (difference)^2
  Eigen::VectorXd potential;    // per free node
  std::vector<double> outflow;  // per fixed node, sum of c * (v(node) - v(neighbor))
};
PinnedSolution solve_pinned(const CableGraph& graph, std::span<const std::int8_t> role);

using ComponentSet = std::vector<int>;

double extremal_length(const GreenOracle& oracle, const ComponentSet& b1, const ComponentSet& b2);

/// EL between B and (boundary outside B) together with the lattice vertices A.
double extremal_length_with_set(const GreenOracle& oracle, const ComponentSet& b, std::span<const int> a_vertices);

double poisson_mass(const GreenOracle& oracle, const ComponentSet& b1, const ComponentSet& b2);

double weighted_boundary_average(const GreenOracle& oracle, const ComponentSet& b, const BoundaryData& u);

}  // namespace fpslab
