#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fpslab/local_sets.hpp"
#include "fpslab/potential.hpp"

namespace fpslab {

/// Per-sample values of one observable; `seeds[i]` produced `values[i]`.
struct ObservableSeries {
  std::string name;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;

  std::size_t size() const { return values.size(); }
};

/// CSV with columns sample_index, seed, value (written atomically).
std::string series_csv(const ObservableSeries& series);
void write_series_csv(const ObservableSeries& series, const std::string& path);

/// G_before(z,z) - G_{D\A}(z,z) at lattice vertex z, with the complement
/// taken in the problem the set was extracted in. `before` defaults to that
/// problem. Throws VertexInSet.
double hitting_time_observable(const LocalSetSample& ls, int z, const Problem* before = nullptr);

struct ExtremalDecrement {
  double before = 0.0;     // EL(B, rest of the boundary)
  double after = 0.0;      // EL(B together with the set, rest of the boundary)
  double decrement = 0.0;  // kappa * (before - after)
  double u_start = 0.0;    // flux-weighted mean of u over B
  double u_end = 0.0;      // constant value of u off B
};

/// Extremal-length decrement of an FPS (down or up) relative to the
/// boundary set B. Pass `el_before` to skip recomputing EL(B, rest).
/// Throws ConfigViolation unless u is a single constant beyond the level on
/// the rest of the boundary.
ExtremalDecrement extremal_distance_observable(const LocalSetSample& ls, const ComponentSet& b,
                                               std::optional<double> el_before = {});

/// Same decrement for a two-valued set of an annular domain; u must lie in
/// [-a, b] on B and be a constant outside (-a, b) on the other component.
ExtremalDecrement tvs_extremal_distance_observable(const LocalSetSample& tvs, const ComponentSet& b,
                                                   std::optional<double> el_before = {});

struct LevelRecovery {
  double integral = 0.0;  // sum of CR ratio^(gamma^2/2) * dtheta
  double estimate = 0.0;  // -log(I / 2pi) / (gamma sqrt(2 pi))
  int ring_points = 0;
  int ring_in_set = 0;
};

/// Level estimate from the vertex set alone: A's vertices become Dirichlet
/// nodes and conformal radii are compared on the ring |z| = rho at `angles`
/// equally spaced directions (0 picks one per lattice spacing). Ring points
/// inside A contribute zero. Throws InvalidArgument for gamma outside
/// [0.05, 1) and RingOutsideDomain when the ring leaves the lattice.
/// `base_diag` (G_D(x,x) per lattice vertex) is computed when empty.
LevelRecovery level_recovery(const Problem& lattice, std::span<const std::uint8_t> lattice_in_set, double gamma,
                             double rho, int angles = 0, std::span<const double> base_diag = {});

/// The two routes to E[M_gamma(f) | A] for one explored set: an average over
/// `inner` fresh fields beyond A, and the closed form in terms of h_A and
/// the Green's function of the complement.
struct GmcRoutes {
  double resampled = 0.0;
  double closed_form = 0.0;
};

/// `base_diag` is G_D(x,x) on the lattice; f is per lattice vertex. One
/// entry per gamma; all gammas share the same resampled fields.
std::vector<GmcRoutes> gmc_routes(const LocalSetSample& ls, std::span<const double> base_diag,
                                  std::span<const double> gammas, std::span<const double> f, int inner,
                                  std::uint64_t seed);

struct GmcReport {
  double gamma = 0.0;
  int outer = 0;
  int inner = 0;
  double mean_resampled = 0.0;
  double mean_closed_form = 0.0;
  double discrepancy = 0.0;     // mean of (resampled - closed_form)
  double relative = 0.0;        // discrepancy / mean_closed_form
  double se = 0.0;              // standard error of the discrepancy
  double unconditional = 0.0;   // E[M_gamma(f)] for the boundary data
  double unconditional_z = 0.0; // (mean_closed_form - unconditional) / SE
  bool pass = false;
};

GmcReport summarize_gmc(std::span<const GmcRoutes> routes, double gamma, int inner, double unconditional);

/// Serial driver: FPS_up(b) sets from `outer` fields, each compared by
/// gmc_routes with `inner` resamples. For u = 0 the unconditional mass is
/// sum f mesh^2.
GmcReport gmc_conditional_check(std::shared_ptr<const Problem> lattice, double b, double gamma,
                                std::span<const double> f, int outer, int inner, std::uint64_t seed);

/// sum_{x,y} d(x) G(x,y) d(y) mesh^4 with d = x - y per lattice vertex.
double h_minus_one_distance(const GreenOracle& reference, std::span<const double> x, std::span<const double> y,
                            double mesh);

/// nu / (cell area) - a per lattice vertex: the FPS measure as a density,
/// recentred by its mean.
std::vector<double> recentered_nu_density(const LocalSetSample& ls);

nlohmann::json to_json(const GmcReport& r);

}  // namespace fpslab
