#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fpslab {

struct KsResult {
  int n = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

/// P(D_n >= d) for the one-sample Kolmogorov statistic: exact
/// (Marsaglia-Tsang-Wang) for n <= 500, Stephens' corrected limit above.
double kolmogorov_pvalue(int n, double d);

/// A law to test against: a CDF when known in closed form, otherwise
/// reference draws for a two-sample test.
struct ReferenceLaw {
  std::string kind;
  nlohmann::json params;
  std::function<double(double)> cdf;
  std::vector<double> draws;

  nlohmann::json describe() const;
};

/// One-sided hitting time of a level `distance` below the start by a
/// standard Brownian motion.
ReferenceLaw levy_hitting(double distance);
/// The same law conditioned on the hit happening before `lifetime`.
ReferenceLaw levy_hitting_truncated(double distance, double lifetime);
/// The hitting time with hits after `horizon` recorded as +inf.
ReferenceLaw levy_hitting_censored(double distance, double horizon);
/// First exit from (lo, hi) of a bridge from `start` to `end` of duration
/// `length`, in closed form (hi = +inf for a single barrier).
ReferenceLaw bridge_hitting(double start, double end, double length, double lo, double hi);
ReferenceLaw empirical_law(std::string kind, nlohmann::json params, std::vector<double> draws);

KsResult ks_test(std::span<const double> values, const ReferenceLaw& law, double significance = 0.01);
KsResult ks_one_sample(std::span<const double> values, const std::function<double(double)>& cdf,
                       double significance = 0.01);
KsResult ks_two_sample(std::span<const double> x, std::span<const double> y, double significance = 0.01);

/// Bridge exit times by forward simulation on `steps` grid intervals; the
/// exit inside an interval uses the exact crossing law of the sub-bridge.
std::vector<double> simulate_bridge_exit_grid(double start, double end, double length, double lo, double hi,
                                              int paths, int steps, std::uint64_t seed);
/// Bridge exit times by dyadic midpoint construction on 2^depth intervals,
/// refined a further 24 levels wherever a barrier is near, then monitored
/// discretely with the Broadie-Glasserman-Kou barrier shift. Uses no
/// crossing formula.
std::vector<double> simulate_bridge_exit_dyadic(double start, double end, double length, double lo, double hi,
                                                int paths, int depth, std::uint64_t seed);
/// Hitting times of -distance by a +-step random walk with step
/// distance/k, in Brownian time units; paths still running at `horizon`
/// report +inf.
std::vector<double> simulate_walk_hitting(double distance, int k, double horizon, int paths, std::uint64_t seed);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
};
MeanSe mean_se(std::span<const double> x);

}  // namespace fpslab
