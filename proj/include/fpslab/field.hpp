#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpslab/cable_graph.hpp"
#include "fpslab/potential.hpp"
#include "fpslab/rng.hpp"

namespace fpslab {

/// Zero-boundary GFF values on the free nodes of an oracle's graph.
struct FieldSample {
  std::vector<double> phi;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

FieldSample sample_gff(const GreenOracle& oracle, std::uint64_t seed, std::uint64_t stream = streams::kGff);

/// Field on the lattice behind `oracle` equal to `values` on the vertices
/// with in_set != 0 and to their harmonic extension (zero on the boundary)
/// plus an independent zero-boundary GFF elsewhere.
FieldSample resample_beyond(const GreenOracle& oracle, std::span<const std::uint8_t> in_set,
                            std::span<const double> values, std::uint64_t seed);

/// Metric-graph randomness of every cable, drawn lazily. Each query is a
/// pure function of (seed, edge key, endpoint values), so repeated or
/// concurrent queries agree and the object itself has no mutable state.
///
/// Totals passed in are the full field (GFF plus harmonic part) at the two
/// cable ends, in the caller's sign convention. A negated view answers for
/// the field -phi - u with the same underlying bridges.
class EdgeCrossings {
 public:
  EdgeCrossings() = default;
  EdgeCrossings(std::uint64_t seed, double bridge_variance, bool negated = false)
      : seed_(seed), variance_(bridge_variance), negated_(negated) {}

  EdgeCrossings negated() const { return EdgeCrossings(seed_, variance_, !negated_); }
  bool is_negated() const { return negated_; }
  std::uint64_t seed() const { return seed_; }
  double bridge_variance() const { return variance_; }
  double duration(const CableEdge& e) const { return variance_ * e.resistance; }

  /// The field on the cable reaches `level` or below.
  bool crossed_below(const CableEdge& e, double ta, double tb, double level) const;
  /// The field on the cable reaches `level` or above.
  bool crossed_above(const CableEdge& e, double ta, double tb, double level) const;

  /// Fraction of the cable, measured from end a (or b), travelled before the
  /// field first drops to `level`. Only meaningful on crossed cables.
  double hit_fraction_below(const CableEdge& e, bool from_a, double ta, double tb, double level) const;
  double hit_fraction_above(const CableEdge& e, bool from_a, double ta, double tb, double level) const;

 private:
  bool orig_below(const CableEdge& e, double xa, double xb, double level) const;
  bool orig_above(const CableEdge& e, double xa, double xb, double level) const;
  double orig_hit(const CableEdge& e, bool from_a, double xa, double xb, double level, bool below) const;

  std::uint64_t seed_ = 0;
  double variance_ = 1.0;
  bool negated_ = false;
};

/// Edge randomness for a field sample; independent of the GFF draw.
EdgeCrossings sample_edge_crossings(const FieldSample& sample, const CalibrationProfile& profile);

void write_sample_binary(const std::string& path, double mesh, std::uint64_t seed, std::span<const double> values);
struct SampleDump {
  double mesh = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> values;
};
SampleDump read_sample_binary(const std::string& path);

}  // namespace fpslab
