#include "fpslab/field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "fpslab/bridge.hpp"
#include "fpslab/error.hpp"
#include "fpslab/io.hpp"

namespace fpslab {

namespace {

std::uint64_t edge_stream(std::uint64_t key, int purpose) {
  return (std::uint64_t{1} << 63) | (key << 4) | static_cast<std::uint64_t>(purpose);
}

}  // namespace

FieldSample sample_gff(const GreenOracle& oracle, std::uint64_t seed, std::uint64_t stream) {
  Eigen::VectorXd xi(oracle.size());
  fill_normals(seed, stream, xi);
  const Eigen::VectorXd phi = oracle.correlate(xi);
  FieldSample s;
  s.phi.assign(phi.data(), phi.data() + phi.size());
  s.seed = seed;
  s.stream = stream;
  return s;
}

FieldSample resample_beyond(const GreenOracle& oracle, std::span<const std::uint8_t> in_set,
                            std::span<const double> values, std::uint64_t seed) {
  const auto& g = oracle.graph();
  const int n = g.free_count();
  if (static_cast<int>(in_set.size()) != n || static_cast<int>(values.size()) != n)
    throw Error(ErrorCode::kInvalidArgument, "set mask and values must cover every vertex");
  const int count = static_cast<int>(std::count_if(in_set.begin(), in_set.end(), [](auto c) { return c != 0; }));
  if (count == 0) return sample_gff(oracle, seed, streams::kResample);
  FieldSample out;
  out.seed = seed;
  out.stream = streams::kResample;
  out.phi.assign(values.begin(), values.end());
  for (int i = 0; i < n; ++i)
    if (!in_set[i]) out.phi[i] = 0.0;
  if (count == n) return out;

  // Complement network: set vertices become Dirichlet nodes carrying values.
  std::vector<int> map(n, -1), sites, back;
  std::vector<FixedNode> fixed(g.fixed_nodes().begin(), g.fixed_nodes().end());
  for (auto& f : fixed) f.value = 0.0;
  std::vector<int> as_fixed(n, -1);
  for (int i = 0; i < n; ++i)
    if (!in_set[i]) {
      map[i] = static_cast<int>(sites.size());
      sites.push_back(g.free_site(i));
      back.push_back(i);
    }
  const int nf = static_cast<int>(sites.size());
  for (int i = 0; i < n; ++i)
    if (in_set[i]) {
      as_fixed[i] = static_cast<int>(fixed.size());
      fixed.push_back(FixedNode{values[i], FixedKind::kSet, -1, g.free_site(i)});
    }
  auto node = [&](int v) { return g.is_fixed(v) ? nf + (v - n) : (in_set[v] ? nf + as_fixed[v] : map[v]); };
  std::vector<CableEdge> edges;
  for (const auto& e : g.edges()) {
    const int a = node(e.a), b = node(e.b);
    if (a >= nf && b >= nf) continue;
    edges.push_back({a, b, e.resistance, e.key});
  }
  auto comp = std::make_shared<CableGraph>(std::move(sites), std::move(fixed), std::move(edges));
  const GreenOracle inner(comp, oracle.kappa());
  const auto fv = comp->fixed_values();
  const Eigen::VectorXd h = inner.harmonic(fv);
  const FieldSample fresh = sample_gff(inner, seed, streams::kResample);
  for (int k = 0; k < nf; ++k) out.phi[back[k]] = h[k] + fresh.phi[k];
  return out;
}

bool EdgeCrossings::orig_below(const CableEdge& e, double xa, double xb, double level) const {
  if (xa <= level || xb <= level) return true;
  Stream s(seed_, edge_stream(e.key, 0));
  const double u1 = s.uniform();
  return bridge::min_from_uniform(xa, xb, duration(e), u1) < level;
}

bool EdgeCrossings::orig_above(const CableEdge& e, double xa, double xb, double level) const {
  if (xa >= level || xb >= level) return true;
  Stream s(seed_, edge_stream(e.key, 0));
  const double u1 = s.uniform();
  const double u2 = s.uniform();
  const double T = duration(e);
  const double m = bridge::min_from_uniform(xa, xb, T, u1);
  return u2 > bridge::max_cdf_given_min(xa, xb, T, m, level);
}

double EdgeCrossings::orig_hit(const CableEdge& e, bool from_a, double xa, double xb, double level,
                               bool below) const {
  const double start = from_a ? xa : xb;
  const double end = from_a ? xb : xa;
  const double alpha = below ? start - level : level - start;
  const double beta = below ? end - level : level - end;
  if (alpha <= 0.0) return 0.0;
  const int purpose = (below ? 1 : 3) + (from_a ? 0 : 1);
  Stream s(seed_, edge_stream(e.key, purpose));
  const double n = s.normal();
  const double u = s.uniform();
  const double T = duration(e);
  return std::clamp(bridge::hit_time_from_draws(alpha, beta, T, n, u) / T, 0.0, 1.0);
}

bool EdgeCrossings::crossed_below(const CableEdge& e, double ta, double tb, double level) const {
  return negated_ ? orig_above(e, -ta, -tb, -level) : orig_below(e, ta, tb, level);
}

bool EdgeCrossings::crossed_above(const CableEdge& e, double ta, double tb, double level) const {
  return negated_ ? orig_below(e, -ta, -tb, -level) : orig_above(e, ta, tb, level);
}

double EdgeCrossings::hit_fraction_below(const CableEdge& e, bool from_a, double ta, double tb, double level) const {
  return negated_ ? orig_hit(e, from_a, -ta, -tb, -level, false) : orig_hit(e, from_a, ta, tb, level, true);
}

double EdgeCrossings::hit_fraction_above(const CableEdge& e, bool from_a, double ta, double tb, double level) const {
  return negated_ ? orig_hit(e, from_a, -ta, -tb, -level, true) : orig_hit(e, from_a, ta, tb, level, false);
}

EdgeCrossings sample_edge_crossings(const FieldSample& sample, const CalibrationProfile& profile) {
  return EdgeCrossings(mix64(sample.seed ^ (sample.stream << 32) ^ streams::kEdge), profile.bridge_variance);
}

void write_sample_binary(const std::string& path, double mesh, std::uint64_t seed, std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little, "binary dumps assume a little-endian host");
  const std::uint64_t count = values.size();
  std::string bytes(3 * 8 + count * sizeof(double), '\0');
  std::memcpy(bytes.data(), &mesh, 8);
  std::memcpy(bytes.data() + 8, &count, 8);
  std::memcpy(bytes.data() + 16, &seed, 8);
  if (count > 0) std::memcpy(bytes.data() + 24, values.data(), count * sizeof(double));
  write_file_atomic(path, bytes);
}

SampleDump read_sample_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  SampleDump d;
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&d.mesh), sizeof d.mesh);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  in.read(reinterpret_cast<char*>(&d.seed), sizeof d.seed);
  if (!in || count > (std::uint64_t{1} << 32)) throw Error(ErrorCode::kIoError, "bad header in " + path);
  d.values.resize(count);
  in.read(reinterpret_cast<char*>(d.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw Error(ErrorCode::kIoError, "truncated sample in " + path);
  return d;
}

}  // namespace fpslab
