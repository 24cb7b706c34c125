#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "fpslab/error.hpp"
#include "fpslab/field.hpp"
#include "fpslab/stats.hpp"

using namespace fpslab;

TEST_CASE("GFF samples are deterministic per seed") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.05);
  const GreenOracle o(dom, 1.0);
  const auto a = sample_gff(o, 11), b = sample_gff(o, 11), c = sample_gff(o, 12);
  CHECK(a.phi == b.phi);
  CHECK(a.phi != c.phi);
  CHECK(a.phi.size() == static_cast<std::size_t>(dom.interior_count()));
}

TEST_CASE("GFF variance and mean at z = 0.5") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.02);
  const GreenOracle o(dom, 1.0);
  const int z = dom.nearest_interior({0.5, 0.0});
  const double g = o.green(z, z);
  const int n = 10000;
  std::vector<double> x(n), x2(n);
  for (int k = 0; k < n; ++k) {
    x[k] = sample_gff(o, derive_seed(3, k)).phi[z];
    x2[k] = x[k] * x[k];
  }
  const auto m = mean_se(x);
  const auto v = mean_se(x2);
  CHECK(std::abs(m.mean) < 3 * m.se);
  CHECK(std::abs(v.mean - g) < 3 * v.se);
}

TEST_CASE("empirical covariance on probe vertices") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.05);
  const GreenOracle o(dom, 1.0);
  std::vector<int> probes;
  for (int k = 0; k < 20; ++k) {
    const double r = 0.85 * k / 20.0, th = 2.4 * k;
    probes.push_back(dom.nearest_interior({r * std::cos(th), r * std::sin(th)}));
  }
  const int n = 10000;
  std::vector<std::vector<double>> vals(n);
  for (int k = 0; k < n; ++k) {
    const auto s = sample_gff(o, derive_seed(9, k));
    for (int p : probes) vals[k].push_back(s.phi[p]);
  }
  int violations = 0;
  for (int i = 0; i < 20; ++i)
    for (int j = i; j < 20; ++j) {
      std::vector<double> prod(n);
      for (int k = 0; k < n; ++k) prod[k] = vals[k][i] * vals[k][j];
      const auto m = mean_se(prod);
      violations += std::abs(m.mean - o.green(probes[i], probes[j])) > 4 * m.se;
    }
  CHECK(violations == 0);
}

TEST_CASE("resample beyond trivial sets") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.05);
  const GreenOracle o(dom, 1.0);
  const int n = dom.interior_count();
  std::vector<std::uint8_t> none(n, 0), all(n, 1);
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = 0.01 * i;
  CHECK(resample_beyond(o, none, vals, 4).phi == sample_gff(o, 4, streams::kResample).phi);
  CHECK(resample_beyond(o, all, vals, 4).phi == vals);
}

TEST_CASE("resampling tower property") {
  // Var(phi(z)) = E[Var(phi(z) | phi on A)] + Var(E[phi(z) | phi on A]).
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.05);
  const GreenOracle o(dom, 1.0);
  const int n = dom.interior_count();
  const int z = dom.nearest_interior({0.1, 0.0});
  std::vector<std::uint8_t> in_a(n, 0);
  for (int v = 0; v < n; ++v) in_a[v] = std::abs(std::abs(dom.interior_point(v)) - 0.5) < 0.03;
  const int runs = 10000;
  std::vector<double> sq(runs);
  for (int k = 0; k < runs; ++k) {
    const auto outer = sample_gff(o, derive_seed(21, k));
    const auto inner = resample_beyond(o, in_a, outer.phi, derive_seed(22, k));
    sq[k] = inner.phi[z] * inner.phi[z];
  }
  const auto m = mean_se(sq);
  CHECK(std::abs(m.mean - o.green(z, z)) < 3 * m.se);
}

TEST_CASE("binary sample dump round trip") {
  const std::string path = "fpslab_dump_test.bin";
  const std::vector<double> v{1.5, -2.25, 3.0};
  write_sample_binary(path, 0.02, 77, v);
  const auto d = read_sample_binary(path);
  CHECK(d.mesh == 0.02);
  CHECK(d.seed == 77);
  CHECK(d.values == v);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_sample_binary("does/not/exist.bin"), Error);
}
