#include <doctest.h>

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fpslab/cable_graph.hpp"
#include "fpslab/domain.hpp"
#include "fpslab/error.hpp"

using namespace fpslab;

namespace {

// Brute-force count of lattice points strictly inside the unit circle.
int count_inside(double h) {
  const int m = static_cast<int>(std::ceil(1.0 / h)) + 1;
  int n = 0;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j)
      if (std::hypot(i * h, j * h) < 1.0) ++n;
  return n;
}

}  // namespace

TEST_CASE("coarse unit disk is rejected") {
  try {
    build_lattice(DomainSpec::unit_disk(), 0.5);
    FAIL("expected MeshTooCoarse");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMeshTooCoarse);
  }
}

TEST_CASE("unit disk vertex count") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.02);
  CHECK(dom.interior_count() == count_inside(0.02));
  CHECK(std::abs(dom.interior_count() / (std::numbers::pi / 0.0004) - 1.0) < 0.05);
  for (int v = 0; v < dom.interior_count(); ++v) REQUIRE(std::abs(dom.interior_point(v)) < 1.0);
}

TEST_CASE("annulus boundary labels") {
  const auto dom = build_lattice(DomainSpec::annulus(0.3), 0.02);
  int outer = 0, inner = 0;
  for (int b = 0; b < dom.boundary_count(); ++b) {
    const int c = dom.boundary_component(b);
    REQUIRE((c == 0 || c == 1));
    const double r = std::abs(dom.boundary_point(b));
    if (c == 0) {
      ++outer;
      CHECK(r >= 1.0);
    } else {
      ++inner;
      CHECK(r <= 0.3);
    }
  }
  CHECK(outer > 0);
  CHECK(inner > 0);
  CHECK(outer + inner == dom.boundary_count());
}

TEST_CASE("overlapping holes are degenerate") {
  DomainSpec s;
  s.holes = {Disk{{0.1, 0.0}, 0.2}, Disk{{-0.1, 0.0}, 0.2}};
  try {
    build_lattice(s, 0.02);
    FAIL("expected DegenerateDomain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateDomain);
  }
  DomainSpec t;
  t.holes = {Disk{{0.5, 0.0}, 0.6}};
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("arcs must partition each circle") {
  DomainSpec s = DomainSpec::unit_disk();
  s.arcs = {{0, 0.0, 1.0, 1.0}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.arcs = {{0, 0.0, std::numbers::pi, 1.0}, {0, std::numbers::pi, 2 * std::numbers::pi, 0.0}};
  CHECK_NOTHROW(s.validate());
  CHECK(s.value_at(0, 0.0) == 1.0);
  CHECK(s.value_at(0, std::numbers::pi) == 0.0);
  CHECK(s.value_at(0, -0.1) == 0.0);
}

TEST_CASE("domain json round trip") {
  DomainSpec s = DomainSpec::annulus(0.3);
  s.set_constant(1, -1.0);
  nlohmann::json j = s;
  const auto back = j.get<DomainSpec>();
  CHECK(back.holes.size() == 1);
  CHECK(back.holes[0].radius == 0.3);
  CHECK(back.value_at(1, 2.0) == -1.0);
  CHECK(back.value_at(0, 2.0) == 0.0);
  const auto parsed = nlohmann::json::parse(
                          R"({"outer":{"center":[0,0],"radius":1},"holes":[],"arcs":[{"component":0,"from":0,"to":6.283185307179586,"value":2}]})")
                          .get<DomainSpec>();
  CHECK(parsed.value_at(0, 1.0) == 2.0);
}

TEST_CASE("constant boundary values extend to the constant") {
  const auto dom = build_lattice(DomainSpec::annulus(0.3), 0.04);
  std::vector<double> v(dom.boundary_count(), 0.7);
  const auto bd = extend_harmonically(dom, v);
  for (double x : bd.harmonic_extension) REQUIRE(x == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("annulus radial harmonic function") {
  DomainSpec s = DomainSpec::annulus(0.3);
  s.set_constant(1, 1.0);
  const double z = 0.55;
  const double exact = std::log(z) / std::log(0.3);
  double prev_err = 1e9;
  for (double h : {0.04, 0.02, 0.01}) {
    const auto dom = build_lattice(s, h);
    const auto bd = boundary_data_from_spec(dom);
    const int v = dom.nearest_interior({z, 0.0});
    const double err = std::abs(bd.harmonic_extension[v] - exact);
    if (h == 0.01) CHECK(err / exact < 0.02);
    CHECK(err < prev_err);
    prev_err = err;
    for (double x : bd.harmonic_extension) REQUIRE((x >= bd.min_value() - 1e-12 && x <= bd.max_value() + 1e-12));
  }
}

TEST_CASE("half-and-half disk data is one half at the center") {
  DomainSpec s = DomainSpec::unit_disk();
  s.arcs = {{0, 0.0, std::numbers::pi, 1.0}, {0, std::numbers::pi, 2 * std::numbers::pi, 0.0}};
  const auto dom = build_lattice(s, 0.02);
  const auto bd = boundary_data_from_spec(dom);
  // The lattice is symmetric under z -> -z, which swaps the two halves up to
  // the ties on the real axis, so the center sits near 1/2.
  CHECK(bd.harmonic_extension[dom.nearest_interior({0, 0})] == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("nearest interior vertex") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.02);
  const int v = dom.nearest_interior({0.501, 0.0});
  CHECK(dom.interior_point(v) == Point(0.5, 0.0));
  CHECK_THROWS_AS(dom.nearest_interior({3.0, 0.0}), Error);
}
