#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "fpslab/error.hpp"
#include "fpslab/potential.hpp"

using namespace fpslab;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// n x n block of interior vertices with every outer neighbor a boundary node.
std::shared_ptr<CableGraph> square_grid(int n) {
  std::vector<int> sites(n * n);
  for (int i = 0; i < n * n; ++i) sites[i] = i;
  std::vector<FixedNode> fixed;
  std::vector<CableEdge> edges;
  auto id = [n](int i, int j) { return j * n + i; };
  std::uint64_t key = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k], b = j + dj[k];
        if (a >= 0 && b >= 0 && a < n && b < n) {
          if (id(a, b) > id(i, j)) edges.push_back({id(i, j), id(a, b), 1.0, key++});
        } else {
          fixed.push_back({0.0, FixedKind::kBoundary, 0, static_cast<int>(fixed.size())});
          edges.push_back({id(i, j), n * n + static_cast<int>(fixed.size()) - 1, 1.0, key++});
        }
      }
    }
  return std::make_shared<CableGraph>(std::move(sites), std::move(fixed), std::move(edges));
}

Eigen::MatrixXd dense_inverse(const CableGraph& g) {
  return Eigen::MatrixXd(g.laplacian()).inverse();
}

}  // namespace

TEST_CASE("single vertex Green value is one quarter") {
  const GreenOracle o(square_grid(1), 1.0);
  CHECK(o.green(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("3x3 grid matches dense inversion") {
  const auto g = square_grid(3);
  const GreenOracle o(g, 1.0);
  const Eigen::MatrixXd inv = dense_inverse(*g);
  for (int x = 0; x < 9; ++x)
    for (int y = 0; y < 9; ++y) CHECK(std::abs(o.green(x, y) - inv(x, y)) < 1e-12);
}

TEST_CASE("small disk matches dense inversion") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.1);
  REQUIRE(dom.interior_count() <= 400);
  const GreenOracle o(dom, 1.0);
  const Eigen::MatrixXd inv = dense_inverse(*dom.cable_graph());
  double worst = 0.0;
  for (int y = 0; y < dom.interior_count(); ++y) {
    const auto col = o.green_column(y);
    worst = std::max(worst, (col - inv.col(y)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("Green symmetry and positivity") {
  const auto dom = build_lattice(DomainSpec::annulus(0.3), 0.02);
  const GreenOracle o(dom, 1.0);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> pick(0, dom.interior_count() - 1);
  for (int k = 0; k < 1000; ++k) {
    const int x = pick(rng), y = pick(rng);
    const double gxy = o.green(x, y), gyx = o.green(y, x);
    REQUIRE(gxy >= 0.0);
    REQUIRE(std::abs(gxy - gyx) <= 1e-9 * std::max(gxy, 1e-300));
  }
  CHECK(o.green(0, 0) > 0.0);
  CHECK_THROWS_AS(o.green(-1, 0), Error);
  CHECK_THROWS_AS(o.green(0, dom.interior_count()), Error);
}

TEST_CASE("Green column is harmonic off the pole") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.05);
  const GreenOracle o(dom, 1.0);
  const int y = dom.nearest_interior({0.3, 0.2});
  const auto col = o.green_column(y);
  const auto lap = dom.cable_graph()->laplacian();
  const Eigen::VectorXd r = lap * col;
  for (int x = 0; x < dom.interior_count(); ++x) REQUIRE(std::abs(r[x] - (x == y ? 1.0 : 0.0)) < 1e-10);
}

TEST_CASE("calibration and regularized diagonal on the unit disk") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.01);
  const std::vector<double> probes{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const auto prof = fit_calibration(dom, probes);
  CHECK(prof.kappa == doctest::Approx(1.0).epsilon(0.02));
  // Z^2 self term (2 gamma_E + log 8) / (4 pi).
  CHECK(prof.self_singularity == doctest::Approx((2 * 0.5772156649015329 + std::log(8.0)) / (4 * std::numbers::pi)).epsilon(0.02));
  for (double r : prof.residuals) CHECK(std::abs(r) < 0.05);

  const GreenOracle o(dom, prof.kappa);
  const std::vector<int> v{dom.nearest_interior({0, 0}), dom.nearest_interior({0.5, 0}), dom.nearest_interior({0.9, 0})};
  const auto rd = regularized_diagonal(o, prof, v);
  CHECK(std::abs(rd.cr_values[0] - 1.0) < 0.03);
  CHECK(rd.g_values[1] == doctest::Approx(std::log(0.75) / kTwoPi).epsilon(0.05));
  CHECK(rd.cr_values[2] == doctest::Approx(0.19).epsilon(0.05));
  CHECK(rd.cr_values[2] >= 0.1);
  CHECK(rd.cr_values[2] <= 0.4);

  CalibrationProfile blank;
  CHECK_THROWS_AS(regularized_diagonal(o, blank, v), Error);
}

TEST_CASE("Koebe sandwich on the unit disk") {
  const auto dom = build_lattice(DomainSpec::unit_disk(), 0.02);
  const std::vector<double> probes{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const auto prof = fit_calibration(dom, probes);
  const GreenOracle o(dom, prof.kappa);
  std::vector<int> v;
  for (double x : {0.0, 0.3, 0.6, 0.8, 0.9}) v.push_back(dom.nearest_interior({x, 0.2 * x}));
  const auto rd = regularized_diagonal(o, prof, v);
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double d = 1.0 - std::abs(dom.interior_point(v[k]));
    CHECK(rd.cr_values[k] >= 0.8 * d);
    CHECK(rd.cr_values[k] <= 1.2 * 4 * d);
  }
}

TEST_CASE("annulus extremal length") {
  const auto dom = build_lattice(DomainSpec::annulus(0.3), 0.01);
  const GreenOracle o(dom, 1.0);
  const double el = extremal_length(o, {1}, {0});
  CHECK(el == doctest::Approx(std::log(1 / 0.3) / kTwoPi).epsilon(0.02));
  CHECK(extremal_length(o, {0}, {1}) == doctest::Approx(el).epsilon(1e-12));
  // Reciprocity with the Poisson mass for complementary sets.
  CHECK(std::abs(poisson_mass(o, {1}, {0}) * el - 1.0) < 1e-8);
  CHECK(std::abs(poisson_mass(o, {0}, {1}) * el - 1.0) < 1e-8);
  CHECK_THROWS_AS(extremal_length(o, {0}, {0, 1}), Error);
  CHECK_THROWS_AS(extremal_length(o, {0}, {2}), Error);
}

TEST_CASE("extremal length with an adjoined set") {
  const auto dom = build_lattice(DomainSpec::annulus(0.3), 0.01);
  const GreenOracle o(dom, 1.0);
  const double base = extremal_length(o, {1}, {0});
  CHECK(extremal_length_with_set(o, {1}, {}) == doctest::Approx(base).epsilon(1e-12));

  std::vector<int> near_outer, beyond;
  for (int v = 0; v < dom.interior_count(); ++v) {
    const double r = std::abs(dom.interior_point(v));
    if (r > 1.0 - 1.5 * dom.mesh()) near_outer.push_back(v);
    if (r >= 0.6) beyond.push_back(v);
  }
  CHECK(extremal_length_with_set(o, {1}, near_outer) < base);
  CHECK(extremal_length_with_set(o, {1}, beyond) == doctest::Approx(std::log(2.0) / kTwoPi).epsilon(0.03));
}

TEST_CASE("three component Poisson mass is below the modulus") {
  DomainSpec s;
  s.holes = {Disk{{0.4, 0.0}, 0.15}, Disk{{-0.4, 0.0}, 0.15}};
  const auto dom = build_lattice(s, 0.01);
  const GreenOracle o(dom, 1.0);
  const double m12 = poisson_mass(o, {1}, {2});
  const double m1rest = 1.0 / extremal_length(o, {1}, {0, 2});
  CHECK(m12 > 0.0);
  CHECK(m12 <= m1rest);
  // Neumann on the third component still gives a finite positive length.
  CHECK(extremal_length(o, {1}, {2}) > 0.0);
}

TEST_CASE("weighted boundary average") {
  DomainSpec s = DomainSpec::annulus(0.3);
  s.arcs = {{0, 0.0, std::numbers::pi, 1.0}, {0, std::numbers::pi, kTwoPi, 0.0}};
  const auto dom = build_lattice(s, 0.02);
  const GreenOracle o(dom, 1.0);
  const auto bd = boundary_data_from_spec(dom);
  CHECK(weighted_boundary_average(o, {0}, bd) == doctest::Approx(0.5).epsilon(0.03));
  std::vector<double> c(dom.boundary_count(), 0.0);
  CHECK(weighted_boundary_average(o, {0}, extend_harmonically(dom, c)) == 0.0);
  std::fill(c.begin(), c.end(), -1.3);
  CHECK(weighted_boundary_average(o, {1}, extend_harmonically(dom, c)) == doctest::Approx(-1.3).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_boundary_average(o, {5}, bd), Error);
}

TEST_CASE("selected inversion gives the Green diagonal") {
  const auto dom = build_lattice(DomainSpec::annulus(0.3), 0.05);
  const GreenOracle oracle(dom, 1.3);
  const Eigen::VectorXd d = oracle.diagonal();
  const Eigen::MatrixXd inv = dense_inverse(*dom.cable_graph());
  for (int v = 0; v < oracle.size(); ++v) REQUIRE(d[v] == doctest::Approx(1.3 * inv(v, v)).epsilon(1e-10));

  // A network with pinned vertices and uneven resistances.
  std::vector<std::uint8_t> mask(dom.interior_count(), 0);
  for (int v = 0; v < dom.interior_count(); v += 7) mask[v] = 1;
  auto pinned = std::make_shared<CableGraph>(dom.cable_graph()->pin_free(mask, 0.0));
  const GreenOracle po(pinned, 1.0);
  const Eigen::VectorXd pd = po.diagonal();
  for (int v = 0; v < po.size(); v += 5) REQUIRE(pd[v] == doctest::Approx(po.green_diag(v)).epsilon(1e-10));
}
