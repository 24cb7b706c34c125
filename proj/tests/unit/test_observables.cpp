#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fpslab/error.hpp"
#include "fpslab/observables.hpp"

using namespace fpslab;

namespace {

CalibrationProfile profile_for(double mesh) {
  CalibrationProfile p;
  p.mesh = mesh;
  p.kappa = 1.0;
  p.self_singularity = 0.2574;
  p.calibrated = true;
  return p;
}

std::shared_ptr<const Problem> problem(const DomainSpec& spec, double mesh) {
  auto dom = std::make_shared<LatticeDomain>(build_lattice(spec, mesh));
  return make_problem(dom, boundary_data_from_spec(*dom), profile_for(mesh));
}

DomainSpec annulus(double outer_value, double inner_value) {
  DomainSpec s = DomainSpec::annulus(0.3);
  s.set_constant(0, outer_value);
  s.set_constant(1, inner_value);
  return s;
}

}  // namespace

TEST_CASE("hitting time observable") {
  SUBCASE("boundary-only set gives zero") {
    DomainSpec s = DomainSpec::unit_disk();
    s.set_constant(0, -0.5);
    auto p = problem(s, 0.05);
    const auto field = sample_gff(*p->oracle, 1);
    const auto ls = extract_fps(p, field, sample_edge_crossings(field, p->profile), 0.5);
    REQUIRE(ls.interior_size() == 0);
    const int z = p->domain->nearest_interior({0.0, 0.0});
    CHECK(hitting_time_observable(ls, z) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("nonnegative and monotone in the level") {
    auto p = problem(DomainSpec::unit_disk(), 0.05);
    const int z = p->domain->nearest_interior({0.0, 0.0});
    int compared = 0;
    for (int k = 0; k < 40; ++k) {
      const auto field = sample_gff(*p->oracle, derive_seed(3, k));
      const auto ec = sample_edge_crossings(field, p->profile);
      const auto small = extract_fps(p, field, ec, 0.4);
      const auto big = extract_fps(p, field, ec, 0.8);
      if (big.contains(z)) {
        CHECK_THROWS_AS(hitting_time_observable(big, z), Error);
        continue;
      }
      const double t1 = hitting_time_observable(small, z), t2 = hitting_time_observable(big, z);
      CHECK(t1 >= -1e-12);
      CHECK(t2 >= t1 - 1e-12);
      ++compared;
    }
    CHECK(compared > 5);
  }
}

TEST_CASE("extremal distance observable") {
  SUBCASE("boundary-only set gives zero") {
    auto p = problem(annulus(-1.5, -1.0), 0.05);
    const auto field = sample_gff(*p->oracle, 2);
    const auto ls = extract_fps(p, field, sample_edge_crossings(field, p->profile), 1.0);
    REQUIRE(ls.interior_size() == 0);
    const auto d = extremal_distance_observable(ls, {0});
    CHECK(d.decrement == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(d.before == doctest::Approx(std::log(1 / 0.3) / (2 * std::numbers::pi)).epsilon(0.05));
    CHECK(d.u_start == doctest::Approx(-1.5));
    CHECK(d.u_end == -1.0);
  }
  SUBCASE("configuration checks") {
    auto p = problem(annulus(0.0, -0.5), 0.05);
    const auto field = sample_gff(*p->oracle, 2);
    const auto ls = extract_fps(p, field, sample_edge_crossings(field, p->profile), 1.0);
    CHECK_THROWS_AS(extremal_distance_observable(ls, {0}), Error);
    auto disk = problem(DomainSpec::unit_disk(), 0.05);
    const auto f2 = sample_gff(*disk->oracle, 2);
    const auto tvs = extract_tvs(disk, f2, sample_edge_crossings(f2, disk->profile), 0.6, 0.6);
    CHECK_THROWS_AS(tvs_extremal_distance_observable(tvs, {0}), Error);
  }
  SUBCASE("two-valued decrement is below the FPS one") {
    auto p = problem(annulus(0.0, -1.0), 0.04);
    const double lam = std::sqrt(std::numbers::pi / 8);
    auto q = problem(annulus(0.0, -lam), 0.04);
    for (int k = 0; k < 20; ++k) {
      const auto field = sample_gff(*p->oracle, derive_seed(9, k));
      const auto ec = sample_edge_crossings(field, p->profile);
      const auto fps = extract_fps(q, field, ec, lam);
      const auto tvs = extract_tvs(q, field, ec, lam, lam);
      const auto full = extremal_distance_observable(fps, {0});
      const double d_fps = full.decrement;
      const double d_tvs = tvs_extremal_distance_observable(tvs, {0}).decrement;
      CHECK(d_fps >= 0.0);
      CHECK(d_tvs >= 0.0);
      CHECK(d_tvs <= d_fps + 1e-12);
      CHECK(d_fps <= full.before);
    }
  }
}

TEST_CASE("level recovery") {
  auto p = problem(DomainSpec::unit_disk(), 0.05);
  const std::vector<std::uint8_t> empty(p->lattice_size, 0);
  CHECK_THROWS_AS(level_recovery(*p, empty, 0.01, 0.9), Error);
  CHECK_THROWS_AS(level_recovery(*p, empty, 0.5, 1.2), Error);
  const auto r = level_recovery(*p, empty, 0.5, 0.9);
  CHECK(r.integral == doctest::Approx(2 * std::numbers::pi).epsilon(1e-9));
  CHECK(std::abs(r.estimate) < 1e-9);
  CHECK(r.ring_in_set == 0);

  // A larger set lowers every conformal radius on the ring.
  const auto field = sample_gff(*p->oracle, 5);
  const auto ec = sample_edge_crossings(field, p->profile);
  const auto lo = extract_fps(p, field, ec, 0.5);
  const auto hi = extract_fps(p, field, ec, 1.5);
  const auto r1 = level_recovery(*p, lo.lattice_in_set, 0.5, 0.9, 64);
  const auto r2 = level_recovery(*p, hi.lattice_in_set, 0.5, 0.9, 64);
  CHECK(r2.integral <= r1.integral + 1e-12);
  CHECK(r2.estimate >= r1.estimate - 1e-12);
}

TEST_CASE("GMC conditional decomposition") {
  auto p = problem(DomainSpec::unit_disk(), 0.05);
  std::vector<double> f(p->lattice_size, 0.0);
  for (int v = 0; v < p->lattice_size; ++v) f[v] = std::abs(p->domain->interior_point(v)) < 0.5;
  SUBCASE("gamma zero is exact") {
    const auto r = gmc_conditional_check(p, std::sqrt(std::numbers::pi / 8), 0.0, f, 20, 5, 1);
    CHECK(r.discrepancy == 0.0);
    CHECK(r.mean_closed_form == r.unconditional);
    CHECK(r.pass);
  }
  SUBCASE("trivial set") {
    // A negative upper level leaves the boundary inadmissible.
    const auto r = gmc_conditional_check(p, -0.01, 0.3, f, 5, 200, 2);
    CHECK(r.mean_closed_form == doctest::Approx(r.unconditional).epsilon(1e-9));
    CHECK(std::abs(r.discrepancy) < 4 * r.se);
  }
  SUBCASE("two routes agree") {
    const auto r = gmc_conditional_check(p, std::sqrt(std::numbers::pi / 8), 0.3, f, 300, 10, 3);
    CHECK(r.pass);
    CHECK(std::abs(r.relative) < 0.05);
  }
}

TEST_CASE("H^-1 distance") {
  auto p = problem(DomainSpec::unit_disk(), 0.05);
  const auto field = sample_gff(*p->oracle, 8);
  CHECK(h_minus_one_distance(*p->oracle, field.phi, field.phi, 0.05) == 0.0);
  const std::vector<double> zero(field.phi.size(), 0.0);
  const double d = h_minus_one_distance(*p->oracle, field.phi, zero, 0.05);
  CHECK(d > 0.0);
  CHECK(d == doctest::Approx(h_minus_one_distance(*p->oracle, zero, field.phi, 0.05)));

  // The recentred FPS density matches the field on the set.
  const auto ls = extract_fps(p, field, sample_edge_crossings(field, p->profile), 1.0);
  const auto dens = recentered_nu_density(ls);
  for (int v = 0; v < p->lattice_size; ++v)
    if (ls.contains(v)) REQUIRE(dens[v] == doctest::Approx(field.phi[v]));
    else REQUIRE(dens[v] == -1.0);
  CHECK(h_minus_one_distance(*p->oracle, field.phi, dens, 0.05) < d);
}

TEST_CASE("series CSV") {
  ObservableSeries s{"t", {1.5, INFINITY}, {7, 8}};
  CHECK(series_csv(s) == "sample_index,seed,value\n0,7,1.5\n1,8,inf\n");
}
