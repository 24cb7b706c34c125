#include <doctest.h>

#include <cmath>

#include "fpslab/bridge.hpp"
#include "fpslab/field.hpp"
#include "fpslab/stats.hpp"

using namespace fpslab;

TEST_CASE("bridge minimum inversion") {
  for (double level : {-0.5, 0.0, 0.3}) {
    const double p = bridge::prob_min_below(1.0, 0.7, 0.8, level);
    CHECK(bridge::min_from_uniform(1.0, 0.7, 0.8, p) == doctest::Approx(level).epsilon(1e-12));
  }
  CHECK(bridge::prob_min_below(0.2, 1.0, 1.0, 0.2) == 1.0);
}

TEST_CASE("conditional maximum integrates to the band law") {
  // P(min > lo, max < hi) two ways: integrate the conditional max CDF
  // against the min density, and the image series.
  const double x = 0.3, y = 0.6, T = 0.7, lo = -0.4, hi = 1.1;
  const double top = std::min(x, y);
  const int n = 20000;
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m0 = lo + (top - lo) * i / n, m1 = lo + (top - lo) * (i + 1) / n;
    const double mass = bridge::prob_min_below(x, y, T, m1) - bridge::prob_min_below(x, y, T, m0);
    integral += mass * bridge::max_cdf_given_min(x, y, T, 0.5 * (m0 + m1), hi);
  }
  CHECK(integral == doctest::Approx(bridge::band_survival(x, y, T, lo, hi, T)).epsilon(1e-6));
}

TEST_CASE("hit time law agrees with the image series") {
  for (double beta : {0.8, 0.0, -0.5}) {
    for (double s : {0.05, 0.2, 0.5, 0.9}) {
      const double a = bridge::hit_time_cdf(0.6, beta, 1.0, s);
      const double b = 1.0 - bridge::band_survival(0.6, beta, 1.0, 0.0, 1e6, s);
      CHECK(a == doctest::Approx(b).epsilon(1e-9));
    }
  }
}

TEST_CASE("hit time sampler matches its CDF") {
  for (double beta : {0.8, 0.0, -0.5}) {
    const double total = bridge::prob_min_below(0.6, beta, 1.0, 0.0);
    std::vector<double> draws;
    Stream s(99, static_cast<std::uint64_t>(beta * 1000 + 5000));
    for (int i = 0; i < 20000; ++i) {
      const double n = s.normal(), u = s.uniform();
      draws.push_back(bridge::hit_time_from_draws(0.6, beta, 1.0, n, u));
    }
    const auto r = ks_one_sample(draws, [&](double t) { return bridge::hit_time_cdf(0.6, beta, 1.0, t) / total; });
    CHECK_MESSAGE(!r.reject, "beta=" << beta << " D=" << r.statistic << " p=" << r.p_value);
  }
}

TEST_CASE("edge crossings") {
  const EdgeCrossings ec(2024, 1.0);
  CableEdge e{0, 1, 1.0, 17};
  CHECK(ec.crossed_below(e, 0.0, 3.0, 0.0));
  CHECK(ec.crossed_below(e, 3.0, -1.0, 0.0));
  CHECK(ec.crossed_above(e, 0.5, 2.0, 1.0));
  CHECK(bridge::prob_min_below(5.0, 5.0, 1.0, 0.0) < 1e-10);

  // Frequencies over many keys against the closed forms.
  const int n = 100000;
  int down = 0, up = 0, band = 0, down_big = 0;
  for (int k = 0; k < n; ++k) {
    e.key = static_cast<std::uint64_t>(k);
    const bool d = ec.crossed_below(e, 1.0, 1.0, 0.0);
    const bool u = ec.crossed_above(e, 1.0, 1.0, 1.8);
    down += d;
    up += u;
    band += d || u;
    down_big += ec.crossed_below(e, 5.0, 5.0, 0.0);
    // Pathwise monotonicity in each endpoint excess.
    if (!d) REQUIRE(!ec.crossed_below(e, 1.3, 1.0, 0.0));
    if (d) REQUIRE(ec.crossed_below(e, 0.9, 1.0, 0.0));
    // Mirrored view answers the opposite question.
    REQUIRE(ec.negated().crossed_below(e, -1.0, -1.0, -1.8) == u);
    REQUIRE(ec.negated().crossed_above(e, -1.0, -1.0, 0.0) == d);
  }
  auto within = [n](int count, double p) {
    const double se = std::sqrt(p * (1 - p) / n);
    return std::abs(static_cast<double>(count) / n - p) < 3 * se;
  };
  CHECK(within(down, std::exp(-2.0)));
  CHECK(within(up, std::exp(-2.0 * 0.8 * 0.8)));
  CHECK(within(band, 1.0 - bridge::band_survival(1.0, 1.0, 1.0, 0.0, 1.8, 1.0)));
  CHECK(down_big == 0);
}

TEST_CASE("edge crossings scale with resistance and bridge variance") {
  const EdgeCrossings ec(5, 0.5);
  const int n = 50000;
  int hits = 0;
  for (int k = 0; k < n; ++k) hits += ec.crossed_below(CableEdge{0, 1, 2.0, static_cast<std::uint64_t>(k)}, 0.7, 0.4, 0.0);
  const double p = std::exp(-2.0 * 0.7 * 0.4 / 1.0);
  CHECK(std::abs(static_cast<double>(hits) / n - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("hit fractions lie in the unit interval and are reproducible") {
  const EdgeCrossings ec(8, 1.0);
  const CableEdge e{0, 1, 1.0, 3};
  const double f = ec.hit_fraction_below(e, true, 0.5, -0.5, 0.0);
  CHECK(f > 0.0);
  CHECK(f < 1.0);
  CHECK(ec.hit_fraction_below(e, true, 0.5, -0.5, 0.0) == f);
  CHECK(ec.negated().hit_fraction_above(e, true, -0.5, 0.5, 0.0) == f);
  CHECK(ec.hit_fraction_below(e, true, 0.0, 1.0, 0.0) == 0.0);
}
