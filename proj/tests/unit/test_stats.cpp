#include <doctest.h>

#include <cmath>
#include <limits>

#include "fpslab/error.hpp"
#include "fpslab/rng.hpp"
#include "fpslab/stats.hpp"

using namespace fpslab;

TEST_CASE("small sample Kolmogorov p-values") {
  // Tabulated two-sided critical values for n = 10.
  CHECK(kolmogorov_pvalue(10, 0.409) == doctest::Approx(0.05).epsilon(0.1));
  CHECK(kolmogorov_pvalue(10, 0.490) == doctest::Approx(0.01).epsilon(0.15));
  // Exact and limiting branches meet smoothly.
  CHECK(kolmogorov_pvalue(500, 0.06) == doctest::Approx(kolmogorov_pvalue(501, 0.06)).epsilon(0.05));
  CHECK(kolmogorov_pvalue(100, 0.0) == 1.0);
}

TEST_CASE("KS rejection rate under the null") {
  const auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  int rejections = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Stream s(1234, static_cast<std::uint64_t>(rep));
    std::vector<double> x(10000);
    for (auto& v : x) v = s.uniform();
    rejections += ks_one_sample(x, uniform_cdf, 0.01).reject;
  }
  // Binomial(100, 0.01): mean 1, three standard errors is about 3.
  CHECK(rejections <= 4);
}

TEST_CASE("KS degenerate cases") {
  std::vector<double> c(500, 0.3);
  const auto r = ks_one_sample(c, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(r.reject);
  CHECK(r.p_value < 1e-12);
  Stream s(3, 0);
  std::vector<double> x(1000);
  for (auto& v : x) v = s.normal();
  CHECK(ks_two_sample(x, x).statistic == 0.0);
  std::vector<double> few(50, 0.0);
  try {
    ks_one_sample(few, [](double) { return 0.5; });
    FAIL("expected TooFewSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooFewSamples);
  }
}

TEST_CASE("Levy law against a random walk") {
  const double a = 0.5, horizon = 4.0;
  const auto walk = simulate_walk_hitting(a, 25, horizon, 20000, 77);
  const auto law = levy_hitting(a);
  for (double t : {0.05, 0.2, 0.5, 1.0, 3.0}) {
    int count = 0;
    for (double w : walk) count += w <= t;
    const double p = law.cdf(t);
    const double emp = static_cast<double>(count) / walk.size();
    CHECK_MESSAGE(std::abs(emp - p) < 3 * std::sqrt(p * (1 - p) / walk.size()) + 0.01, "t=" << t);
  }
}

TEST_CASE("censored samples against a law with an atom at infinity") {
  const double a = 0.5, horizon = 1.0;
  const auto law = levy_hitting_censored(a, horizon);
  const auto walk = simulate_walk_hitting(a, 25, horizon, 20000, 78);
  CHECK_FALSE(ks_test(walk, law).reject);
  // Everything censored: distance is the law's mass below the horizon.
  std::vector<double> never(1000, std::numeric_limits<double>::infinity());
  CHECK(ks_test(never, law).statistic == doctest::Approx(law.cdf(horizon)));
}

TEST_CASE("two bridge simulation routes agree with each other and the series") {
  const double L = std::log(1 / 0.3) / (2 * 3.141592653589793);
  const auto grid = simulate_bridge_exit_grid(0.0, -1.0, L, -1.0, INFINITY, 20000, 200, 1);
  const auto dyadic = simulate_bridge_exit_dyadic(0.0, -1.0, L, -1.0, INFINITY, 20000, 8, 2);
  CHECK(!ks_two_sample(grid, dyadic).reject);
  CHECK(!ks_test(grid, bridge_hitting(0.0, -1.0, L, -1.0, INFINITY)).reject);

  const double lam = std::sqrt(3.141592653589793 / 8);
  const auto g2 = simulate_bridge_exit_grid(0.0, -lam, L, -lam, lam, 20000, 200, 3);
  const auto d2 = simulate_bridge_exit_dyadic(0.0, -lam, L, -lam, lam, 20000, 8, 4);
  CHECK(!ks_two_sample(g2, d2).reject);
  CHECK(!ks_test(g2, bridge_hitting(0.0, -lam, L, -lam, lam)).reject);
}

TEST_CASE("mean and standard error") {
  const std::vector<double> x{1, 2, 3, 4};
  const auto m = mean_se(x);
  CHECK(m.mean == 2.5);
  CHECK(m.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0) / 2));
}
