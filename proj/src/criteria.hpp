#pragma once

// Internal: the individual campaign tests behind test_catalog().

#include <cstdint>

#include <nlohmann/json.hpp>

#include "fpslab/campaigns.hpp"

namespace fpslab::detail {

struct TestContext {
  const nlohmann::json& params;  // defaults merged with overrides
  const RunOptions& opts;
  ProfileStore& profiles;
  std::uint64_t seed;  // test-level seed
  TestReport& report;
};

using TestBody = void (*)(TestContext&);

void run_calibration(TestContext& ctx);
void run_hitting_time(TestContext& ctx);
void run_extremal_distance(TestContext& ctx);
void run_tvs_extremal_distance(TestContext& ctx);
void run_mean_measure(TestContext& ctx);
void run_minkowski_gauge(TestContext& ctx);
void run_level_recovery(TestContext& ctx);
void run_gmc_conditional(TestContext& ctx);
void run_structural_invariants(TestContext& ctx);
void run_tvs_threshold(TestContext& ctx);
void run_brute_force_oracles(TestContext& ctx);
void run_h_minus_one_trend(TestContext& ctx);

}  // namespace fpslab::detail
