#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "consensus_lab/verification.hpp"

using namespace clab;

namespace {

// n = 2, first step forced to a single open channel, then certain openings:
// W goes 0.6 -> 0.3 -> 0.
trajectory_record half_then_full() {
  run_config cfg;
  cfg.n = 2;
  cfg.kernel = confidence_function::constant_one();
  cfg.x0 = x0_spec::of({0.2, 0.8});
  cfg.omega0.k = omega0_spec::kind::open_list;
  cfg.omega0.open = {{1, 2}};
  cfg.record.omegas = true;
  return run(cfg);
}

const check_line& line_named(const ensemble_verification& ver, const std::string& name) {
  auto it = std::find_if(ver.checks.begin(), ver.checks.end(),
                         [&](const check_line& c) { return c.name == name; });
  REQUIRE(it != ver.checks.end());
  return *it;
}

}  // namespace

TEST_CASE("a faithful record produces no violations") {
  trajectory_record rec = half_then_full();
  REQUIRE(verify_trajectory(rec, weight_matrix::dense_uniform(2)).empty());
}

TEST_CASE("an inflated step is flagged as a contraction violation") {
  trajectory_record rec = half_then_full();
  rec.w[1] = 0.300001;  // above (1 - 1/2) * 0.6
  auto violations = verify_trajectory(rec, weight_matrix::dense_uniform(2));
  REQUIRE(violations.size() == 1);
  REQUIRE(violations[0].kind == "contraction");
  REQUIRE(violations[0].t == 0);
  REQUIRE(violations[0].gamma == 0.5);
  REQUIRE(violations[0].w_after == 0.300001);
}

TEST_CASE("an increasing step is flagged twice") {
  trajectory_record rec = half_then_full();
  rec.w[1] = 0.61;
  auto violations = verify_trajectory(rec, weight_matrix::dense_uniform(2));
  REQUIRE(violations.size() == 2);
  REQUIRE(violations[0].kind == "contraction");
  REQUIRE(violations[1].kind == "monotone");
}

TEST_CASE("verification without recorded configurations is refused") {
  run_config cfg;
  cfg.n = 2;
  cfg.kernel = confidence_function::constant_one();
  cfg.x0 = x0_spec::of({0.2, 0.8});
  trajectory_record rec = run(cfg);
  REQUIRE_THROWS_AS(verify_trajectory(rec, weight_matrix::dense_uniform(2)),
                    std::invalid_argument);
}

TEST_CASE("random trajectories never violate the pathwise certificate") {
  run_config cfg;
  cfg.n = 4;
  cfg.kernel = confidence_function::linear(0.8);
  cfg.seed = 17;
  cfg.max_steps = 300;
  cfg.record.omegas = true;
  ensemble_result ens = run_ensemble(cfg, 50, 2);
  weight_matrix r = weight_matrix::dense_uniform(4);
  for (const auto& rec : ens.runs) REQUIRE(verify_trajectory(rec, r).empty());
}

namespace {

ensemble_result two_agent_ensemble(bool record_omegas) {
  run_config cfg;
  cfg.n = 2;
  cfg.kernel = confidence_function::linear(0.5);
  cfg.x0 = x0_spec::of({0.0, 1.0});
  cfg.seed = 29;
  cfg.max_steps = 200;
  cfg.record.omegas = record_omegas;
  return run_ensemble(cfg, 400, 2);
}

}  // namespace

TEST_CASE("ensemble checks pass on honest runs") {
  ensemble_result ens = two_agent_ensemble(true);
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  ensemble_verification ver = verify_ensemble(ens, {0.0, 1.0}, r, k, 12);

  REQUIRE(ver.checks.size() == 4);
  REQUIRE(ver.all_pass);
  for (const auto& line : ver.checks) REQUIRE(line.pass);

  REQUIRE(ver.mean_w.size() == 13);
  REQUIRE(ver.bound_w.size() == 13);
  REQUIRE(ver.bound_w[0] == 1.0);
  REQUIRE(ver.bound_w[1] == 0.5);  // expected contraction at full disagreement
  REQUIRE(ver.pair_bound_w.size() == 7);
  REQUIRE(ver.pair_bound_w[1] == 0.25);
  REQUIRE(ver.mean_dist.size() == 13);
  REQUIRE(ver.mean_w[0] == 1.0);
  for (std::size_t t = 0; t + 1 < ver.mean_w.size(); ++t)
    REQUIRE(ver.mean_w[t + 1] <= ver.mean_w[t] + 1e-12);
}

TEST_CASE("ensemble checks catch inflated disagreement") {
  ensemble_result ens = two_agent_ensemble(true);
  for (auto& rec : ens.runs) rec.w[1] = 1.9;  // impossible after one step
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  ensemble_verification ver = verify_ensemble(ens, {0.0, 1.0}, r, k, 8);

  REQUIRE_FALSE(ver.all_pass);
  REQUIRE_FALSE(line_named(ver, "geometric-decay").pass);
  REQUIRE(line_named(ver, "geometric-decay").margin < 0.0);
  REQUIRE_FALSE(line_named(ver, "supermartingale").pass);
}

TEST_CASE("the edge-distance check requires recorded configurations") {
  ensemble_result ens = two_agent_ensemble(false);
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  ensemble_verification ver = verify_ensemble(ens, {0.0, 1.0}, r, k, 8);

  REQUIRE_FALSE(ver.all_pass);
  const check_line& dist = line_named(ver, "edge-distance");
  REQUIRE_FALSE(dist.pass);
  REQUIRE(dist.details.find("not recorded") != std::string::npos);
  REQUIRE(line_named(ver, "geometric-decay").pass);
  REQUIRE(line_named(ver, "supermartingale").pass);
}

TEST_CASE("an empty ensemble is refused") {
  ensemble_result ens;
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  REQUIRE_THROWS_AS(verify_ensemble(ens, {0.0, 1.0}, r, k), std::invalid_argument);
}
