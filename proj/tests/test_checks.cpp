#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "consensus_lab/checks.hpp"

using namespace clab;

namespace {

const check_line* find_check(const std::vector<check_line>& checks, const std::string& name) {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("the default verification suite passes") {
  verify_options opt;
  opt.trajectories = 400;
  std::vector<check_line> checks = run_verification(opt);
  REQUIRE(all_checks_pass(checks));
  for (const char* name :
       {"kernel-shape", "product-measure-total-mass", "holley-cross-term",
        "domination-in-beliefs", "domination-in-time", "contraction-range",
        "positivity-characterization", "pivot-implies-contraction",
        "expected-contraction-monotone", "mc-consistency", "geometric-decay", "supermartingale",
        "edge-distance", "pair-geometric-decay"}) {
    const check_line* line = find_check(checks, name);
    INFO(name);
    REQUIRE(line != nullptr);
    REQUIRE(line->pass);
    REQUIRE_FALSE(line->skipped);
  }
  // linear(0.5) contracts from the start, so no hypothesis flag appears
  REQUIRE(find_check(checks, "decay-hypothesis") == nullptr);
}

TEST_CASE("the injection hook flips the suite") {
  verify_options opt;
  opt.trajectories = 50;
  opt.inject_violation = true;
  std::vector<check_line> checks = run_verification(opt);
  REQUIRE_FALSE(all_checks_pass(checks));
  const check_line* line = find_check(checks, "injected-violation");
  REQUIRE(line != nullptr);
  REQUIRE_FALSE(line->pass);
  REQUIRE(line->margin < 0.0);
}

TEST_CASE("a frozen start is flagged as a skipped hypothesis, not a failure") {
  verify_options opt;
  opt.kernel = confidence_function::threshold(0.5, 0.0);  // every initial gap has p = 0
  opt.trajectories = 40;
  std::vector<check_line> checks = run_verification(opt);
  const check_line* flag = find_check(checks, "decay-hypothesis");
  REQUIRE(flag != nullptr);
  REQUIRE(flag->skipped);
  REQUIRE(all_checks_pass(checks));
  // the ensemble bounds still hold, degenerately
  REQUIRE(find_check(checks, "geometric-decay")->pass);
  REQUIRE(find_check(checks, "edge-distance")->pass);
}

TEST_CASE("system sizes beyond the enumeration budget are rejected") {
  verify_options opt;
  opt.n = 6;
  REQUIRE_THROWS_AS(run_verification(opt), std::invalid_argument);
}
