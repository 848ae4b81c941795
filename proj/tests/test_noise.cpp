#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "consensus_lab/noise.hpp"

using namespace clab;

TEST_CASE("kernel families evaluate their rules") {
  REQUIRE(confidence_function::constant_one()(0.9) == 1.0);
  REQUIRE(confidence_function::linear(0.5)(0.6) == Catch::Approx(0.7).margin(1e-15));
  REQUIRE(confidence_function::quadratic(1.0)(0.5) == Catch::Approx(0.75).margin(1e-15));
  REQUIRE(confidence_function::exponential(1.0)(0.6) ==
          Catch::Approx(std::exp(-0.6)).margin(1e-15));
  auto th = confidence_function::threshold(0.5, 0.125);
  REQUIRE(th(0.49) == 1.0);
  REQUIRE(th(0.5) == 0.125);  // boundary belongs to the far side
  REQUIRE(th(1.0) == 0.125);
}

TEST_CASE("every family is 1 at zero gap, stays in [0,1], and never increases") {
  std::vector<confidence_function> fams{
      confidence_function::constant_one(),   confidence_function::linear(0.8),
      confidence_function::quadratic(0.6),   confidence_function::exponential(2.5),
      confidence_function::threshold(0.3, 0.2)};
  for (const auto& p : fams) {
    REQUIRE(p(0.0) == 1.0);
    double prev = 1.0;
    for (int i = 0; i <= 1000; ++i) {
      double x = static_cast<double>(i) / 1000.0;
      double v = p(x);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      REQUIRE(v <= prev + 1e-15);
      prev = v;
    }
  }
}

TEST_CASE("kernel parameter validation") {
  REQUIRE_THROWS_AS(confidence_function::linear(1.2), std::invalid_argument);
  REQUIRE_THROWS_AS(confidence_function::linear(-0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(confidence_function::quadratic(2.0), std::invalid_argument);
  REQUIRE_THROWS_AS(confidence_function::exponential(-1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(confidence_function::threshold(0.0, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(confidence_function::threshold(0.5, 1.5), std::invalid_argument);
}

TEST_CASE("family metadata") {
  REQUIRE(confidence_function::linear(0.5).concave_on_unit());
  REQUIRE(confidence_function::quadratic(0.5).concave_on_unit());
  REQUIRE_FALSE(confidence_function::exponential(1.0).concave_on_unit());
  REQUIRE_FALSE(confidence_function::threshold(0.5, 0.0).concave_on_unit());

  REQUIRE(confidence_function::constant_one().identically_one());
  REQUIRE(confidence_function::linear(0.0).identically_one());
  REQUIRE(confidence_function::threshold(0.5, 1.0).identically_one());
  REQUIRE_FALSE(confidence_function::linear(0.5).identically_one());
}

TEST_CASE("channel probability reads the gap along the channel") {
  belief_vector x{0.2, 0.8};
  auto p = confidence_function::exponential(1.0);
  REQUIRE(edge_open_probability(x, {2, 1}, p) ==
          Catch::Approx(0.5488116360940264).margin(1e-12));
  REQUIRE(edge_open_probability(x, {1, 2}, p) ==
          edge_open_probability(x, {2, 1}, p));
}

TEST_CASE("configuration probabilities form a distribution") {
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  belief_vector x{0.0, 1.0};  // both channels open with probability 0.5
  REQUIRE(config_probability(edge_config::all_open(2), x, k) ==
          Catch::Approx(0.25).margin(1e-15));
  REQUIRE(config_probability(edge_config(2), x, k) == Catch::Approx(0.25).margin(1e-15));

  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  weight_matrix r3 = weight_matrix::dense_uniform(3);
  for (const auto& p : {confidence_function::linear(0.7), confidence_function::exponential(1.3),
                        confidence_function::threshold(0.4, 0.3)}) {
    edge_kernel k3 = edge_kernel::over(r3, p);
    belief_vector y{unit(gen), unit(gen), unit(gen)};
    double total = 0.0;
    for (std::uint64_t mask = 0; mask < 64; ++mask)
      total += config_probability(edge_config::from_mask(3, mask), y, k3);
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("diameter-level measure equals the belief measure at uniform gaps") {
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::quadratic(0.9));
  belief_vector x{0.1, 0.7};  // both gaps are 0.6
  for (std::uint64_t mask = 0; mask < 4; ++mask) {
    edge_config c = edge_config::from_mask(2, mask);
    REQUIRE(diameter_config_probability(c, 0.6, k) ==
            Catch::Approx(config_probability(c, x, k)).margin(1e-15));
  }
}

TEST_CASE("draws are pure functions of the stream position") {
  rng_stream a{42, 3, 7};
  REQUIRE(a.uniform_for_edge(1, 2) == rng_stream{42, 3, 7}.uniform_for_edge(1, 2));
  REQUIRE(a.uniform_for_edge(1, 2) != a.uniform_for_edge(2, 1));
  REQUIRE(a.uniform_for_edge(1, 2) != a.with_step(8).uniform_for_edge(1, 2));
  REQUIRE(a.uniform_for_edge(1, 2) != a.with_trajectory(4).uniform_for_edge(1, 2));
  REQUIRE(a.uniform_for_edge(1, 2) != rng_stream{43, 3, 7}.uniform_for_edge(1, 2));
  double u = a.uniform_for_edge(5, 9);
  REQUIRE(u >= 0.0);
  REQUIRE(u < 1.0);
}

TEST_CASE("sampling respects certain and impossible channels") {
  weight_matrix r = weight_matrix::dense_uniform(2);
  belief_vector far{0.0, 1.0};

  // gap 1 under linear(1) never opens anything
  edge_kernel never = edge_kernel::over(r, confidence_function::linear(1.0));
  for (std::uint64_t t = 0; t < 50; ++t) {
    edge_config c = sample_edge_config(far, never, rng_stream{9, 0, t});
    REQUIRE(c.open_off_diag_count() == 0);
  }

  // constant-one always opens everything
  edge_kernel always = edge_kernel::over(r, confidence_function::constant_one());
  for (std::uint64_t t = 0; t < 50; ++t) {
    edge_config c = sample_edge_config(far, always, rng_stream{9, 0, t});
    REQUIRE(c.open_off_diag_count() == 2);
  }
}

TEST_CASE("sampled frequencies track the channel probability") {
  weight_matrix r = weight_matrix::dense_uniform(2);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  belief_vector x{0.3, 0.7};  // p = 0.8 per channel
  int open = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t)
    if (sample_edge_config(x, k, rng_stream{123, 0, static_cast<std::uint64_t>(t)}).open(1, 2))
      ++open;
  double freq = static_cast<double>(open) / trials;
  REQUIRE(freq == Catch::Approx(0.8).margin(0.01));
}

TEST_CASE("dense and sparse samplers agree on the same stream") {
  weight_matrix r = weight_matrix::dense_uniform(3);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.4));
  belief_vector x{0.1, 0.5, 0.9};
  for (std::uint64_t t = 0; t < 20; ++t) {
    rng_stream s{77, 2, t};
    edge_config dense = sample_edge_config(x, k, s);
    sparse_edge_config sparse = sample_sparse_edge_config(x, k, s);
    for (agent_id u = 1; u <= 3; ++u)
      for (agent_id v = 1; v <= 3; ++v) REQUIRE(dense.open(u, v) == sparse.open(u, v));
  }
}
