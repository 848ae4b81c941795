#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "consensus_lab/diagnostics.hpp"

using namespace clab;

namespace {

edge_config three_cycle() {
  edge_config c(3);
  c.set_open(1, 2, true);
  c.set_open(2, 3, true);
  c.set_open(3, 1, true);
  return c;
}

bool scan_has_mask(const std::vector<scan_entry>& entries, std::uint64_t mask) {
  return std::any_of(entries.begin(), entries.end(),
                     [mask](const scan_entry& e) { return e.mask == mask; });
}

}  // namespace

TEST_CASE("contraction certificate on hand-checked configurations") {
  weight_matrix r2 = weight_matrix::dense_uniform(2);

  // both channels open: both rows are (1/2,1/2), overlap 1
  REQUIRE(contraction(edge_config::all_open(2), r2).gamma == 1.0);

  // nothing open: rows are the identity, overlap 0
  contraction_report frozen = contraction(edge_config(2), r2);
  REQUIRE(frozen.gamma == 0.0);
  REQUIRE(frozen.argmin_pair == std::pair<agent_id, agent_id>{1, 2});
  REQUIRE_FALSE(frozen.common_in_neighbor_ok);
  REQUIRE(frozen.pivot_set.empty());

  // one channel (1,2): rows (1,0) and (1/2,1/2), overlap 1/2
  edge_config one(2);
  one.set_open(1, 2, true);
  contraction_report half = contraction(one, r2);
  REQUIRE(half.gamma == 0.5);
  REQUIRE(half.common_in_neighbor_ok);
  REQUIRE(half.pivot_set == std::vector<agent_id>{1});
}

TEST_CASE("directed cycle contracts without any pivot") {
  weight_matrix r = weight_matrix::dense_uniform(3);
  contraction_report rep = contraction(three_cycle(), r);
  REQUIRE(rep.gamma == 0.25);
  REQUIRE(rep.pivot_set.empty());
  REQUIRE(rep.common_in_neighbor_ok);  // every pair still shares a speaker
  REQUIRE_FALSE(pivot_lower_bound(three_cycle(), r).has_value());
}

TEST_CASE("single agent is trivially contracted") {
  weight_matrix r1 = weight_matrix::from_entries(1, {});
  contraction_report rep = contraction(edge_config(1), r1);
  REQUIRE(rep.single_agent);
  REQUIRE(rep.gamma == 1.0);
  REQUIRE(rep.pivot_set == std::vector<agent_id>{1});
  REQUIRE(pivot_lower_bound(edge_config(1), r1) == 1.0);
}

TEST_CASE("pivot floor is attained where expected and never exceeds gamma") {
  // all-open n=2: floor min(1/2,1/2)^2 = 1/4 under gamma = 1
  weight_matrix r2 = weight_matrix::dense_uniform(2);
  auto b2 = pivot_lower_bound(edge_config::all_open(2), r2);
  REQUIRE(b2.has_value());
  REQUIRE(*b2 == 0.25);

  // all-open n=3: every row (1/3,1/3,1/3), floor 1/9 under gamma = 1
  weight_matrix r3 = weight_matrix::dense_uniform(3);
  auto b3 = pivot_lower_bound(edge_config::all_open(3), r3);
  REQUIRE(b3.has_value());
  REQUIRE(*b3 == Catch::Approx(1.0 / 9.0).margin(1e-15));

  // random systems: whenever the floor exists it sits below gamma
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    int n = 2 + static_cast<int>(gen() % 3);
    std::vector<std::tuple<agent_id, agent_id, double>> entries;
    for (agent_id u = 1; u <= n; ++u)
      for (agent_id v = 1; v <= n; ++v)
        if (u != v) entries.emplace_back(u, v, unit(gen));
    weight_matrix r = weight_matrix::from_entries(n, entries);
    edge_config omega = edge_config::from_mask(n, gen() & ((1u << off_diag_count(n)) - 1));
    contraction_report cr = contraction(omega, r);
    auto floor = pivot_lower_bound(transition_from(omega, r), cr);
    if (floor) {
      REQUIRE(*floor > 0.0);
      REQUIRE(*floor <= cr.gamma + 1e-12);
    }
  }
}

TEST_CASE("two agents: expected contraction equals the kernel closed form") {
  weight_matrix r = weight_matrix::dense_uniform(2);
  std::vector<confidence_function> fams{
      confidence_function::constant_one(), confidence_function::linear(0.7),
      confidence_function::exponential(1.5), confidence_function::threshold(0.4, 0.2)};
  for (const auto& p : fams) {
    edge_kernel k = edge_kernel::over(r, p);
    for (int i = 0; i <= 100; ++i) {
      double x2 = static_cast<double>(i) / 100.0;
      belief_vector x{0.0, x2};
      REQUIRE(expected_contraction(x, r, k) == Catch::Approx(p(x2)).margin(1e-12));
      REQUIRE(expected_contraction_at_diameter(x2, r, k) ==
              Catch::Approx(p(x2)).margin(1e-12));
    }
  }
}

TEST_CASE("zero disagreement forces full contraction in expectation") {
  for (int n : {2, 3, 4}) {
    weight_matrix r = weight_matrix::dense_uniform(n);
    edge_kernel k = edge_kernel::over(r, confidence_function::exponential(2.0));
    REQUIRE(expected_contraction_at_diameter(0.0, r, k) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("exhaustive expectation refuses oversized supports") {
  weight_matrix r = weight_matrix::dense_uniform(6);  // 30 channels
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.5));
  belief_vector x(6, 0.5);
  REQUIRE_THROWS_AS(expected_contraction(x, r, k), std::domain_error);
  REQUIRE_THROWS_AS(expected_contraction_at_diameter(0.3, r, k), std::domain_error);
}

TEST_CASE("Monte Carlo estimate agrees with exhaustive enumeration") {
  weight_matrix r = weight_matrix::dense_uniform(3);
  edge_kernel k = edge_kernel::over(r, confidence_function::linear(0.8));
  belief_vector x{0.1, 0.5, 0.9};
  double exact = expected_contraction(x, r, k);
  mc_estimate est = expected_contraction_mc(x, r, k, 20000, rng_stream{99, 0, 0});
  REQUIRE(est.samples == 20000);
  REQUIRE(est.se > 0.0);
  REQUIRE(std::fabs(est.mean - exact) <= 4.0 * est.se);

  // degenerate measure: every sample sees the all-open configuration
  edge_kernel ones = edge_kernel::over(r, confidence_function::constant_one());
  mc_estimate flat = expected_contraction_mc(x, r, ones, 100, rng_stream{99, 0, 0});
  REQUIRE(flat.mean == 1.0);
  REQUIRE(flat.se == 0.0);

  REQUIRE_THROWS_AS(expected_contraction_mc(x, r, k, 1, rng_stream{99, 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("geometric decay curves") {
  bound_curve c = geometric_bound(1.0, 0.5, 3);
  REQUIRE(c.values == std::vector<double>{1.0, 0.5, 0.25, 0.125});
  REQUIRE(c.rate == 0.5);

  bound_curve p = pair_geometric_bound(1.0, 0.5, 2);
  REQUIRE(p.values == std::vector<double>{1.0, 0.25, 0.0625});

  REQUIRE(geometric_bound(0.8, 0.0, 2).values == std::vector<double>{0.8, 0.8, 0.8});
  REQUIRE_THROWS_AS(geometric_bound(-1.0, 0.5, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(geometric_bound(1.0, 1.5, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(pair_geometric_bound(1.0, -0.1, 2), std::invalid_argument);
}

TEST_CASE("distance to the everything-open configuration") {
  REQUIRE(edge_distance_to_full(edge_config::all_open(2)) == 0.0);
  REQUIRE(edge_distance_to_full(edge_config(2)) == 0.5);  // 2 closed of 4 slots
  edge_config c = edge_config::all_open(3);
  c.set_open(2, 1, false);
  REQUIRE(edge_distance_to_full(c) == Catch::Approx(1.0 / 9.0).margin(1e-15));
}

TEST_CASE("exhaustive pivot scan at n = 3") {
  weight_matrix r = weight_matrix::dense_uniform(3);
  pivot_scan_result res = pivot_lemma_scan(3, r);
  REQUIRE(res.configs == 64);
  REQUIRE(res.pivot_without_contraction.empty());  // a pivot always certifies decay
  REQUIRE(res.common_in_neighbor_matches);

  // the two directed 3-cycles decay without any pivot
  REQUIRE_FALSE(res.contraction_without_pivot.empty());
  REQUIRE(scan_has_mask(res.contraction_without_pivot, 25));  // (1,2),(2,3),(3,1)
  REQUIRE(scan_has_mask(res.contraction_without_pivot, 38));  // (2,1),(3,2),(1,3)
  for (const auto& e : res.contraction_without_pivot) {
    REQUIRE(e.gamma > 0.0);
    REQUIRE(e.pivot_set.empty());
  }
  auto cycle = std::find_if(res.contraction_without_pivot.begin(),
                            res.contraction_without_pivot.end(),
                            [](const scan_entry& e) { return e.mask == 25; });
  REQUIRE(cycle->gamma == 0.25);
}

TEST_CASE("pivot scan is structural, not tied to uniform weights") {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::vector<std::tuple<agent_id, agent_id, double>> entries;
  for (agent_id u = 1; u <= 3; ++u)
    for (agent_id v = 1; v <= 3; ++v)
      if (u != v) entries.emplace_back(u, v, unit(gen));
  weight_matrix r = weight_matrix::from_entries(3, entries);
  pivot_scan_result res = pivot_lemma_scan(3, r);
  REQUIRE(res.configs == 64);
  REQUIRE(res.pivot_without_contraction.empty());
  REQUIRE(res.common_in_neighbor_matches);
  REQUIRE(scan_has_mask(res.contraction_without_pivot, 25));
}

TEST_CASE("pivot scan guards") {
  REQUIRE_THROWS_AS(pivot_lemma_scan(4, weight_matrix::dense_uniform(3)),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(pivot_lemma_scan(6, weight_matrix::dense_uniform(6)), std::domain_error);
}

TEST_CASE("pivot scan at n = 4 stays clean") {
  pivot_scan_result res = pivot_lemma_scan(4, weight_matrix::dense_uniform(4));
  REQUIRE(res.configs == 4096);
  REQUIRE(res.pivot_without_contraction.empty());
  REQUIRE(res.common_in_neighbor_matches);
  REQUIRE_FALSE(res.contraction_without_pivot.empty());
}
