#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "consensus_lab/graph.hpp"

using namespace clab;

namespace {

edge_config three_cycle() {
  edge_config c(3);
  c.set_open(1, 2, true);
  c.set_open(2, 3, true);
  c.set_open(3, 1, true);
  return c;
}

}  // namespace

TEST_CASE("off-diagonal indexing walks row-major without gaps") {
  for (int n : {2, 3, 5, 8, 12}) {
    std::size_t next = 0;
    for (agent_id u = 1; u <= n; ++u)
      for (agent_id v = 1; v <= n; ++v)
        if (u != v) REQUIRE(off_diag_index(n, u, v) == next++);
    REQUIRE(next == off_diag_count(n));
  }
}

TEST_CASE("full off-diagonal support lists pairs in index order") {
  auto sup = full_off_diag_support(4);
  REQUIRE(sup.size() == off_diag_count(4));
  for (std::size_t i = 0; i < sup.size(); ++i)
    REQUIRE(off_diag_index(4, sup[i].first, sup[i].second) == i);
  REQUIRE(std::is_sorted(sup.begin(), sup.end()));
}

TEST_CASE("diagonal channels are open and cannot be closed") {
  edge_config c(3);
  for (agent_id v = 1; v <= 3; ++v) REQUIRE(c.open(v, v));
  c.set_open(2, 2, false);
  REQUIRE(c.open(2, 2));
  REQUIRE(c.open_off_diag_count() == 0);
}

TEST_CASE("set/get round-trips over random masks") {
  std::mt19937_64 gen(7);
  for (int n : {2, 3, 4, 6}) {
    for (int rep = 0; rep < 50; ++rep) {
      std::uint64_t mask =
          gen() & (off_diag_count(n) >= 64 ? ~std::uint64_t{0}
                                           : ((std::uint64_t{1} << off_diag_count(n)) - 1));
      edge_config c = edge_config::from_mask(n, mask);
      for (agent_id u = 1; u <= n; ++u)
        for (agent_id v = 1; v <= n; ++v)
          if (u != v)
            REQUIRE(c.open(u, v) == bool((mask >> off_diag_index(n, u, v)) & 1u));
    }
  }
}

TEST_CASE("three-cycle neighborhoods") {
  edge_config c = three_cycle();
  REQUIRE(in_neighborhood(c, 1) == std::vector<agent_id>{1, 3});
  REQUIRE(out_neighborhood(c, 1) == std::vector<agent_id>{1, 2});
  REQUIRE(iterated_out_neighborhood(c, 1, 1) == std::vector<agent_id>{1, 2});
  REQUIRE(iterated_out_neighborhood(c, 1, 2) == std::vector<agent_id>{1, 2, 3});
  REQUIRE(iterated_out_neighborhood(c, 1, 0) == std::vector<agent_id>{1});
}

TEST_CASE("three-cycle has no pivot; the mask constant is 25") {
  edge_config c = three_cycle();
  REQUIRE(pivots(c).empty());
  REQUIRE(c == edge_config::from_mask(3, 25));
}

TEST_CASE("everything-open has every agent as pivot") {
  edge_config c = edge_config::all_open(4);
  REQUIRE(pivots(c) == std::vector<agent_id>{1, 2, 3, 4});
  REQUIRE(c.open_off_diag_count() == off_diag_count(4));
}

TEST_CASE("open_edges is sorted and includes the diagonal") {
  edge_config c(2);
  c.set_open(1, 2, true);
  REQUIRE(open_edges(c) ==
          std::vector<directed_edge>{{1, 1}, {1, 2}, {2, 2}});
}

TEST_CASE("sparse openness answers through its support") {
  auto sup = std::make_shared<std::vector<directed_edge>>(
      std::vector<directed_edge>{{1, 2}, {2, 1}});
  sparse_edge_config c(5, sup);
  REQUIRE(c.open(3, 3));           // diagonal
  REQUIRE_FALSE(c.open(1, 2));     // in support, closed
  REQUIRE_FALSE(c.open(4, 5));     // outside support
  c.set_open_at(0, true);
  REQUIRE(c.open(1, 2));
  REQUIRE(c.open_count() == 1);
  sparse_edge_config all(5, sup, true);
  REQUIRE(all.open(1, 2));
  REQUIRE(all.open(2, 1));
  REQUIRE(all.open_count() == 2);
}

TEST_CASE("support components use mutual reachability") {
  // spec anchor: a single mutual pair plus a loner
  REQUIRE(support_components(3, {{1, 2}, {2, 1}}) ==
          std::vector<std::vector<agent_id>>{{1, 2}, {3}});
  // a directed cycle is one component
  REQUIRE(support_components(3, {{1, 2}, {2, 3}, {3, 1}}) ==
          std::vector<std::vector<agent_id>>{{1, 2, 3}});
  // one-way influence does not merge components
  REQUIRE(support_components(3, {{1, 2}}) ==
          std::vector<std::vector<agent_id>>{{1}, {2}, {3}});
  // no edges: all singletons
  REQUIRE(support_components(2, {}) == std::vector<std::vector<agent_id>>{{1}, {2}});
}

TEST_CASE("support components stay cheap when n is large and support tiny") {
  auto comps = support_components(100000, {{1, 2}, {2, 1}});
  REQUIRE(comps.size() == 99999);
  REQUIRE(comps.front() == std::vector<agent_id>{1, 2});
  REQUIRE(comps.back() == std::vector<agent_id>{100000});
}

TEST_CASE("component calls reject out-of-range ids") {
  REQUIRE_THROWS_AS(support_components(2, {{1, 3}}), std::invalid_argument);
}
