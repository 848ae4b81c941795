#pragma once

// Directed interaction graphs over agents 1..n. An edge (u,v) means "v listens
// to u". Self-loops are always present and are therefore not stored: a
// configuration only tracks the off-diagonal channels, bit-packed in row-major
// order so that exhaustive enumeration over all configurations of a small
// system is a plain integer counter.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

namespace clab {

using agent_id = int;                       // 1-based
using directed_edge = std::pair<agent_id, agent_id>;  // (speaker, listener)

inline std::size_t off_diag_count(int n) {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1);
}

// Row-major position of the off-diagonal pair (u,v): row u lists every v != u
// in increasing order.
inline std::size_t off_diag_index(int n, agent_id u, agent_id v) {
  return static_cast<std::size_t>(u - 1) * (n - 1) + (v - 1) - (v > u ? 1 : 0);
}

// All off-diagonal pairs of an n-agent system, in row-major order.
inline std::vector<directed_edge> full_off_diag_support(int n) {
  std::vector<directed_edge> out;
  out.reserve(off_diag_count(n));
  for (agent_id u = 1; u <= n; ++u)
    for (agent_id v = 1; v <= n; ++v)
      if (u != v) out.emplace_back(u, v);
  return out;
}

namespace detail {

struct bit_block {
  std::vector<std::uint64_t> words;

  explicit bit_block(std::size_t bits = 0) : words((bits + 63) / 64, 0) {}
  bool test(std::size_t i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool v) {
    std::uint64_t m = std::uint64_t{1} << (i & 63);
    if (v)
      words[i >> 6] |= m;
    else
      words[i >> 6] &= ~m;
  }
  void fill(std::size_t bits, bool v) {
    for (std::size_t i = 0; i < words.size(); ++i)
      words[i] = v ? ~std::uint64_t{0} : 0;
    if (v && bits % 64) words.back() >>= (64 - bits % 64);
  }
  bool operator==(const bit_block&) const = default;
};

}  // namespace detail

// Openness of every channel of a dense n-agent system. Diagonal channels are
// open by construction and cannot be closed.
class edge_config {
 public:
  edge_config() = default;
  explicit edge_config(int n) : n_(check_n(n)), bits_(off_diag_count(n)) {}

  static edge_config all_open(int n) {
    edge_config c(n);
    c.bits_.fill(off_diag_count(n), true);
    return c;
  }

  // Low bit of `mask` = off-diagonal index 0. Only usable while the
  // off-diagonal pair count fits one word; that is all an exhaustive scan
  // ever needs.
  static edge_config from_mask(int n, std::uint64_t mask) {
    if (off_diag_count(n) > 64)
      throw std::invalid_argument("edge_config::from_mask: more than 64 off-diagonal pairs");
    edge_config c(n);
    for (std::size_t i = 0; i < off_diag_count(n); ++i)
      c.bits_.set(i, (mask >> i) & 1u);
    return c;
  }

  int n() const { return n_; }

  bool open(agent_id u, agent_id v) const {
    return u == v || bits_.test(off_diag_index(n_, u, v));
  }

  void set_open(agent_id u, agent_id v, bool open) {
    if (u == v) return;  // diagonal is pinned open
    bits_.set(off_diag_index(n_, u, v), open);
  }

  std::size_t open_off_diag_count() const {
    std::size_t c = 0;
    for (std::uint64_t w : bits_.words) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }

  bool operator==(const edge_config&) const = default;

 private:
  static int check_n(int n) {
    if (n < 1) throw std::invalid_argument("edge_config: n must be >= 1");
    return n;
  }

  int n_ = 0;
  detail::bit_block bits_;
};

// Openness restricted to a fixed off-diagonal support list (row-major sorted).
// Channels outside the support read as closed; they carry no weight, so their
// state never matters to the dynamics.
class sparse_edge_config {
 public:
  using support_ptr = std::shared_ptr<const std::vector<directed_edge>>;

  sparse_edge_config() = default;
  sparse_edge_config(int n, support_ptr support, bool open_all = false)
      : n_(n), support_(std::move(support)), bits_(support_->size()) {
    if (open_all) bits_.fill(support_->size(), true);
  }

  int n() const { return n_; }
  const std::vector<directed_edge>& support() const { return *support_; }

  bool open(agent_id u, agent_id v) const {
    if (u == v) return true;
    auto it = std::lower_bound(support_->begin(), support_->end(), directed_edge{u, v});
    if (it == support_->end() || *it != directed_edge{u, v}) return false;
    return bits_.test(static_cast<std::size_t>(it - support_->begin()));
  }

  bool open_at(std::size_t support_index) const { return bits_.test(support_index); }
  void set_open_at(std::size_t support_index, bool open) { bits_.set(support_index, open); }

  std::size_t open_count() const {
    std::size_t c = 0;
    for (std::uint64_t w : bits_.words) c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }

  const std::vector<std::uint64_t>& words() const { return bits_.words; }
  void load_words(const std::vector<std::uint64_t>& w) { bits_.words = w; }

 private:
  int n_ = 0;
  support_ptr support_;
  detail::bit_block bits_;
};

// Every open channel, diagonal included, sorted lexicographically.
template <class Openness>
std::vector<directed_edge> open_edges(const Openness& omega) {
  std::vector<directed_edge> out;
  for (agent_id u = 1; u <= omega.n(); ++u)
    for (agent_id v = 1; v <= omega.n(); ++v)
      if (omega.open(u, v)) out.emplace_back(u, v);
  return out;
}

// Who v hears from (closed neighborhood: always contains v).
template <class Openness>
std::vector<agent_id> in_neighborhood(const Openness& omega, agent_id v) {
  std::vector<agent_id> out;
  for (agent_id u = 1; u <= omega.n(); ++u)
    if (omega.open(u, v)) out.push_back(u);
  return out;
}

// Who hears v (closed neighborhood: always contains v).
template <class Openness>
std::vector<agent_id> out_neighborhood(const Openness& omega, agent_id v) {
  std::vector<agent_id> out;
  for (agent_id u = 1; u <= omega.n(); ++u)
    if (omega.open(v, u)) out.push_back(u);
  return out;
}

// k-step forward reach of v (k = 0 gives {v}).
template <class Openness>
std::vector<agent_id> iterated_out_neighborhood(const Openness& omega, agent_id v, int k) {
  std::vector<char> reached(static_cast<std::size_t>(omega.n()) + 1, 0);
  reached[static_cast<std::size_t>(v)] = 1;
  std::vector<agent_id> frontier{v};
  for (int step = 0; step < k && !frontier.empty(); ++step) {
    std::vector<agent_id> next;
    for (agent_id w : frontier)
      for (agent_id u = 1; u <= omega.n(); ++u)
        if (omega.open(w, u) && !reached[static_cast<std::size_t>(u)]) {
          reached[static_cast<std::size_t>(u)] = 1;
          next.push_back(u);
        }
    frontier = std::move(next);
  }
  std::vector<agent_id> out;
  for (agent_id u = 1; u <= omega.n(); ++u)
    if (reached[static_cast<std::size_t>(u)]) out.push_back(u);
  return out;
}

// Agents whose one-step reach is everybody.
template <class Openness>
std::vector<agent_id> pivots(const Openness& omega) {
  std::vector<agent_id> out;
  for (agent_id w = 1; w <= omega.n(); ++w) {
    bool all = true;
    for (agent_id u = 1; u <= omega.n() && all; ++u)
      if (!omega.open(w, u)) all = false;
    if (all) out.push_back(w);
  }
  return out;
}

// Partition of 1..n into strongly connected components of the spanning graph
// of `edges` (self-loops implied). Agents touching no edge are singletons.
// Components are sorted internally and ordered by their smallest member.
inline std::vector<std::vector<agent_id>> support_components(
    int n, const std::vector<directed_edge>& edges) {
  // adjacency only for agents that actually appear
  std::map<agent_id, std::vector<agent_id>> adj;
  for (const auto& [u, v] : edges) {
    if (u < 1 || u > n || v < 1 || v > n)
      throw std::invalid_argument("support_components: agent id out of range");
    if (u != v) adj[u].push_back(v), adj[v];  // ensure both keys exist
  }

  // iterative Tarjan over the touched agents
  std::map<agent_id, int> index, low;
  std::map<agent_id, bool> on_stack;
  std::vector<agent_id> stack;
  std::vector<std::vector<agent_id>> comps;
  int counter = 0;

  struct frame {
    agent_id v;
    std::size_t next_child;
  };
  for (const auto& [root, _] : adj) {
    if (index.count(root)) continue;
    std::vector<frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      frame& f = call.back();
      const auto& children = adj[f.v];
      if (f.next_child < children.size()) {
        agent_id w = children[f.next_child++];
        if (!index.count(w)) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        if (low[f.v] == index[f.v]) {
          std::vector<agent_id> comp;
          for (;;) {
            agent_id w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp.push_back(w);
            if (w == f.v) break;
          }
          std::sort(comp.begin(), comp.end());
          comps.push_back(std::move(comp));
        }
        agent_id done = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[done]);
      }
    }
  }

  // untouched agents are their own component
  std::map<agent_id, bool> touched;
  for (const auto& [v, _] : adj) touched[v] = true;
  for (agent_id v = 1; v <= n; ++v)
    if (!touched.count(v)) comps.push_back({v});

  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return comps;
}

}  // namespace clab
