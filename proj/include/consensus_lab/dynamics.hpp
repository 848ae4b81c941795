#pragma once

// Weighted averaging step. Each agent v replaces its belief by the weighted
// mean of the beliefs it currently hears, its own belief always included with
// weight 1:
//
//   X'_v = ( X_v + sum_{u!=v, open} r_{u,v} X_u ) / ( 1 + sum_{u!=v, open} r_{u,v} )
//
// The denominator is >= 1, so the map is well defined for every configuration.

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "consensus_lab/graph.hpp"

namespace clab {

using belief_vector = std::vector<double>;  // one belief in [0,1] per agent, index 0 = agent 1

// Positive listening weights r_{u,v} in (0,1] on a fixed off-diagonal support;
// the self-weight r_{v,v} = 1 is implicit. Stored column-wise (per listener)
// for the averaging step and row-major as a flat support list for sampling.
class weight_matrix {
 public:
  struct in_entry {
    agent_id u;
    double r;
    std::size_t si;  // index of (u,v) in the flat support list
  };

  weight_matrix() = default;

  static weight_matrix dense_uniform(int n) {
    std::vector<std::tuple<agent_id, agent_id, double>> entries;
    entries.reserve(off_diag_count(n));
    for (agent_id u = 1; u <= n; ++u)
      for (agent_id v = 1; v <= n; ++v)
        if (u != v) entries.emplace_back(u, v, 1.0);
    return from_entries(n, entries);
  }

  static weight_matrix from_entries(
      int n, const std::vector<std::tuple<agent_id, agent_id, double>>& entries) {
    if (n < 1) throw std::invalid_argument("weight_matrix: n must be >= 1");
    weight_matrix m;
    m.n_ = n;
    std::vector<std::tuple<agent_id, agent_id, double>> sorted = entries;
    std::sort(sorted.begin(), sorted.end());
    auto support = std::make_shared<std::vector<directed_edge>>();
    support->reserve(sorted.size());
    m.weights_.reserve(sorted.size());
    m.in_edges_.assign(static_cast<std::size_t>(n) + 1, {});
    for (const auto& [u, v, r] : sorted) {
      if (u < 1 || u > n || v < 1 || v > n)
        throw std::invalid_argument("weight_matrix: agent id out of range");
      if (u == v)
        throw std::invalid_argument("weight_matrix: self-weights are fixed at 1, do not list them");
      if (!(r > 0.0) || r > 1.0)
        throw std::invalid_argument("weight_matrix: weights must lie in (0,1]");
      if (!support->empty() && support->back() == directed_edge{u, v})
        throw std::invalid_argument("weight_matrix: duplicate entry");
      support->emplace_back(u, v);
      m.weights_.push_back(r);
      m.in_edges_[static_cast<std::size_t>(v)].push_back({u, r, support->size() - 1});
    }
    m.support_ = std::move(support);
    return m;
  }

  int n() const { return n_; }

  // Off-diagonal support pairs, row-major sorted; weights are parallel.
  const std::vector<directed_edge>& support() const { return *support_; }
  const std::vector<double>& support_weights() const { return weights_; }
  std::shared_ptr<const std::vector<directed_edge>> support_ptr() const { return support_; }

  // Off-diagonal listeners of v, sorted by speaker id.
  const std::vector<in_entry>& in_edges(agent_id v) const {
    return in_edges_[static_cast<std::size_t>(v)];
  }

  double weight(agent_id u, agent_id v) const {
    if (u == v) return 1.0;
    auto it = std::lower_bound(support_->begin(), support_->end(), directed_edge{u, v});
    if (it == support_->end() || *it != directed_edge{u, v}) return 0.0;
    return weights_[static_cast<std::size_t>(it - support_->begin())];
  }

 private:
  int n_ = 0;
  std::shared_ptr<const std::vector<directed_edge>> support_ =
      std::make_shared<std::vector<directed_edge>>();
  std::vector<double> weights_;                 // parallel to support_
  std::vector<std::vector<in_entry>> in_edges_;  // [v] -> off-diagonal speakers
};

// Row-stochastic matrix of one configuration, dense row-major. Row v holds the
// mixing weights agent v applies: P[v][u] = r_{u,v} omega_{u,v} / denom(v).
struct transition_matrix {
  int n = 0;
  std::vector<double> p;  // row-major n*n

  double at(agent_id v, agent_id u) const {
    return p[static_cast<std::size_t>(v - 1) * n + (u - 1)];
  }
};

template <class Openness>
transition_matrix transition_from(const Openness& omega, const weight_matrix& r) {
  if (omega.n() != r.n()) throw std::invalid_argument("transition_from: size mismatch");
  int n = r.n();
  transition_matrix t;
  t.n = n;
  t.p.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (agent_id v = 1; v <= n; ++v) {
    double denom = 1.0;
    for (const auto& e : r.in_edges(v))
      if (omega.open(e.u, v)) denom += e.r;
    double* row = &t.p[static_cast<std::size_t>(v - 1) * n];
    row[v - 1] = 1.0 / denom;
    for (const auto& e : r.in_edges(v))
      if (omega.open(e.u, v)) row[e.u - 1] = e.r / denom;
  }
  return t;
}

// New belief of a single listener. Accumulation order is fixed (self first,
// then speakers by increasing id) so that any two code paths agree bit for bit.
template <class Openness>
double step_one(const belief_vector& x, const Openness& omega, const weight_matrix& r,
                agent_id v) {
  double num = x[static_cast<std::size_t>(v - 1)];
  double den = 1.0;
  for (const auto& e : r.in_edges(v)) {
    if (omega.open(e.u, v)) {
      num += e.r * x[static_cast<std::size_t>(e.u - 1)];
      den += e.r;
    }
  }
  return num / den;
}

// One synchronous update of every agent; never materializes the transition
// matrix.
template <class Openness>
belief_vector step(const belief_vector& x, const Openness& omega, const weight_matrix& r) {
  if (static_cast<int>(x.size()) != r.n()) throw std::invalid_argument("step: size mismatch");
  belief_vector out(x.size());
  for (agent_id v = 1; v <= r.n(); ++v)
    out[static_cast<std::size_t>(v - 1)] = step_one(x, omega, r, v);
  return out;
}

// Largest pairwise disagreement, i.e. max X - min X.
inline double diameter(const belief_vector& x) {
  if (x.empty()) return 0.0;
  double lo = x[0], hi = x[0];
  for (double v : x) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return hi - lo;
}

inline double mean_belief(const belief_vector& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Nearest consensus profile in the averaged sense: every agent at the mean.
inline belief_vector consensus_projection(const belief_vector& x) {
  return belief_vector(x.size(), mean_belief(x));
}

// Signed gap read along the channel e = (speaker, listener): belief of the
// listener minus belief of the speaker.
inline double edge_gap(const belief_vector& x, const directed_edge& e) {
  return x[static_cast<std::size_t>(e.second - 1)] - x[static_cast<std::size_t>(e.first - 1)];
}

}  // namespace clab
