#pragma once

// Convergence certificates. For one configuration the certificate is
//
//   gamma = min over agent pairs (u,v) of
//           sum_{w,z} min( P[u][w] P[v][z], P[u][z] P[v][w] )
//
// computed from the row-stochastic matrix of the configuration; one step of
// the dynamics contracts the belief diameter by at least (1 - gamma). Its
// expectation over random configurations, at fixed beliefs or at a fixed
// disagreement level, drives the geometric decay bounds.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "consensus_lab/dynamics.hpp"
#include "consensus_lab/graph.hpp"
#include "consensus_lab/noise.hpp"

namespace clab {

// Exhaustive enumerations (expected contraction, pivot scans) refuse to walk
// more than 2^22 configurations.
inline constexpr std::size_t enumeration_budget_bits = 22;

struct contraction_report {
  double gamma = 1.0;
  std::pair<agent_id, agent_id> argmin_pair{0, 0};  // (0,0) when n == 1
  std::vector<agent_id> pivot_set;
  bool common_in_neighbor_ok = true;  // every pair shares an effective speaker
  bool single_agent = false;
};

namespace detail {

// Pair sum of the min-product kernel; symmetric in (w,z), so fold the
// off-diagonal terms once.
inline double pair_overlap(const transition_matrix& t, agent_id u, agent_id v) {
  int n = t.n;
  const double* pu = &t.p[static_cast<std::size_t>(u - 1) * n];
  const double* pv = &t.p[static_cast<std::size_t>(v - 1) * n];
  double s = 0.0;
  for (int w = 0; w < n; ++w) {
    s += pu[w] * pv[w];
    for (int z = w + 1; z < n; ++z) {
      double a = pu[w] * pv[z];
      double b = pu[z] * pv[w];
      s += 2.0 * (a < b ? a : b);
    }
  }
  return s;
}

inline bool rows_share_support(const transition_matrix& t, agent_id u, agent_id v) {
  int n = t.n;
  const double* pu = &t.p[static_cast<std::size_t>(u - 1) * n];
  const double* pv = &t.p[static_cast<std::size_t>(v - 1) * n];
  for (int w = 0; w < n; ++w)
    if (pu[w] > 0.0 && pv[w] > 0.0) return true;
  return false;
}

}  // namespace detail

inline contraction_report contraction_from_matrix(const transition_matrix& t) {
  contraction_report rep;
  if (t.n == 1) {
    rep.single_agent = true;
    rep.pivot_set = {1};
    return rep;
  }
  rep.gamma = 2.0;  // above any admissible value
  for (agent_id u = 1; u <= t.n; ++u) {
    for (agent_id v = u + 1; v <= t.n; ++v) {
      double s = detail::pair_overlap(t, u, v);
      if (s < rep.gamma) {
        rep.gamma = s;
        rep.argmin_pair = {u, v};
      }
      if (rep.common_in_neighbor_ok && !detail::rows_share_support(t, u, v))
        rep.common_in_neighbor_ok = false;
    }
  }
  return rep;
}

template <class Openness>
contraction_report contraction(const Openness& omega, const weight_matrix& r) {
  contraction_report rep = contraction_from_matrix(transition_from(omega, r));
  rep.pivot_set = pivots(omega);
  return rep;
}

// Certified floor on gamma from any pivot: at the worst pair (u,v), the
// squared smaller of the two mixing weights toward the pivot. Empty when the
// configuration has no pivot.
inline std::optional<double> pivot_lower_bound(const transition_matrix& t,
                                               const contraction_report& rep) {
  if (rep.pivot_set.empty()) return std::nullopt;
  if (rep.single_agent) return 1.0;
  auto [u, v] = rep.argmin_pair;
  double best = 0.0;
  for (agent_id w : rep.pivot_set) {
    double m = std::min(t.at(u, w), t.at(v, w));
    best = std::max(best, m * m);
  }
  return best;
}

template <class Openness>
std::optional<double> pivot_lower_bound(const Openness& omega, const weight_matrix& r) {
  transition_matrix t = transition_from(omega, r);
  contraction_report rep = contraction_from_matrix(t);
  rep.pivot_set = pivots(omega);
  return pivot_lower_bound(t, rep);
}

namespace detail {

// Sum of prob(omega) * gamma(omega) over every openness pattern of the
// support, with per-channel open probabilities q.
inline double expected_contraction_over(const std::vector<double>& q, const weight_matrix& r,
                                        const edge_kernel& k) {
  const auto& support = *k.support;
  std::size_t m = support.size();
  if (m > enumeration_budget_bits)
    throw std::domain_error(
        "expected contraction: " + std::to_string(m) +
        " support channels exceed the exhaustive budget of 22; use the Monte Carlo estimator");
  sparse_edge_config view(r.n(), k.support);
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    double prob = 1.0;
    for (std::size_t i = 0; i < m; ++i) prob *= (mask >> i) & 1u ? q[i] : 1.0 - q[i];
    if (prob == 0.0) continue;
    view.load_words({mask});
    total += prob * contraction(view, r).gamma;
  }
  return total;
}

}  // namespace detail

// Expected contraction at the given beliefs (exact enumeration).
inline double expected_contraction(const belief_vector& x, const weight_matrix& r,
                                   const edge_kernel& k) {
  const auto& support = *k.support;
  std::vector<double> q(support.size());
  for (std::size_t i = 0; i < support.size(); ++i)
    q[i] = edge_open_probability(x, support[i], k.p);
  return detail::expected_contraction_over(q, r, k);
}

// Expected contraction when every channel opens with the one probability
// p(w); this is the scalar comparison measure at disagreement level w.
inline double expected_contraction_at_diameter(double w, const weight_matrix& r,
                                               const edge_kernel& k) {
  std::vector<double> q(k.support->size(), k.p(w));
  return detail::expected_contraction_over(q, r, k);
}

struct mc_estimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
};

// Monte Carlo version for supports too large to enumerate. Sample i draws its
// channels from counters (i, channel); independent of any engine stream.
inline mc_estimate expected_contraction_mc(const belief_vector& x, const weight_matrix& r,
                                           const edge_kernel& k, std::size_t samples,
                                           const rng_stream& rng) {
  if (samples < 2) throw std::invalid_argument("expected_contraction_mc: need at least 2 samples");
  const auto& support = *k.support;
  std::vector<double> q(support.size());
  for (std::size_t i = 0; i < support.size(); ++i)
    q[i] = edge_open_probability(x, support[i], k.p);
  sparse_edge_config view(r.n(), k.support);
  std::vector<std::uint64_t> words((support.size() + 63) / 64);
  std::vector<double> draws(samples);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    std::fill(words.begin(), words.end(), 0);
    for (std::size_t j = 0; j < support.size(); ++j) {
      double u = rng.uniform(rng_tag::sampling,
                             (static_cast<std::uint64_t>(i) << enumeration_budget_bits) | j);
      if (u < q[j]) words[j >> 6] |= std::uint64_t{1} << (j & 63);
    }
    view.load_words(words);
    draws[i] = contraction(view, r).gamma;
    sum += draws[i];
  }
  mc_estimate est;
  est.samples = samples;
  est.mean = sum / static_cast<double>(samples);
  // centered sum keeps constant samples at the rounding floor, unlike E[v^2]-mean^2
  double ss = 0.0;
  for (double g : draws) {
    double d = g - est.mean;
    ss += d * d;
  }
  est.se = std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples));
  return est;
}

// values[t] = w0 * (1 - gamma0)^t for t = 0..horizon.
struct bound_curve {
  double start = 0.0;
  double rate = 1.0;  // factor applied per index
  std::vector<double> values;
};

namespace detail {
inline bound_curve geometric(double w0, double factor, std::size_t horizon) {
  bound_curve c;
  c.start = w0;
  c.rate = factor;
  c.values.resize(horizon + 1);
  double v = w0;
  for (std::size_t t = 0; t <= horizon; ++t) {
    c.values[t] = v;
    v *= factor;
  }
  return c;
}
}  // namespace detail

inline bound_curve geometric_bound(double w0, double gamma0, std::size_t horizon) {
  if (!(w0 >= 0.0) || !(gamma0 >= 0.0) || gamma0 > 1.0)
    throw std::invalid_argument("geometric_bound: need w0 >= 0 and gamma0 in [0,1]");
  return detail::geometric(w0, 1.0 - gamma0, horizon);
}

// Two elementary steps per chain step: values[t] = w0 * (1 - gamma0)^(2t).
inline bound_curve pair_geometric_bound(double w0, double gamma0, std::size_t horizon) {
  if (!(w0 >= 0.0) || !(gamma0 >= 0.0) || gamma0 > 1.0)
    throw std::invalid_argument("pair_geometric_bound: need w0 >= 0 and gamma0 in [0,1]");
  double f = (1.0 - gamma0) * (1.0 - gamma0);
  return detail::geometric(w0, f, horizon);
}

// Normalized distance from the everything-open configuration: closed channels
// over n^2 (diagonal channels are always open and contribute zero).
inline double edge_distance_to_full(const edge_config& omega) {
  std::size_t closed = off_diag_count(omega.n()) - omega.open_off_diag_count();
  return static_cast<double>(closed) /
         (static_cast<double>(omega.n()) * static_cast<double>(omega.n()));
}

// --- exhaustive pivot scan ---------------------------------------------

struct scan_entry {
  std::uint64_t mask = 0;  // row-major off-diagonal openness bits
  double gamma = 0.0;
  std::vector<agent_id> pivot_set;
};

struct pivot_scan_result {
  std::size_t configs = 0;
  // a pivot certifies gamma > 0, so this list is expected to stay empty
  std::vector<scan_entry> pivot_without_contraction;
  // gamma > 0 without any pivot is possible (directed cycles); kept verbatim
  std::vector<scan_entry> contraction_without_pivot;
  // gamma > 0 <=> some common speaker for every pair, checked exactly
  bool common_in_neighbor_matches = true;
};

inline pivot_scan_result pivot_lemma_scan(int n, const weight_matrix& r) {
  if (n != r.n()) throw std::invalid_argument("pivot_lemma_scan: size mismatch");
  if (off_diag_count(n) > enumeration_budget_bits)
    throw std::domain_error("pivot_lemma_scan: " + std::to_string(off_diag_count(n)) +
                            " off-diagonal channels exceed the exhaustive budget of 22");
  pivot_scan_result res;
  std::uint64_t total = std::uint64_t{1} << off_diag_count(n);
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    edge_config omega = edge_config::from_mask(n, mask);
    contraction_report rep = contraction(omega, r);
    ++res.configs;
    bool positive = rep.gamma > 0.0;
    if (positive != rep.common_in_neighbor_ok) res.common_in_neighbor_matches = false;
    if (!rep.pivot_set.empty() && !positive)
      res.pivot_without_contraction.push_back({mask, rep.gamma, rep.pivot_set});
    if (positive && rep.pivot_set.empty())
      res.contraction_without_pivot.push_back({mask, rep.gamma, rep.pivot_set});
  }
  return res;
}

}  // namespace clab
