#pragma once

// Random channel openings. Given the current beliefs, every off-diagonal
// support channel e opens independently with probability p(|gap across e|),
// where p: [0,1] -> [0,1] is nonincreasing with p(0) = 1. Diagonal channels
// are always open.
//
// Draws are counter-based: the uniform used for a channel depends only on
// (master seed, domain tag, trajectory, step, channel id), never on iteration
// order or on how many draws happened before. That keys every trajectory and
// every step to an independent stream and makes runs bit-reproducible; it also
// means a subsystem simulated on its own consumes exactly the same uniforms it
// would inside a larger system.

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "consensus_lab/dynamics.hpp"
#include "consensus_lab/graph.hpp"

namespace clab {

enum class kernel_family { constant_one, linear, quadratic, exponential, threshold };

inline const char* family_name(kernel_family f) {
  switch (f) {
    case kernel_family::constant_one: return "constant-one";
    case kernel_family::linear: return "linear";
    case kernel_family::quadratic: return "quadratic";
    case kernel_family::exponential: return "exponential";
    case kernel_family::threshold: return "threshold";
  }
  return "?";
}

// One gap-to-probability rule. Families:
//   constant-one      p(x) = 1
//   linear(beta)      p(x) = 1 - beta x,      beta in [0,1]
//   quadratic(beta)   p(x) = 1 - beta x^2,    beta in [0,1]
//   exponential(l)    p(x) = exp(-l x),       l >= 0
//   threshold(eps,d)  p(x) = 1 if x < eps else d,  eps in (0,1], d in [0,1]
struct confidence_function {
  kernel_family family = kernel_family::constant_one;
  double a = 0.0;  // beta / lambda / eps
  double b = 0.0;  // delta (threshold only)

  static confidence_function constant_one() { return {}; }
  static confidence_function linear(double beta) {
    require(beta >= 0.0 && beta <= 1.0, "linear kernel needs beta in [0,1]");
    return {kernel_family::linear, beta, 0.0};
  }
  static confidence_function quadratic(double beta) {
    require(beta >= 0.0 && beta <= 1.0, "quadratic kernel needs beta in [0,1]");
    return {kernel_family::quadratic, beta, 0.0};
  }
  static confidence_function exponential(double lambda) {
    require(lambda >= 0.0, "exponential kernel needs lambda >= 0");
    return {kernel_family::exponential, lambda, 0.0};
  }
  static confidence_function threshold(double eps, double delta) {
    require(eps > 0.0 && eps <= 1.0, "threshold kernel needs eps in (0,1]");
    require(delta >= 0.0 && delta <= 1.0, "threshold kernel needs delta in [0,1]");
    return {kernel_family::threshold, eps, delta};
  }

  double operator()(double x) const {
    switch (family) {
      case kernel_family::constant_one: return 1.0;
      case kernel_family::linear: return 1.0 - a * x;
      case kernel_family::quadratic: return 1.0 - a * x * x;
      case kernel_family::exponential: return std::exp(-a * x);
      case kernel_family::threshold: return x < a ? 1.0 : b;
    }
    return 1.0;
  }

  bool concave_on_unit() const {
    return family == kernel_family::linear || family == kernel_family::quadratic;
  }
  // All built-in families have a finite one-sided slope at 0; kept as metadata
  // for kernels added later.
  bool finite_slope_at_zero() const { return true; }

  bool identically_one() const {
    switch (family) {
      case kernel_family::constant_one: return true;
      case kernel_family::linear:
      case kernel_family::quadratic:
      case kernel_family::exponential: return a == 0.0;
      case kernel_family::threshold: return b == 1.0;
    }
    return false;
  }

 private:
  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }
};

// The product measure: a confidence rule applied over a fixed off-diagonal
// support list.
struct edge_kernel {
  confidence_function p;
  std::shared_ptr<const std::vector<directed_edge>> support;

  static edge_kernel over(const weight_matrix& r, confidence_function p) {
    return {p, r.support_ptr()};
  }
  static edge_kernel dense(int n, confidence_function p) {
    return {p, std::make_shared<std::vector<directed_edge>>(full_off_diag_support(n))};
  }
};

inline double edge_open_probability(const belief_vector& x, const directed_edge& e,
                                    const confidence_function& p) {
  return p(std::fabs(edge_gap(x, e)));
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t w) {
  return mix64(h ^ (w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline double to_unit(std::uint64_t bits) {  // [0,1), 53-bit resolution
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Domain tags keep unrelated uses of the same master seed apart.
namespace rng_tag {
inline constexpr std::uint64_t edges = 1;     // channel openings
inline constexpr std::uint64_t agents = 2;    // initial belief generation
inline constexpr std::uint64_t weights = 3;   // random support generation
inline constexpr std::uint64_t sampling = 4;  // Monte Carlo estimators
}  // namespace rng_tag

// A stateless stream position: (master seed, trajectory, step). Draws are
// pure functions of the stream and a counter, so streams can be shared,
// copied, and evaluated in any order.
struct rng_stream {
  std::uint64_t master = 0;
  std::uint64_t trajectory = 0;
  std::uint64_t step = 0;

  rng_stream with_step(std::uint64_t s) const { return {master, trajectory, s}; }
  rng_stream with_trajectory(std::uint64_t k) const { return {master, k, step}; }

  double uniform(std::uint64_t tag, std::uint64_t counter) const {
    std::uint64_t h = detail::mix64(master);
    h = detail::absorb(h, tag);
    h = detail::absorb(h, trajectory);
    h = detail::absorb(h, step);
    h = detail::absorb(h, counter);
    return detail::to_unit(h);
  }

  // One uniform per channel, keyed by the channel's identity.
  double uniform_for_edge(agent_id u, agent_id v) const {
    return uniform(rng_tag::edges,
                   (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v));
  }

  double uniform_for_agent(agent_id v) const {
    return uniform(rng_tag::agents, static_cast<std::uint64_t>(v));
  }
};

// Openness bits for every support channel, written into `words` (row-major
// support order, low bit first). A channel opens iff its uniform falls below
// its probability, so p = 1 always opens and p = 0 never does.
inline void sample_support_bits(const belief_vector& x, const edge_kernel& k,
                                const rng_stream& rng, std::vector<std::uint64_t>& words) {
  const auto& support = *k.support;
  words.assign((support.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    double q = edge_open_probability(x, support[i], k.p);
    if (rng.uniform_for_edge(support[i].first, support[i].second) < q)
      words[i >> 6] |= std::uint64_t{1} << (i & 63);
  }
}

// Dense draw: every support channel sampled, everything else stays closed
// (it carries no weight anyway).
inline edge_config sample_edge_config(const belief_vector& x, const edge_kernel& k,
                                      const rng_stream& rng) {
  edge_config c(static_cast<int>(x.size()));
  const auto& support = *k.support;
  for (const auto& e : support) {
    double q = edge_open_probability(x, e, k.p);
    if (rng.uniform_for_edge(e.first, e.second) < q) c.set_open(e.first, e.second, true);
  }
  return c;
}

inline sparse_edge_config sample_sparse_edge_config(const belief_vector& x, const edge_kernel& k,
                                                    const rng_stream& rng) {
  sparse_edge_config c(static_cast<int>(x.size()), k.support);
  std::vector<std::uint64_t> words;
  sample_support_bits(x, k, rng, words);
  c.load_words(words);
  return c;
}

// Probability of one configuration under the product measure at beliefs x.
// Product over the support only; diagonal channels are certain.
template <class Openness>
double config_probability(const Openness& omega, const belief_vector& x, const edge_kernel& k) {
  double prob = 1.0;
  for (const auto& e : *k.support) {
    double q = edge_open_probability(x, e, k.p);
    prob *= omega.open(e.first, e.second) ? q : 1.0 - q;
  }
  return prob;
}

// Same, but every support channel uses the one probability p(w). This is the
// scalar comparison measure indexed by a disagreement level w.
template <class Openness>
double diameter_config_probability(const Openness& omega, double w, const edge_kernel& k) {
  double q = k.p(w);
  double prob = 1.0;
  for (const auto& e : *k.support) prob *= omega.open(e.first, e.second) ? q : 1.0 - q;
  return prob;
}

}  // namespace clab
