#pragma once

// Trajectory engine. One run alternates
//
//   X(t+1) = averaging step of X(t) under the open channels omega(t)
//   omega(t+1) ~ product measure at X(t)
//
// and stops when every channel probability equals one (the sum over the
// watched pairs reaches its ceiling within 1e-12), when the belief diameter
// drops below consensus_tol, or at max_steps — checked in that order. The
// all-probabilities-one rule is skipped for kernels that are identically 1,
// where it is always true and says nothing about consensus.
//
// Dense and sparse runs share one loop; sparse mode only changes which pairs
// the stop rule watches (the weighted support instead of all n(n-1) pairs)
// and keeps per-step work proportional to the support, so a two-agent support
// inside a million-agent population costs the same as a two-agent system.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <vector>

#include "consensus_lab/diagnostics.hpp"
#include "consensus_lab/dynamics.hpp"
#include "consensus_lab/graph.hpp"
#include "consensus_lab/noise.hpp"

namespace clab {

enum class stop_reason { consensus_tol, all_probs_one, max_steps };

inline const char* stop_reason_name(stop_reason s) {
  switch (s) {
    case stop_reason::consensus_tol: return "consensus_tol";
    case stop_reason::all_probs_one: return "all_probs_one";
    case stop_reason::max_steps: return "max_steps";
  }
  return "?";
}

enum class run_mode { dense, sparse };

struct record_flags {
  bool beliefs = false;
  bool omegas = false;
  bool gamma_per_step = false;
};

struct x0_spec {
  enum class kind { values, uniform_random, equispaced, two_cluster };
  kind k = kind::equispaced;
  belief_vector values;               // kind::values
  double low = 0.0, high = 1.0;       // two-cluster levels
  double split = 0.5;                 // fraction of agents at `low`

  static x0_spec of(belief_vector v) {
    x0_spec s;
    s.k = kind::values;
    s.values = std::move(v);
    return s;
  }
};

struct weight_spec {
  enum class kind { dense_uniform, entries, random_sparse };
  kind k = kind::dense_uniform;
  std::vector<std::tuple<agent_id, agent_id, double>> entries;
  double density = 0.5;  // random_sparse: inclusion probability per channel
};

struct omega0_spec {
  // `sampled` draws omega(0) from the gap measure at X0, per trajectory; the
  // other kinds fix one deterministic initial pattern for every trajectory.
  enum class kind { all_open, open_list, sampled };
  kind k = kind::all_open;
  std::vector<directed_edge> open;  // open_list: must lie inside the weight support
};

struct run_config {
  int n = 0;
  x0_spec x0;
  weight_spec weights;
  confidence_function kernel;  // required in file configs; defaults only in code
  omega0_spec omega0;
  std::uint64_t seed = 1;
  std::size_t max_steps = 10000;
  double consensus_tol = 1e-10;
  record_flags record;
  std::optional<run_mode> mode;  // default: sparse iff weights are an explicit entry list
  std::optional<int> truncation_window;
};

inline run_mode effective_mode(const run_config& cfg) {
  if (cfg.mode) return *cfg.mode;
  return cfg.weights.k == weight_spec::kind::entries ? run_mode::sparse : run_mode::dense;
}

struct trajectory_record {
  int n = 0;
  std::size_t run_id = 0;
  std::vector<double> w;        // diameter at t = 0..T
  std::vector<double> mean_x;   // mean belief at t = 0..T
  std::vector<double> gamma_t;  // optional: contraction of omega(t)
  std::vector<std::vector<std::uint64_t>> omegas;  // optional: support bits of omega(t)
  std::vector<belief_vector> beliefs;              // optional: first `beliefs_window` agents
  int beliefs_window = 0;
  std::shared_ptr<const std::vector<directed_edge>> support;
  belief_vector final_x;
  stop_reason reason = stop_reason::max_steps;

  std::size_t steps() const { return w.empty() ? 0 : w.size() - 1; }
};

// Fully materialized system: weights, kernel, initial state, derived lookup
// tables. Built once per config and shared read-only across trajectories.
struct system_setup {
  int n = 0;
  run_mode mode = run_mode::dense;
  weight_matrix r;
  edge_kernel kernel;
  belief_vector x0;
  std::vector<std::uint64_t> omega0_words;
  bool omega0_sampled = false;  // draw omega(0) per trajectory instead
  int window = 0;               // belief-recording prefix
  bool rule3e = true;

  std::vector<agent_id> mutable_agents;  // agents with at least one in-channel
  std::size_t frozen_count = 0;          // everyone else never moves
  double frozen_min = 0.0, frozen_max = 0.0, frozen_sum = 0.0;
};

namespace detail {

inline belief_vector generate_x0(const x0_spec& spec, int n, std::uint64_t seed) {
  belief_vector x(static_cast<std::size_t>(n));
  switch (spec.k) {
    case x0_spec::kind::values:
      if (static_cast<int>(spec.values.size()) != n)
        throw std::invalid_argument("X0: expected exactly n values");
      for (double v : spec.values)
        if (!(v >= 0.0) || v > 1.0) throw std::invalid_argument("X0: beliefs must lie in [0,1]");
      return spec.values;
    case x0_spec::kind::uniform_random: {
      rng_stream rng{seed, 0, 0};
      for (agent_id v = 1; v <= n; ++v)
        x[static_cast<std::size_t>(v - 1)] = rng.uniform_for_agent(v);
      return x;
    }
    case x0_spec::kind::equispaced:
      for (agent_id v = 1; v <= n; ++v)
        x[static_cast<std::size_t>(v - 1)] =
            n == 1 ? 0.0 : static_cast<double>(v - 1) / static_cast<double>(n - 1);
      return x;
    case x0_spec::kind::two_cluster: {
      if (!(spec.low >= 0.0) || spec.low > 1.0 || !(spec.high >= 0.0) || spec.high > 1.0)
        throw std::invalid_argument("X0: cluster levels must lie in [0,1]");
      if (!(spec.split >= 0.0) || spec.split > 1.0)
        throw std::invalid_argument("X0: split must lie in [0,1]");
      long low_count = std::lround(spec.split * n);
      for (agent_id v = 1; v <= n; ++v)
        x[static_cast<std::size_t>(v - 1)] = v <= low_count ? spec.low : spec.high;
      return x;
    }
  }
  throw std::logic_error("X0: unknown generator");
}

inline weight_matrix generate_weights(const weight_spec& spec, int n, std::uint64_t seed) {
  switch (spec.k) {
    case weight_spec::kind::dense_uniform:
      return weight_matrix::dense_uniform(n);
    case weight_spec::kind::entries:
      return weight_matrix::from_entries(n, spec.entries);
    case weight_spec::kind::random_sparse: {
      if (!(spec.density >= 0.0) || spec.density > 1.0)
        throw std::invalid_argument("weights: density must lie in [0,1]");
      rng_stream rng{seed, 0, 0};
      std::vector<std::tuple<agent_id, agent_id, double>> entries;
      for (agent_id u = 1; u <= n; ++u)
        for (agent_id v = 1; v <= n; ++v) {
          if (u == v) continue;
          std::size_t i = off_diag_index(n, u, v);
          if (rng.uniform(rng_tag::weights, 2 * i) < spec.density)
            entries.emplace_back(u, v, 1.0 - rng.uniform(rng_tag::weights, 2 * i + 1));
        }
      return weight_matrix::from_entries(n, entries);
    }
  }
  throw std::logic_error("weights: unknown kind");
}

}  // namespace detail

inline system_setup materialize(const run_config& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("n: must be >= 1");
  if (!(cfg.consensus_tol > 0.0)) throw std::invalid_argument("consensus_tol: must be > 0");
  system_setup s;
  s.n = cfg.n;
  s.mode = effective_mode(cfg);
  s.r = detail::generate_weights(cfg.weights, cfg.n, cfg.seed);
  s.kernel = edge_kernel::over(s.r, cfg.kernel);
  s.x0 = detail::generate_x0(cfg.x0, cfg.n, cfg.seed);
  s.rule3e = !cfg.kernel.identically_one();

  const auto& support = s.r.support();
  s.omega0_words.assign((support.size() + 63) / 64, 0);
  if (cfg.omega0.k == omega0_spec::kind::all_open) {
    for (std::size_t i = 0; i < support.size(); ++i)
      s.omega0_words[i >> 6] |= std::uint64_t{1} << (i & 63);
  } else if (cfg.omega0.k == omega0_spec::kind::sampled) {
    s.omega0_sampled = true;  // drawn in run_one under the trajectory stream
  } else {
    for (const auto& e : cfg.omega0.open) {
      auto it = std::lower_bound(support.begin(), support.end(), e);
      if (it == support.end() || *it != e)
        throw std::invalid_argument("omega0: channel outside the weight support");
      std::size_t i = static_cast<std::size_t>(it - support.begin());
      s.omega0_words[i >> 6] |= std::uint64_t{1} << (i & 63);
    }
  }

  agent_id max_support_id = 0;
  for (const auto& [u, v] : support) max_support_id = std::max({max_support_id, u, v});
  int default_window = s.mode == run_mode::sparse ? std::max(1, max_support_id) : cfg.n;
  s.window = cfg.truncation_window.value_or(default_window);
  if (s.window < max_support_id || s.window > cfg.n)
    throw std::invalid_argument("truncation_window: must cover the support and fit the system");

  for (agent_id v = 1; v <= cfg.n; ++v)
    if (!s.r.in_edges(v).empty()) s.mutable_agents.push_back(v);
  s.frozen_count = static_cast<std::size_t>(cfg.n) - s.mutable_agents.size();
  s.frozen_min = std::numeric_limits<double>::infinity();
  s.frozen_max = -std::numeric_limits<double>::infinity();
  {
    std::size_t mi = 0;
    for (agent_id v = 1; v <= cfg.n; ++v) {
      if (mi < s.mutable_agents.size() && s.mutable_agents[mi] == v) {
        ++mi;
        continue;
      }
      double val = s.x0[static_cast<std::size_t>(v - 1)];
      s.frozen_min = std::min(s.frozen_min, val);
      s.frozen_max = std::max(s.frozen_max, val);
      s.frozen_sum += val;
    }
  }

  if (cfg.record.gamma_per_step && cfg.n > 512 && s.frozen_count < 2)
    throw std::invalid_argument("gamma_per_step: system too large for per-step certificates");
  return s;
}

namespace detail {

inline bool word_bit(const std::vector<std::uint64_t>& words, std::size_t i) {
  return (words[i >> 6] >> (i & 63)) & 1u;
}

// Same arithmetic as step_one, with the openness test resolved through the
// support index.
inline double step_one_indexed(const belief_vector& x, const std::vector<std::uint64_t>& words,
                               const weight_matrix& r, agent_id v) {
  double num = x[static_cast<std::size_t>(v - 1)];
  double den = 1.0;
  for (const auto& e : r.in_edges(v)) {
    if (word_bit(words, e.si)) {
      num += e.r * x[static_cast<std::size_t>(e.u - 1)];
      den += e.r;
    }
  }
  return num / den;
}

struct observables {
  double w;
  double mean;
};

inline observables observe(const system_setup& s, const belief_vector& x) {
  double lo = s.frozen_min, hi = s.frozen_max, sum = s.frozen_sum;
  for (agent_id v : s.mutable_agents) {
    double val = x[static_cast<std::size_t>(v - 1)];
    if (val < lo) lo = val;
    if (val > hi) hi = val;
    sum += val;
  }
  if (s.mutable_agents.empty() && s.frozen_count == 0) return {0.0, 0.0};
  return {hi - lo, sum / static_cast<double>(s.n)};
}

// Sum of channel probabilities watched by the all-probs-one rule, and the
// ceiling it is compared against. Iteration order is row-major in both modes
// so that a sparse run over the full support reproduces the dense run bit for
// bit.
inline std::pair<double, double> stop_rule_sum(const system_setup& s, const belief_vector& x) {
  const confidence_function& p = s.kernel.p;
  double sum = 0.0;
  if (s.mode == run_mode::dense) {
    for (agent_id u = 1; u <= s.n; ++u)
      for (agent_id v = 1; v <= s.n; ++v) {
        if (u == v) continue;
        sum += p(std::fabs(x[static_cast<std::size_t>(v - 1)] - x[static_cast<std::size_t>(u - 1)]));
      }
    return {sum, static_cast<double>(off_diag_count(s.n))};
  }
  for (const auto& e : *s.kernel.support) sum += edge_open_probability(x, e, p);
  return {sum, static_cast<double>(s.kernel.support->size())};
}

inline double gamma_of_words(const system_setup& s, const std::vector<std::uint64_t>& words) {
  if (s.frozen_count >= 2) return 0.0;  // two fixed agents never share a speaker
  sparse_edge_config view(s.n, s.r.support_ptr());
  view.load_words(words);
  return contraction(view, s.r).gamma;
}

inline trajectory_record run_one(const system_setup& s, const run_config& cfg,
                                 std::size_t trajectory) {
  trajectory_record rec;
  rec.n = s.n;
  rec.run_id = trajectory;
  rec.support = s.r.support_ptr();
  rec.beliefs_window = cfg.record.beliefs ? s.window : 0;

  belief_vector x = s.x0;
  std::vector<std::uint64_t> words = s.omega0_words;
  std::vector<std::uint64_t> next_words;
  belief_vector scratch(s.mutable_agents.size());
  rng_stream base{cfg.seed, trajectory, 0};
  // steps >= 1 sample from the previous beliefs; step 0 is free for omega(0)
  if (s.omega0_sampled) sample_support_bits(x, s.kernel, base.with_step(0), words);

  for (std::size_t t = 0;; ++t) {
    observables obs = observe(s, x);
    rec.w.push_back(obs.w);
    rec.mean_x.push_back(obs.mean);
    if (cfg.record.beliefs)
      rec.beliefs.emplace_back(x.begin(), x.begin() + s.window);
    if (cfg.record.omegas) rec.omegas.push_back(words);
    if (cfg.record.gamma_per_step) rec.gamma_t.push_back(gamma_of_words(s, words));

    auto [sum_p, ceiling] = stop_rule_sum(s, x);
    if (s.rule3e && std::fabs(sum_p - ceiling) <= 1e-12) {
      rec.reason = stop_reason::all_probs_one;
      break;
    }
    if (obs.w < cfg.consensus_tol) {
      rec.reason = stop_reason::consensus_tol;
      break;
    }
    if (t == cfg.max_steps) {
      rec.reason = stop_reason::max_steps;
      break;
    }

    for (std::size_t i = 0; i < s.mutable_agents.size(); ++i)
      scratch[i] = step_one_indexed(x, words, s.r, s.mutable_agents[i]);
    sample_support_bits(x, s.kernel, base.with_step(t + 1), next_words);
    for (std::size_t i = 0; i < s.mutable_agents.size(); ++i)
      x[static_cast<std::size_t>(s.mutable_agents[i] - 1)] = scratch[i];
    words.swap(next_words);
  }
  rec.final_x = std::move(x);
  return rec;
}

}  // namespace detail

inline trajectory_record run(const run_config& cfg) {
  system_setup s = materialize(cfg);
  return detail::run_one(s, cfg, 0);
}

inline trajectory_record run_sparse(const run_config& cfg) {
  if (effective_mode(cfg) != run_mode::sparse)
    throw std::invalid_argument("run_sparse: config does not select sparse mode");
  return run(cfg);
}

struct ensemble_result {
  run_config config;
  std::vector<trajectory_record> runs;
};

// Trajectory k draws from streams keyed by k; the worker layout cannot change
// any result, only the wall time.
inline ensemble_result run_ensemble(const run_config& cfg, std::size_t trajectories,
                                    unsigned threads = 0) {
  system_setup s = materialize(cfg);
  ensemble_result res;
  res.config = cfg;
  res.runs.resize(trajectories);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<std::size_t>(trajectories, 1));
  if (threads <= 1) {
    for (std::size_t k = 0; k < trajectories; ++k) res.runs[k] = detail::run_one(s, cfg, k);
    return res;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned i = 0; i < threads; ++i)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t k = next.fetch_add(1);
        if (k >= trajectories) return;
        res.runs[k] = detail::run_one(s, cfg, k);
      }
    });
  for (auto& th : pool) th.join();
  return res;
}

// View of a run at double speed: state t is (X(2t), X(2t+1)), and the watched
// disagreement is the diameter at the even step.
struct pair_chain_record {
  trajectory_record base;
  std::vector<std::array<belief_vector, 2>> states;
  std::vector<double> wbar;  // diameter at steps 0, 2, 4, ...
};

inline pair_chain_record run_pair_chain(const run_config& cfg) {
  run_config with_beliefs = cfg;
  with_beliefs.record.beliefs = true;
  pair_chain_record pc;
  pc.base = run(with_beliefs);
  for (std::size_t t = 0; 2 * t < pc.base.w.size(); ++t) pc.wbar.push_back(pc.base.w[2 * t]);
  for (std::size_t t = 0; 2 * t + 1 < pc.base.beliefs.size(); ++t)
    pc.states.push_back({pc.base.beliefs[2 * t], pc.base.beliefs[2 * t + 1]});
  return pc;
}

// W(t) continued past the stop.  Runs halted by a consensus rule are padded
// with 0: W never increases along a trajectory, so the true continuation sits
// below the stop level, and the padded value must not out-live a decaying
// envelope.  Runs cut off by the step budget keep their final value -- they
// are genuinely unfinished.
inline double padded_w(const trajectory_record& rec, std::size_t t) {
  if (t < rec.w.size()) return rec.w[t];
  return rec.reason == stop_reason::max_steps ? rec.w.back() : 0.0;
}

struct ensemble_summary {
  std::size_t trajectories = 0;
  std::size_t horizon = 0;  // longest recorded step index
  std::vector<double> mean_w, se_w;
  std::array<std::size_t, 3> stop_counts{};  // indexed by stop_reason
  std::vector<std::pair<std::size_t, std::size_t>> stop_time_hist;  // (steps, count)
  std::array<std::size_t, 20> final_value_hist{};  // mean final belief over [0,1]
};

inline ensemble_summary summarize(const ensemble_result& ens) {
  ensemble_summary sum;
  sum.trajectories = ens.runs.size();
  for (const auto& rec : ens.runs) sum.horizon = std::max(sum.horizon, rec.steps());
  sum.mean_w.resize(sum.horizon + 1);
  sum.se_w.resize(sum.horizon + 1);
  std::size_t k = ens.runs.size();
  for (std::size_t t = 0; t <= sum.horizon; ++t) {
    double s = 0.0;
    for (const auto& rec : ens.runs) s += padded_w(rec, t);
    double mean = k ? s / static_cast<double>(k) : 0.0;
    sum.mean_w[t] = mean;
    if (k > 1) {
      // centered sum keeps constant samples at the rounding floor, unlike E[v^2]-mean^2
      double ss = 0.0;
      for (const auto& rec : ens.runs) {
        double d = padded_w(rec, t) - mean;
        ss += d * d;
      }
      sum.se_w[t] = std::sqrt(ss / static_cast<double>(k - 1) / static_cast<double>(k));
    }
  }
  std::map<std::size_t, std::size_t> hist;
  for (const auto& rec : ens.runs) {
    sum.stop_counts[static_cast<std::size_t>(rec.reason)]++;
    hist[rec.steps()]++;
    double v = mean_belief(rec.final_x);
    int bin = std::min(19, static_cast<int>(v * 20.0));
    sum.final_value_hist[static_cast<std::size_t>(std::max(0, bin))]++;
  }
  sum.stop_time_hist.assign(hist.begin(), hist.end());
  return sum;
}

}  // namespace clab
