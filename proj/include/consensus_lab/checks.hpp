#pragma once

// The property suite behind `verify`: every invariant the noise and
// diagnostics layers promise, exercised at desk scale. Exact inequalities
// carry a 1e-12 slack, statistical ones 3-4 standard errors. Each check
// reports its tightest margin; a negative margin is a failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "consensus_lab/diagnostics.hpp"
#include "consensus_lab/engine.hpp"
#include "consensus_lab/noise.hpp"
#include "consensus_lab/verification.hpp"

namespace clab {

struct verify_options {
  int n = 3;  // system size for the ensemble and trajectory parts (2..5)
  confidence_function kernel = confidence_function::linear(0.5);
  std::uint64_t seed = 1;
  std::size_t trajectories = 2000;
  unsigned threads = 0;
  bool inject_violation = false;  // test hook: append one failing check
};

namespace detail {

struct slack_tracker {
  double margin = std::numeric_limits<double>::infinity();
  std::string details;

  void note(double slack, std::string where) {
    if (slack < margin) {
      margin = slack;
      details = std::move(where);
    }
  }
  check_line line(std::string name) const { return {std::move(name), margin >= 0.0, margin, details}; }
};

inline double mask_probability(std::uint64_t mask, const std::vector<double>& q) {
  double p = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) p *= (mask >> i) & 1u ? q[i] : 1.0 - q[i];
  return p;
}

inline double up_set_mass(const std::vector<std::uint64_t>& members,
                          const std::vector<double>& prob) {
  double s = 0.0;
  for (std::uint64_t m : members) s += prob[m];
  return s;
}

// Every upward-closed family of openness patterns over m channels. Only
// feasible for m = 2 (16 candidate families); larger lattices are sampled.
inline std::vector<std::vector<std::uint64_t>> all_up_sets(std::size_t m) {
  std::uint64_t configs = std::uint64_t{1} << m;
  std::vector<std::vector<std::uint64_t>> out;
  for (std::uint64_t fam = 0; fam < (std::uint64_t{1} << configs); ++fam) {
    bool upward = true;
    for (std::uint64_t a = 0; a < configs && upward; ++a) {
      if (!((fam >> a) & 1u)) continue;
      std::uint64_t rest = (configs - 1) & ~a;
      for (std::uint64_t s = rest;; s = (s - 1) & rest) {
        if (!((fam >> (a | s)) & 1u)) {
          upward = false;
          break;
        }
        if (s == 0) break;
      }
    }
    if (!upward) continue;
    std::vector<std::uint64_t> members;
    for (std::uint64_t a = 0; a < configs; ++a)
      if ((fam >> a) & 1u) members.push_back(a);
    out.push_back(std::move(members));
  }
  return out;
}

// Union of up-cones over a few random generator patterns.
inline std::vector<std::uint64_t> random_up_set(std::size_t m, const rng_stream& rng,
                                                std::uint64_t index) {
  std::uint64_t full = (std::uint64_t{1} << m) - 1;
  int k = 1 + static_cast<int>(rng.uniform(rng_tag::sampling, 8 * index) * 3.0);
  std::vector<std::uint64_t> gens;
  for (int j = 0; j < k; ++j) {
    double u = rng.uniform(rng_tag::sampling, 8 * index + 1 + static_cast<std::uint64_t>(j));
    gens.push_back(static_cast<std::uint64_t>(u * std::ldexp(1.0, static_cast<int>(m))) & full);
  }
  std::vector<std::uint64_t> members;
  for (std::uint64_t mask = 0; mask <= full; ++mask)
    for (std::uint64_t g : gens)
      if ((mask & g) == g) {
        members.push_back(mask);
        break;
      }
  return members;
}

inline belief_vector random_beliefs(int n, const rng_stream& rng, std::uint64_t index) {
  belief_vector x(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v)
    x[static_cast<std::size_t>(v)] =
        rng.uniform(rng_tag::sampling, 64 * index + static_cast<std::uint64_t>(v));
  return x;
}

inline std::vector<confidence_function> check_families(const confidence_function& extra) {
  return {confidence_function::constant_one(), confidence_function::linear(1.0),
          confidence_function::quadratic(0.8), confidence_function::exponential(2.0),
          confidence_function::threshold(0.5, 0.25), extra};
}

inline weight_matrix random_dense_weights(int n, const rng_stream& rng, std::uint64_t index) {
  std::vector<std::tuple<agent_id, agent_id, double>> entries;
  for (agent_id u = 1; u <= n; ++u)
    for (agent_id v = 1; v <= n; ++v) {
      if (u == v) continue;
      double r = 0.05 + 0.95 * rng.uniform(rng_tag::sampling,
                                           64 * index + off_diag_index(n, u, v));
      entries.emplace_back(u, v, r);
    }
  return weight_matrix::from_entries(n, entries);
}

}  // namespace detail

inline std::vector<check_line> run_verification(const verify_options& opt) {
  constexpr double tol = 1e-12;
  if (opt.n < 2 || static_cast<std::size_t>(off_diag_count(opt.n)) > enumeration_budget_bits)
    throw std::invalid_argument("verify: n must lie in 2..5 so certificates stay enumerable");
  std::vector<check_line> checks;
  const auto families = detail::check_families(opt.kernel);

  // gap-to-probability rules: p(0) = 1, values in [0,1], nonincreasing
  {
    detail::slack_tracker s;
    for (const auto& p : families) {
      s.note(1e-15 - std::fabs(p(0.0) - 1.0), std::string(family_name(p.family)) + " at 0");
      double prev = p(0.0);
      for (int i = 1; i <= 1000; ++i) {
        double x = static_cast<double>(i) / 1000.0;
        double v = p(x);
        std::string where = std::string(family_name(p.family)) + " at x=" +
                            std::to_string(x);
        s.note(v, where);
        s.note(1.0 - v, where);
        s.note(prev - v + 1e-15, where);
        prev = v;
      }
    }
    checks.push_back(s.line("kernel-shape"));
  }

  // the channel measure is an honest probability distribution
  {
    detail::slack_tracker s;
    for (int n : {2, 3, 4}) {
      for (const auto& p : {opt.kernel, confidence_function::exponential(1.3)}) {
        weight_matrix r = weight_matrix::dense_uniform(n);
        const auto& support = r.support();
        for (std::uint64_t i = 0; i < 5; ++i) {
          belief_vector x = detail::random_beliefs(n, rng_stream{opt.seed, 10, 0}, i);
          std::vector<double> q(support.size());
          for (std::size_t e = 0; e < support.size(); ++e)
            q[e] = edge_open_probability(x, support[e], p);
          double total = 0.0;
          for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << support.size()); ++mask)
            total += detail::mask_probability(mask, q);
          s.note(tol - std::fabs(total - 1.0),
                 std::string(family_name(p.family)) + " n=" + std::to_string(n));
        }
      }
    }
    checks.push_back(s.line("product-measure-total-mass"));
  }

  // channel-vs-diameter cross term: p(d)(1-p(w)) >= p(w)(1-p(d)) since d <= w
  {
    detail::slack_tracker s;
    rng_stream rng{opt.seed, 11, 0};
    for (std::uint64_t i = 0; i < 10000; ++i) {
      int n = 2 + static_cast<int>(i % 7);
      belief_vector x = detail::random_beliefs(n, rng, i);
      const auto& p = families[i % families.size()];
      agent_id u = 1 + static_cast<int>(rng.uniform(rng_tag::sampling, 64 * i + 62) * n);
      agent_id v = 1 + static_cast<int>(rng.uniform(rng_tag::sampling, 64 * i + 63) * n);
      if (u == v) v = v % n + 1;
      double d = std::fabs(x[static_cast<std::size_t>(v - 1)] - x[static_cast<std::size_t>(u - 1)]);
      double w = diameter(x);
      double lhs = p(d) * (1.0 - p(w)) - p(w) * (1.0 - p(d));
      s.note(lhs + tol, std::string(family_name(p.family)) + " draw " + std::to_string(i));
    }
    checks.push_back(s.line("holley-cross-term"));
  }

  // the belief-level measure dominates the diameter-level measure on up-sets
  {
    detail::slack_tracker s;
    rng_stream rng{opt.seed, 12, 0};
    auto up2 = detail::all_up_sets(2);
    std::vector<std::vector<std::uint64_t>> up3;
    for (std::uint64_t i = 0; i < 100; ++i) up3.push_back(detail::random_up_set(6, rng, i));

    for (const auto& p : families) {
      for (int n : {2, 3}) {
        weight_matrix r = weight_matrix::dense_uniform(n);
        const auto& support = r.support();
        const auto& up_sets = n == 2 ? up2 : up3;
        for (std::uint64_t i = 0; i < 100; ++i) {
          belief_vector x =
              detail::random_beliefs(n, rng, 1000 + i + (n == 3 ? 100 : 0));
          double w = diameter(x);
          std::vector<double> qx(support.size()), qw(support.size(), p(w));
          for (std::size_t e = 0; e < support.size(); ++e)
            qx[e] = edge_open_probability(x, support[e], p);
          std::vector<double> px(std::size_t{1} << support.size());
          std::vector<double> pw(px.size());
          for (std::uint64_t mask = 0; mask < px.size(); ++mask) {
            px[mask] = detail::mask_probability(mask, qx);
            pw[mask] = detail::mask_probability(mask, qw);
          }
          for (std::size_t ui = 0; ui < up_sets.size(); ++ui) {
            double ex = detail::up_set_mass(up_sets[ui], px);
            double ew = detail::up_set_mass(up_sets[ui], pw);
            s.note(ex - ew + tol, std::string(family_name(p.family)) + " n=" +
                                      std::to_string(n) + " up-set " + std::to_string(ui));
          }
        }
      }
    }
    checks.push_back(s.line("domination-in-beliefs"));
  }

  // along a run the diameter shrinks, so the measure climbs in domination
  {
    detail::slack_tracker s;
    run_config cfg;
    cfg.n = opt.n;
    cfg.kernel = opt.kernel;
    cfg.omega0.k = omega0_spec::kind::sampled;
    cfg.seed = opt.seed;
    cfg.max_steps = 100;
    trajectory_record rec = run(cfg);

    rng_stream rng{opt.seed, 13, 0};
    std::vector<std::vector<std::uint64_t>> up_sets;
    for (std::uint64_t i = 0; i < 50; ++i) up_sets.push_back(detail::random_up_set(6, rng, i));
    std::vector<double> qa(6), qb(6);
    for (std::size_t t = 0; t + 1 < rec.w.size(); ++t) {
      double w_late = std::min(rec.w[t + 1], rec.w[t]);
      double w_early = std::max(rec.w[t + 1], rec.w[t]);
      for (const auto& p : families) {
        std::fill(qa.begin(), qa.end(), p(w_late));
        std::fill(qb.begin(), qb.end(), p(w_early));
        std::vector<double> pa(64), pb(64);
        for (std::uint64_t mask = 0; mask < 64; ++mask) {
          pa[mask] = detail::mask_probability(mask, qa);
          pb[mask] = detail::mask_probability(mask, qb);
        }
        for (std::size_t ui = 0; ui < up_sets.size(); ++ui) {
          double late = detail::up_set_mass(up_sets[ui], pa);
          double early = detail::up_set_mass(up_sets[ui], pb);
          s.note(late - early + tol, std::string(family_name(p.family)) + " t=" +
                                         std::to_string(t) + " up-set " + std::to_string(ui));
        }
      }
    }
    checks.push_back(s.line("domination-in-time"));
  }

  // contraction certificates stay in [0,1]; identical rows contract fully
  {
    detail::slack_tracker s;
    rng_stream rng{opt.seed, 14, 0};
    for (std::uint64_t i = 0; i < 500; ++i) {
      int n = 2 + static_cast<int>(i % 4);
      weight_matrix r = detail::random_dense_weights(n, rng, i);
      std::size_t m = off_diag_count(n);
      std::uint64_t mask = static_cast<std::uint64_t>(
          rng.uniform(rng_tag::sampling, 64 * i + 63) * std::ldexp(1.0, static_cast<int>(m)));
      double g = contraction(edge_config::from_mask(n, mask), r).gamma;
      s.note(g + tol, "random config " + std::to_string(i));
      s.note(1.0 - g + tol, "random config " + std::to_string(i));
    }
    for (int n = 2; n <= 5; ++n) {
      double g = contraction(edge_config::all_open(n), weight_matrix::dense_uniform(n)).gamma;
      s.note(tol - std::fabs(g - 1.0), "all-open uniform n=" + std::to_string(n));
    }
    checks.push_back(s.line("contraction-range"));
  }

  // gamma > 0 exactly when every pair shares an effective speaker
  {
    detail::slack_tracker s;
    rng_stream rng{opt.seed, 15, 0};
    for (int n : {2, 3, 4}) {
      pivot_scan_result res = pivot_lemma_scan(n, weight_matrix::dense_uniform(n));
      s.note(res.common_in_neighbor_matches ? 0.0 : -1.0, "uniform n=" + std::to_string(n));
    }
    pivot_scan_result rnd = pivot_lemma_scan(3, detail::random_dense_weights(3, rng, 0));
    s.note(rnd.common_in_neighbor_matches ? 0.0 : -1.0, "random weights n=3");
    checks.push_back(s.line("positivity-characterization"));
  }

  // a pivot certifies gamma > 0, and its floor never exceeds gamma
  {
    detail::slack_tracker s;
    rng_stream rng{opt.seed, 16, 0};
    for (int n : {2, 3, 4}) {
      pivot_scan_result res = pivot_lemma_scan(n, weight_matrix::dense_uniform(n));
      s.note(res.pivot_without_contraction.empty() ? 0.0 : -1.0,
             "uniform n=" + std::to_string(n));
    }
    pivot_scan_result rnd = pivot_lemma_scan(3, detail::random_dense_weights(3, rng, 0));
    s.note(rnd.pivot_without_contraction.empty() ? 0.0 : -1.0, "random weights n=3");
    for (std::uint64_t i = 0; i < 300; ++i) {
      int n = 2 + static_cast<int>(i % 3);
      weight_matrix r = detail::random_dense_weights(n, rng, 1 + i);
      std::uint64_t mask = static_cast<std::uint64_t>(
          rng.uniform(rng_tag::sampling, 64 * i + 63) *
          std::ldexp(1.0, static_cast<int>(off_diag_count(n))));
      edge_config omega = edge_config::from_mask(n, mask);
      contraction_report rep = contraction(omega, r);
      if (auto floor = pivot_lower_bound(transition_from(omega, r), rep))
        s.note(rep.gamma + tol - *floor, "floor at config " + std::to_string(i));
    }
    checks.push_back(s.line("pivot-implies-contraction"));
  }

  // expected contraction at the beliefs dominates it at the diameter
  {
    detail::slack_tracker s;
    rng_stream rng{opt.seed, 17, 0};
    weight_matrix r = weight_matrix::dense_uniform(3);
    std::uint64_t i = 0;
    for (const auto& p : families) {
      edge_kernel k = edge_kernel::over(r, p);
      for (int rep = 0; rep < 200; ++rep, ++i) {
        belief_vector x = detail::random_beliefs(3, rng, i);
        double at_x = expected_contraction(x, r, k);
        double at_w = expected_contraction_at_diameter(diameter(x), r, k);
        s.note(at_x - at_w + tol, std::string(family_name(p.family)) + " draw " +
                                      std::to_string(rep));
      }
    }
    checks.push_back(s.line("expected-contraction-monotone"));
  }

  // the Monte Carlo estimator tracks exhaustive enumeration
  {
    weight_matrix r = weight_matrix::dense_uniform(3);
    edge_kernel k = edge_kernel::over(r, opt.kernel);
    rng_stream rng{opt.seed, 18, 0};
    int hits = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      belief_vector x = detail::random_beliefs(3, rng, rep);
      double exact = expected_contraction(x, r, k);
      mc_estimate est = expected_contraction_mc(x, r, k, 10000, rng_stream{opt.seed, 1000 + rep, 0});
      if (std::fabs(est.mean - exact) <= 4.0 * est.se + tol) ++hits;
    }
    checks.push_back({"mc-consistency", hits >= 99, static_cast<double>(hits - 99),
                      std::to_string(hits) + "/100 estimates within 4 standard errors"});
  }

  // ensemble-level decay, monotonicity, channel-distance and pair-chain bounds
  {
    run_config cfg;
    cfg.n = opt.n;
    cfg.kernel = opt.kernel;
    cfg.omega0.k = omega0_spec::kind::sampled;  // start inside the modeled noise law
    cfg.seed = opt.seed;
    cfg.max_steps = 500;
    cfg.record.omegas = true;
    system_setup setup = materialize(cfg);
    double gamma0 = expected_contraction_at_diameter(diameter(setup.x0), setup.r, setup.kernel);
    if (gamma0 <= 0.0) {
      check_line note{"decay-hypothesis", true, 0.0,
                      "expected contraction at the initial disagreement is 0; "
                      "consensus is not guaranteed for this configuration"};
      note.skipped = true;
      checks.push_back(std::move(note));
    }
    ensemble_result ens = run_ensemble(cfg, std::max<std::size_t>(opt.trajectories, 2),
                                       opt.threads);
    ensemble_verification ver = verify_ensemble(ens, setup.x0, setup.r, setup.kernel, 20);
    for (auto& line : ver.checks) checks.push_back(std::move(line));
  }

  if (opt.inject_violation)
    checks.push_back({"injected-violation", false, -1.0, "test hook: deliberately failing"});
  return checks;
}

inline bool all_checks_pass(const std::vector<check_line>& checks) {
  return std::all_of(checks.begin(), checks.end(),
                     [](const check_line& c) { return c.pass || c.skipped; });
}

}  // namespace clab
