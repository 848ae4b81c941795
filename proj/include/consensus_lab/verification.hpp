#pragma once

// Checks recorded runs against the inequalities the certificates promise.
//
// Pathwise, with omega(t) recorded:   W(t+1) <= (1 - gamma(omega(t))) W(t)
// and W never increases. Across an ensemble: the mean of W(t) decays at least
// geometrically with the expected contraction at the initial disagreement
// level; the mean of W never increases; the mean distance of omega(t) from
// the everything-open configuration stays below the mean of 1 - p(W(t-1));
// and the pair chain decays with the expected contraction at the initial
// beliefs, squared per chain step. Statistical checks get a 3-standard-error
// allowance, exact ones 1e-12.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "consensus_lab/diagnostics.hpp"
#include "consensus_lab/engine.hpp"

namespace clab {

struct trajectory_violation {
  std::size_t t = 0;  // step the inequality is about: compares W(t) and W(t+1)
  double w_before = 0.0;
  double w_after = 0.0;
  double gamma = 0.0;
  double allowed = 0.0;  // right-hand side including tolerance
  std::string kind;      // "contraction" or "monotone"
};

// Recomputes gamma(omega(t)) from the recorded openness bits and checks every
// step. Empty result = trajectory consistent with the certificates.
inline std::vector<trajectory_violation> verify_trajectory(const trajectory_record& rec,
                                                           const weight_matrix& r) {
  if (rec.omegas.size() != rec.w.size())
    throw std::invalid_argument("verify_trajectory: run was not recorded with omegas");
  constexpr double tol = 1e-12;
  std::vector<trajectory_violation> out;
  sparse_edge_config view(rec.n, rec.support);
  for (std::size_t t = 0; t + 1 < rec.w.size(); ++t) {
    view.load_words(rec.omegas[t]);
    double g = contraction(view, r).gamma;
    double contracted = (1.0 - g) * rec.w[t] + tol;
    if (rec.w[t + 1] > contracted)
      out.push_back({t, rec.w[t], rec.w[t + 1], g, contracted, "contraction"});
    if (rec.w[t + 1] > rec.w[t] + tol)
      out.push_back({t, rec.w[t], rec.w[t + 1], g, rec.w[t] + tol, "monotone"});
  }
  return out;
}

struct check_line {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // smallest slack seen; negative = violated
  std::string details;
  bool skipped = false;  // hypothesis not met; reported but not counted as failure
};

struct ensemble_verification {
  std::vector<check_line> checks;
  bool all_pass = true;

  // per-step tables behind the checks (index = t)
  std::vector<double> mean_w, se_w, bound_w;
  std::vector<double> pair_mean_w, pair_se_w, pair_bound_w;  // index = chain step
  std::vector<double> mean_dist, dist_allowance;             // index = t, defined from t = 1

  void add(check_line line) {
    all_pass = all_pass && line.pass;
    checks.push_back(std::move(line));
  }
};

namespace detail {

// Distance of the recorded configuration from everything-open: closed support
// channels over n^2. Exact when the support is the full off-diagonal set.
inline double recorded_distance(const trajectory_record& rec, std::size_t t) {
  if (t >= rec.omegas.size()) return 0.0;  // stopped run: consensus keeps everything open
  std::size_t open = 0;
  for (std::uint64_t w : rec.omegas[t]) open += static_cast<std::size_t>(__builtin_popcountll(w));
  std::size_t closed = rec.support->size() - open;
  return static_cast<double>(closed) / (static_cast<double>(rec.n) * static_cast<double>(rec.n));
}

struct mean_se {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
mean_se ensemble_stat(const std::vector<trajectory_record>& runs, F&& value) {
  double s = 0.0;
  std::size_t k = runs.size();
  for (const auto& rec : runs) s += value(rec);
  mean_se out;
  out.mean = s / static_cast<double>(k);
  if (k > 1) {
    // centered sum keeps constant samples at the rounding floor, unlike E[v^2]-mean^2
    double ss = 0.0;
    for (const auto& rec : runs) {
      double d = value(rec) - out.mean;
      ss += d * d;
    }
    out.se = std::sqrt(ss / static_cast<double>(k - 1) / static_cast<double>(k));
  }
  return out;
}

}  // namespace detail

// Ensemble-level checks. `horizon` limits how far the tables go (0 = longest
// recorded run). Needs omegas recorded for the edge-distance check.
inline ensemble_verification verify_ensemble(const ensemble_result& ens,
                                             const belief_vector& x0, const weight_matrix& r,
                                             const edge_kernel& kernel, std::size_t horizon = 0) {
  constexpr double tol = 1e-12;
  const auto& runs = ens.runs;
  if (runs.empty()) throw std::invalid_argument("verify_ensemble: no runs");
  ensemble_verification ver;

  std::size_t longest = 0;
  for (const auto& rec : runs) longest = std::max(longest, rec.steps());
  if (horizon == 0) horizon = longest;

  double w0 = diameter(x0);
  double gamma0_diam = expected_contraction_at_diameter(w0, r, kernel);
  bound_curve bound = geometric_bound(w0, gamma0_diam, horizon);
  ver.bound_w = bound.values;

  // mean decay against the diameter-level certificate
  {
    check_line line{"geometric-decay", true, std::numeric_limits<double>::infinity(), ""};
    for (std::size_t t = 0; t <= horizon; ++t) {
      auto st = detail::ensemble_stat(runs, [&](const auto& rec) { return padded_w(rec, t); });
      ver.mean_w.push_back(st.mean);
      ver.se_w.push_back(st.se);
      double slack = bound.values[t] + 3.0 * st.se + tol - st.mean;
      if (slack < line.margin) {
        line.margin = slack;
        line.details = "tightest at t=" + std::to_string(t);
      }
    }
    line.pass = line.margin >= 0.0;
    ver.add(std::move(line));
  }

  // mean W never increases
  {
    check_line line{"supermartingale", true, std::numeric_limits<double>::infinity(), ""};
    for (std::size_t t = 0; t < horizon; ++t) {
      auto st = detail::ensemble_stat(
          runs, [&](const auto& rec) { return padded_w(rec, t + 1) - padded_w(rec, t); });
      double slack = 3.0 * st.se + tol - st.mean;
      if (slack < line.margin) {
        line.margin = slack;
        line.details = "tightest at t=" + std::to_string(t);
      }
    }
    line.pass = line.margin >= 0.0;
    ver.add(std::move(line));
  }

  // closed-channel mass of omega(t) against 1 - p(W(t-1))
  {
    check_line line{"edge-distance", true, std::numeric_limits<double>::infinity(), ""};
    bool have_omegas = true;
    for (const auto& rec : runs)
      if (rec.omegas.size() != rec.w.size()) have_omegas = false;
    if (!have_omegas) {
      line.pass = false;
      line.margin = -std::numeric_limits<double>::infinity();
      line.details = "runs were not recorded with omegas";
    } else {
      ver.mean_dist.push_back(0.0);
      ver.dist_allowance.push_back(0.0);
      for (std::size_t t = 1; t <= horizon; ++t) {
        auto dist = detail::ensemble_stat(
            runs, [&](const auto& rec) { return detail::recorded_distance(rec, t); });
        auto allow = detail::ensemble_stat(runs, [&](const auto& rec) {
          return 1.0 - kernel.p(padded_w(rec, t - 1));
        });
        auto diff = detail::ensemble_stat(runs, [&](const auto& rec) {
          return detail::recorded_distance(rec, t) - (1.0 - kernel.p(padded_w(rec, t - 1)));
        });
        ver.mean_dist.push_back(dist.mean);
        ver.dist_allowance.push_back(allow.mean);
        double slack = 3.0 * diff.se + tol - diff.mean;
        if (slack < line.margin) {
          line.margin = slack;
          line.details = "tightest at t=" + std::to_string(t);
        }
      }
      line.pass = line.margin >= 0.0;
    }
    ver.add(std::move(line));
  }

  // pair chain against the initial-beliefs certificate
  {
    check_line line{"pair-geometric-decay", true, std::numeric_limits<double>::infinity(), ""};
    double gamma0 = expected_contraction(x0, r, kernel);
    std::size_t chain_horizon = horizon / 2;
    bound_curve pair_bound = pair_geometric_bound(w0, gamma0, chain_horizon);
    ver.pair_bound_w = pair_bound.values;
    for (std::size_t t = 0; t <= chain_horizon; ++t) {
      auto st = detail::ensemble_stat(runs, [&](const auto& rec) { return padded_w(rec, 2 * t); });
      ver.pair_mean_w.push_back(st.mean);
      ver.pair_se_w.push_back(st.se);
      double slack = pair_bound.values[t] + 3.0 * st.se + tol - st.mean;
      if (slack < line.margin) {
        line.margin = slack;
        line.details = "tightest at chain step " + std::to_string(t);
      }
    }
    line.pass = line.margin >= 0.0;
    ver.add(std::move(line));
  }

  return ver;
}

}  // namespace clab
