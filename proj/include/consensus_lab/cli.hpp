#pragma once

// The command-line surface: run / ensemble / verify / scan-pivot-lemma /
// gamma / bound. cli_dispatch owns the whole argv -> exit-code path so tests
// can drive it in-process with injected streams. Exit codes: 0 success or
// every check passed, 1 a check failed, 2 usage or configuration error.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "consensus_lab/checks.hpp"
#include "consensus_lab/io.hpp"

namespace clab {
namespace detail {

// --seed beats CONSENSUS_LAB_SEED beats the config file beats the default.
inline std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("CONSENSUS_LAB_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  for (const char* c = raw; *c != '\0'; ++c)
    if (!std::isdigit(static_cast<unsigned char>(*c)))
      throw config_error("CONSENSUS_LAB_SEED: not an unsigned integer: " + std::string(raw));
  errno = 0;
  unsigned long long v = std::strtoull(raw, nullptr, 10);
  if (errno == ERANGE) throw config_error("CONSENSUS_LAB_SEED: out of range: " + std::string(raw));
  return static_cast<std::uint64_t>(v);
}

struct output_target {
  std::ofstream file;
};

inline std::ostream& open_sink(output_target& target, const std::string& path,
                               std::ostream& fallback) {
  if (path.empty()) return fallback;
  target.file.open(path);
  if (!target.file) throw config_error("--out: cannot open " + path);
  return target.file;
}

inline std::vector<double> parse_double_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      throw config_error(field + ": not a number: '" + item + "'");
    }
    if (pos != item.size()) throw config_error(field + ": not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw config_error(field + ": empty list");
  return out;
}

inline omega0_spec parse_omega0(const std::string& text) {
  omega0_spec spec;
  if (text == "all-open") return spec;
  if (text == "sampled") {
    spec.k = omega0_spec::kind::sampled;
    return spec;
  }
  spec.k = omega0_spec::kind::open_list;
  if (text == "none") return spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    std::size_t upos = 0, vpos = 0;
    int u = 0, v = 0;
    try {
      if (colon == std::string::npos) throw std::invalid_argument("");
      u = std::stoi(item.substr(0, colon), &upos);
      v = std::stoi(item.substr(colon + 1), &vpos);
    } catch (const std::exception&) {
      throw config_error("--omega0: expected speaker:listener pairs, got '" + item + "'");
    }
    if (upos != colon || vpos != item.size() - colon - 1)
      throw config_error("--omega0: expected speaker:listener pairs, got '" + item + "'");
    spec.open.push_back({u, v});
  }
  return spec;
}

// Flags shared by `run` and `ensemble`; either a config file, quick flags, or
// a config file with quick-flag overrides on top.
struct run_flags {
  std::string config_path;
  int n = 0;
  std::string kernel;
  std::string x0;
  std::string omega0;
  std::int64_t max_steps = -1;
  double tol = -1.0;
  std::string mode;
  bool rec_beliefs = false, rec_omegas = false, rec_gamma = false;
};

inline void add_run_flags(CLI::App& sub, run_flags& f) {
  sub.add_option("--config", f.config_path, "JSON config file");
  sub.add_option("--n", f.n, "number of agents")->check(CLI::PositiveNumber);
  sub.add_option("--kernel", f.kernel,
                 "gap-to-probability rule, e.g. linear:0.5 or threshold:0.5,0");
  sub.add_option("--x0", f.x0,
                 "comma-separated beliefs, or equispaced / uniform-random / two-cluster");
  sub.add_option("--omega0", f.omega0,
                 "initial open channels: all-open, sampled, none, or u:v,u:v,...");
  sub.add_option("--max-steps", f.max_steps, "step budget");
  sub.add_option("--tol", f.tol, "stop once the disagreement drops below this");
  sub.add_option("--mode", f.mode, "dense or sparse")
      ->check(CLI::IsMember({"dense", "sparse"}));
  sub.add_flag("--record-beliefs", f.rec_beliefs, "record belief prefixes per step");
  sub.add_flag("--record-omegas", f.rec_omegas, "record channel patterns per step");
  sub.add_flag("--record-gamma", f.rec_gamma, "record the per-step contraction certificate");
}

inline run_config build_run_config(const run_flags& f, const std::optional<std::uint64_t>& seed) {
  run_config cfg;
  if (!f.config_path.empty()) cfg = load_config(f.config_path);
  if (f.n > 0) cfg.n = f.n;
  if (!f.kernel.empty()) cfg.kernel = kernel_from_string(f.kernel);
  if (!f.x0.empty()) {
    if (f.x0 == "equispaced")
      cfg.x0 = x0_spec{};
    else if (f.x0 == "uniform-random")
      cfg.x0.k = x0_spec::kind::uniform_random;
    else if (f.x0 == "two-cluster")
      cfg.x0.k = x0_spec::kind::two_cluster;
    else
      cfg.x0 = x0_spec::of(parse_double_list(f.x0, "--x0"));
  }
  if (!f.omega0.empty()) cfg.omega0 = parse_omega0(f.omega0);
  if (f.max_steps >= 0) cfg.max_steps = static_cast<std::size_t>(f.max_steps);
  if (f.tol >= 0.0) cfg.consensus_tol = f.tol;
  if (f.rec_beliefs) cfg.record.beliefs = true;
  if (f.rec_omegas) cfg.record.omegas = true;
  if (f.rec_gamma) cfg.record.gamma_per_step = true;
  if (!f.mode.empty()) cfg.mode = f.mode == "sparse" ? run_mode::sparse : run_mode::dense;
  if (seed) cfg.seed = *seed;
  if (cfg.n <= 0) throw config_error("n: required (--n or --config)");
  if (f.kernel.empty() && f.config_path.empty())
    throw config_error("kernel: required (--kernel or --config)");
  return cfg;
}

inline int do_run(const run_flags& f, const std::optional<std::uint64_t>& seed, table_format fmt,
                  std::ostream& sink) {
  run_config cfg = build_run_config(f, seed);
  trajectory_record rec = run(cfg);
  emit_trajectory(sink, rec, fmt);
  return 0;
}

inline int do_ensemble(const run_flags& f, const std::optional<std::uint64_t>& seed,
                       std::size_t trajectories, unsigned threads, std::size_t horizon,
                       table_format fmt, std::ostream& sink) {
  run_config cfg = build_run_config(f, seed);
  ensemble_result ens = run_ensemble(cfg, trajectories, threads);
  ensemble_summary sum = summarize(ens);
  if (horizon > 0 && horizon + 1 < sum.mean_w.size()) {
    sum.mean_w.resize(horizon + 1);
    sum.se_w.resize(horizon + 1);
  }
  std::vector<double> bound;
  system_setup setup = materialize(cfg);
  if (setup.r.support().size() <= enumeration_budget_bits) {
    double w0 = diameter(setup.x0);
    double g0 = expected_contraction_at_diameter(w0, setup.r, setup.kernel);
    bound = geometric_bound(w0, g0, sum.mean_w.size() - 1).values;
  }
  if (fmt == table_format::csv)
    write_ensemble_csv(sink, sum.mean_w, sum.se_w, bound);
  else
    write_ensemble_jsonl(sink, sum.mean_w, sum.se_w, bound);
  return 0;
}

inline int do_verify(const verify_options& opt, const std::string& report_path,
                     std::ostream& lines) {
  std::vector<check_line> checks = run_verification(opt);
  for (const auto& c : checks) {
    const char* status = c.skipped ? "skip" : (c.pass ? "pass" : "FAIL");
    char margin[64];
    std::snprintf(margin, sizeof margin, "%.3g", c.margin);
    lines << status << "  " << std::left << std::setw(30) << c.name << " margin " << margin;
    if (!c.details.empty()) lines << "  (" << c.details << ")";
    lines << '\n';
  }
  bool ok = all_checks_pass(checks);
  std::size_t failed = 0;
  for (const auto& c : checks) failed += !c.pass && !c.skipped ? 1u : 0u;
  if (ok)
    lines << "all " << checks.size() << " checks passed\n";
  else
    lines << failed << " of " << checks.size() << " checks failed\n";
  if (!report_path.empty()) {
    output_target target;
    std::ostream& rep = open_sink(target, report_path, lines);
    run_config echo;
    echo.n = opt.n;
    echo.kernel = opt.kernel;
    echo.seed = opt.seed;
    rep << report_to_json(echo, checks).dump(2) << '\n';
  }
  return ok ? 0 : 1;
}

inline int do_scan(int n, bool random_weights, std::uint64_t seed, std::ostream& out) {
  weight_matrix r = random_weights ? random_dense_weights(n, rng_stream{seed, 0, 0}, 0)
                                   : weight_matrix::dense_uniform(n);
  pivot_scan_result res = pivot_lemma_scan(n, r);
  out << "configs scanned: " << res.configs << '\n';
  out << "weights: " << (random_weights ? "random positive" : "uniform") << '\n';
  out << "pivot set nonempty but gamma = 0: " << res.pivot_without_contraction.size() << '\n';
  out << "gamma > 0 without a pivot: " << res.contraction_without_pivot.size() << '\n';
  std::size_t shown = 0;
  for (const auto& e : res.contraction_without_pivot) {
    if (shown == 16) {
      out << "  ...\n";
      break;
    }
    out << "  mask " << e.mask << "  gamma " << fmt_double(e.gamma) << '\n';
    ++shown;
  }
  out << "shared-speaker rule matches gamma > 0: "
      << (res.common_in_neighbor_matches ? "yes" : "no") << '\n';
  return res.pivot_without_contraction.empty() && res.common_in_neighbor_matches ? 0 : 1;
}

inline int do_gamma(const std::string& bits, int n_opt, std::ostream& out) {
  for (char c : bits)
    if (c != '0' && c != '1') throw config_error("--omega: bits must be 0 or 1");
  std::size_t m = bits.size();
  int n = n_opt;
  if (n == 0) {
    n = static_cast<int>(std::lround((1.0 + std::sqrt(1.0 + 4.0 * static_cast<double>(m))) / 2.0));
    if (n < 2 || off_diag_count(n) != m)
      throw config_error("--omega: length must be n(n-1) for some n >= 2");
  } else if (off_diag_count(n) != m) {
    throw config_error("--omega: expected " + std::to_string(off_diag_count(n)) +
                       " bits for n = " + std::to_string(n));
  }
  edge_config omega(n);
  std::size_t i = 0;
  for (agent_id u = 1; u <= n; ++u)
    for (agent_id v = 1; v <= n; ++v) {
      if (u == v) continue;
      if (bits[i] == '1') omega.set_open(u, v, true);
      ++i;
    }
  weight_matrix r = weight_matrix::dense_uniform(n);
  contraction_report rep = contraction(omega, r);
  out << "n " << n << '\n';
  out << "gamma " << fmt_double(rep.gamma) << '\n';
  out << "argmin pair " << rep.argmin_pair.first << ' ' << rep.argmin_pair.second << '\n';
  out << "pivots";
  if (rep.pivot_set.empty()) out << " none";
  for (agent_id p : rep.pivot_set) out << ' ' << p;
  out << '\n';
  if (auto floor = pivot_lower_bound(transition_from(omega, r), rep))
    out << "pivot floor " << fmt_double(*floor) << '\n';
  else
    out << "pivot floor none\n";
  return 0;
}

inline int do_bound(double w0, double gamma0, std::size_t horizon, bool pair, table_format fmt,
                    std::ostream& out) {
  bound_curve curve =
      pair ? pair_geometric_bound(w0, gamma0, horizon) : geometric_bound(w0, gamma0, horizon);
  if (fmt == table_format::csv) {
    out << "t,bound\n";
    for (std::size_t t = 0; t < curve.values.size(); ++t)
      out << t << ',' << fmt_double(curve.values[t]) << '\n';
  } else {
    for (std::size_t t = 0; t < curve.values.size(); ++t) {
      json line;
      line["t"] = t;
      line["bound"] = curve.values[t];
      out << line.dump() << '\n';
    }
  }
  return 0;
}

}  // namespace detail

inline int cli_dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"simulator and certificate checker for randomized gap-gated averaging"};
  app.name("consensus-lab");
  app.require_subcommand(0, 1);  // unknown names then fail as unexpected arguments

  std::uint64_t seed_val = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_val, "master seed (overrides CONSENSUS_LAB_SEED)");
  std::string out_path;
  app.add_option("--out", out_path, "write results to this file instead of stdout");
  std::string format = "csv";
  app.add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "jsonl"}));

  detail::run_flags run_f;
  CLI::App* run_cmd = app.add_subcommand("run", "simulate one trajectory");
  run_cmd->fallthrough();
  detail::add_run_flags(*run_cmd, run_f);

  detail::run_flags ens_f;
  std::size_t trajectories = 0;
  unsigned threads = 0;
  std::size_t horizon = 0;
  CLI::App* ens_cmd =
      app.add_subcommand("ensemble", "simulate many trajectories; emit the mean-disagreement table");
  ens_cmd->fallthrough();
  detail::add_run_flags(*ens_cmd, ens_f);
  ens_cmd->add_option("--trajectories", trajectories, "number of trajectories")->required();
  ens_cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
  ens_cmd->add_option("--horizon", horizon, "truncate the table after this step");

  verify_options vopt;
  std::string verify_kernel = "linear:0.5";
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the full property suite");
  verify_cmd->fallthrough();
  verify_cmd->add_option("--n", vopt.n, "agents in the trajectory checks")
      ->check(CLI::Range(2, 5));
  verify_cmd->add_option("--kernel", verify_kernel, "gap-to-probability rule");
  verify_cmd->add_option("--trajectories", vopt.trajectories, "ensemble size for the decay checks");
  verify_cmd->add_option("--threads", vopt.threads, "worker threads (0 = hardware)");
  verify_cmd->add_flag("--inject-violation", vopt.inject_violation,
                       "append a deliberately failing check (test hook)");

  int scan_n = 3;
  bool scan_random = false;
  CLI::App* scan_cmd = app.add_subcommand(
      "scan-pivot-lemma", "enumerate every openness pattern and cross-check the certificates");
  scan_cmd->fallthrough();
  scan_cmd->add_option("--n", scan_n, "agents")->check(CLI::Range(2, 5));
  scan_cmd->add_flag("--random-weights", scan_random,
                     "use random positive weights instead of uniform");

  std::string gamma_bits;
  int gamma_n = 0;
  CLI::App* gamma_cmd =
      app.add_subcommand("gamma", "contraction certificate for one openness pattern");
  gamma_cmd->fallthrough();
  gamma_cmd
      ->add_option("--omega", gamma_bits,
                   "row-major off-diagonal openness bits; the first bit is channel 1->2")
      ->required();
  gamma_cmd->add_option("--n", gamma_n, "agents (inferred from the bit count when omitted)");

  double b_w0 = 0.0, b_gamma0 = 0.0;
  std::size_t b_horizon = 0;
  bool b_pair = false;
  CLI::App* bound_cmd = app.add_subcommand("bound", "certified disagreement decay curve");
  bound_cmd->fallthrough();
  bound_cmd->add_option("--w0", b_w0, "initial disagreement")->required();
  bound_cmd->add_option("--gamma0", b_gamma0, "contraction rate in [0,1]")->required();
  bound_cmd->add_option("--horizon", b_horizon, "last step")->required();
  bound_cmd->add_flag("--pair", b_pair, "square the rate (two elementary steps per chain step)");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    std::optional<std::uint64_t> seed;
    if (seed_opt->count() > 0)
      seed = seed_val;
    else if (auto env = detail::env_seed())
      seed = *env;
    table_format fmt = format == "jsonl" ? table_format::jsonl : table_format::csv;

    detail::output_target target;
    if (run_cmd->parsed())
      return detail::do_run(run_f, seed, fmt, detail::open_sink(target, out_path, out));
    if (ens_cmd->parsed())
      return detail::do_ensemble(ens_f, seed, trajectories, threads, horizon, fmt,
                                 detail::open_sink(target, out_path, out));
    if (verify_cmd->parsed()) {
      vopt.kernel = kernel_from_string(verify_kernel);
      if (seed) vopt.seed = *seed;
      return detail::do_verify(vopt, out_path, out);
    }
    if (scan_cmd->parsed())
      return detail::do_scan(scan_n, scan_random, seed.value_or(1),
                             detail::open_sink(target, out_path, out));
    if (gamma_cmd->parsed())
      return detail::do_gamma(gamma_bits, gamma_n, detail::open_sink(target, out_path, out));
    if (bound_cmd->parsed())
      return detail::do_bound(b_w0, b_gamma0, b_horizon, b_pair, fmt,
                              detail::open_sink(target, out_path, out));
  } catch (const config_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << app.help();
  return 2;
}

}  // namespace clab
