#pragma once

// Wire formats. One JSON schema for configs and reports, CSV or JSONL for
// trajectory tables. Every writer here has a matching reader, and numbers are
// printed with enough digits to round-trip exactly.

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "consensus_lab/engine.hpp"
#include "consensus_lab/verification.hpp"

namespace clab {

using json = nlohmann::ordered_json;  // field order is part of the format

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] inline void bad_field(const std::string& field, const std::string& what) {
  throw config_error(field + ": " + what);
}

inline const json& require_field(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end()) bad_field(field, "required field is missing");
  return *it;
}

inline double number_at(const json& doc, const std::string& field) {
  if (!doc.is_number()) bad_field(field, "expected a number");
  return doc.get<double>();
}

}  // namespace detail

// --- kernels -------------------------------------------------------------

inline json kernel_to_json(const confidence_function& p) {
  json params = json::object();
  switch (p.family) {
    case kernel_family::constant_one: break;
    case kernel_family::linear:
    case kernel_family::quadratic: params["beta"] = p.a; break;
    case kernel_family::exponential: params["lambda"] = p.a; break;
    case kernel_family::threshold:
      params["eps"] = p.a;
      params["delta"] = p.b;
      break;
  }
  return json{{"family", family_name(p.family)}, {"params", params}};
}

inline confidence_function kernel_from_json(const json& doc) {
  if (!doc.is_object()) detail::bad_field("kernel", "expected an object");
  auto fam_it = doc.find("family");
  if (fam_it == doc.end()) detail::bad_field("kernel.family", "required field is missing");
  const json& fam = *fam_it;
  if (!fam.is_string()) detail::bad_field("kernel.family", "expected a string");
  std::string name = fam.get<std::string>();
  json params = doc.value("params", json::object());
  auto param = [&](const char* key) {
    auto it = params.find(key);
    if (it == params.end())
      detail::bad_field(std::string("kernel.params.") + key, "required for family " + name);
    return detail::number_at(*it, std::string("kernel.params.") + key);
  };
  try {
    if (name == "constant-one") return confidence_function::constant_one();
    if (name == "linear") return confidence_function::linear(param("beta"));
    if (name == "quadratic") return confidence_function::quadratic(param("beta"));
    if (name == "exponential") return confidence_function::exponential(param("lambda"));
    if (name == "threshold") return confidence_function::threshold(param("eps"), param("delta"));
  } catch (const std::invalid_argument& e) {
    detail::bad_field("kernel.params", e.what());
  }
  detail::bad_field("kernel.family", "unknown family \"" + name + "\"");
}

// Compact command-line form: "linear:0.5", "threshold:0.5,0.1", "constant-one".
inline confidence_function kernel_from_string(const std::string& text) {
  std::string name = text;
  std::vector<double> args;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    name = text.substr(0, colon);
    std::stringstream rest(text.substr(colon + 1));
    std::string piece;
    while (std::getline(rest, piece, ',')) {
      try {
        args.push_back(std::stod(piece));
      } catch (const std::exception&) {
        detail::bad_field("kernel", "bad parameter \"" + piece + "\"");
      }
    }
  }
  auto arity = [&](std::size_t want) {
    if (args.size() != want)
      detail::bad_field("kernel", name + " takes " + std::to_string(want) + " parameter(s)");
  };
  try {
    if (name == "constant-one") { arity(0); return confidence_function::constant_one(); }
    if (name == "linear") { arity(1); return confidence_function::linear(args[0]); }
    if (name == "quadratic") { arity(1); return confidence_function::quadratic(args[0]); }
    if (name == "exponential") { arity(1); return confidence_function::exponential(args[0]); }
    if (name == "threshold") {
      arity(2);
      return confidence_function::threshold(args[0], args[1]);
    }
  } catch (const std::invalid_argument& e) {
    detail::bad_field("kernel", e.what());
  }
  detail::bad_field("kernel", "unknown family \"" + name + "\"");
}

// --- run configs ----------------------------------------------------------

inline run_config config_from_json(const json& doc) {
  if (!doc.is_object()) detail::bad_field("config", "expected a JSON object");
  run_config cfg;

  const json& n = detail::require_field(doc, "n");
  if (!n.is_number_integer() || n.get<long long>() < 1)
    detail::bad_field("n", "expected an integer >= 1");
  cfg.n = n.get<int>();

  cfg.kernel = kernel_from_json(detail::require_field(doc, "kernel"));

  if (auto it = doc.find("X0"); it != doc.end()) {
    const json& x0 = *it;
    if (x0.is_array()) {
      belief_vector values;
      for (const auto& v : x0) values.push_back(detail::number_at(v, "X0"));
      cfg.x0 = x0_spec::of(std::move(values));
    } else if (x0.is_object()) {
      const json& gen = detail::require_field(x0, "generator");
      std::string g = gen.is_string() ? gen.get<std::string>() : "";
      if (g == "equispaced") {
        cfg.x0.k = x0_spec::kind::equispaced;
      } else if (g == "uniform-random") {
        cfg.x0.k = x0_spec::kind::uniform_random;
      } else if (g == "two-cluster") {
        cfg.x0.k = x0_spec::kind::two_cluster;
        cfg.x0.low = x0.contains("low") ? detail::number_at(x0["low"], "X0.low") : 0.0;
        cfg.x0.high = x0.contains("high") ? detail::number_at(x0["high"], "X0.high") : 1.0;
        cfg.x0.split = x0.contains("split") ? detail::number_at(x0["split"], "X0.split") : 0.5;
      } else {
        detail::bad_field("X0.generator", "unknown generator");
      }
    } else {
      detail::bad_field("X0", "expected an array of beliefs or a generator object");
    }
  }

  if (auto it = doc.find("weights"); it != doc.end()) {
    const json& w = *it;
    auto read_entries = [&](const json& list) {
      if (!list.is_array()) detail::bad_field("weights.entries", "expected an array of [u,v,r]");
      cfg.weights.k = weight_spec::kind::entries;
      for (const auto& e : list) {
        if (!e.is_array() || e.size() != 3)
          detail::bad_field("weights.entries", "each entry must be [u,v,r]");
        cfg.weights.entries.emplace_back(e[0].get<agent_id>(), e[1].get<agent_id>(),
                                         e[2].get<double>());
      }
    };
    if (w.is_array()) {
      read_entries(w);
    } else if (w.is_object()) {
      std::string kind = detail::require_field(w, "kind").get<std::string>();
      if (kind == "dense-uniform") {
        cfg.weights.k = weight_spec::kind::dense_uniform;
      } else if (kind == "entries") {
        read_entries(detail::require_field(w, "entries"));
      } else if (kind == "random-sparse") {
        cfg.weights.k = weight_spec::kind::random_sparse;
        cfg.weights.density =
            w.contains("density") ? detail::number_at(w["density"], "weights.density") : 0.5;
      } else {
        detail::bad_field("weights.kind", "unknown kind \"" + kind + "\"");
      }
    } else {
      detail::bad_field("weights", "expected an entry list or a spec object");
    }
  }

  if (auto it = doc.find("omega0"); it != doc.end()) {
    const json& o = *it;
    if (o.is_string() && o.get<std::string>() == "all-open") {
      cfg.omega0.k = omega0_spec::kind::all_open;
    } else if (o.is_string() && o.get<std::string>() == "sampled") {
      cfg.omega0.k = omega0_spec::kind::sampled;
    } else if (o.is_array()) {
      cfg.omega0.k = omega0_spec::kind::open_list;
      for (const auto& e : o) {
        if (!e.is_array() || e.size() != 2)
          detail::bad_field("omega0", "each open channel must be [speaker, listener]");
        cfg.omega0.open.emplace_back(e[0].get<agent_id>(), e[1].get<agent_id>());
      }
    } else {
      detail::bad_field("omega0", "expected \"all-open\", \"sampled\", or an array of channels");
    }
  }

  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_integer()) detail::bad_field("seed", "expected an integer");
    cfg.seed = it->get<std::uint64_t>();
  }
  if (auto it = doc.find("max_steps"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 0)
      detail::bad_field("max_steps", "expected a nonnegative integer");
    cfg.max_steps = it->get<std::size_t>();
  }
  if (auto it = doc.find("consensus_tol"); it != doc.end()) {
    cfg.consensus_tol = detail::number_at(*it, "consensus_tol");
    if (!(cfg.consensus_tol > 0.0)) detail::bad_field("consensus_tol", "must be > 0");
  }
  if (auto it = doc.find("record"); it != doc.end()) {
    if (!it->is_object()) detail::bad_field("record", "expected an object of flags");
    cfg.record.beliefs = it->value("beliefs", false);
    cfg.record.omegas = it->value("omegas", false);
    cfg.record.gamma_per_step = it->value("gamma_per_step", false);
  }
  if (auto it = doc.find("mode"); it != doc.end()) {
    std::string m = it->is_string() ? it->get<std::string>() : "";
    if (m == "dense")
      cfg.mode = run_mode::dense;
    else if (m == "sparse")
      cfg.mode = run_mode::sparse;
    else
      detail::bad_field("mode", "expected \"dense\" or \"sparse\"");
  }
  if (auto it = doc.find("truncation_window"); it != doc.end()) {
    if (!it->is_number_integer()) detail::bad_field("truncation_window", "expected an integer");
    cfg.truncation_window = it->get<int>();
  }
  return cfg;
}

inline run_config parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(std::string("config: not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

inline run_config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open \"" + path + "\"");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Echo with every default filled in, suitable for re-parsing.
inline json config_to_json(const run_config& cfg) {
  json doc;
  doc["n"] = cfg.n;
  switch (cfg.x0.k) {
    case x0_spec::kind::values: doc["X0"] = cfg.x0.values; break;
    case x0_spec::kind::equispaced: doc["X0"] = {{"generator", "equispaced"}}; break;
    case x0_spec::kind::uniform_random: doc["X0"] = {{"generator", "uniform-random"}}; break;
    case x0_spec::kind::two_cluster:
      doc["X0"] = {{"generator", "two-cluster"},
                   {"low", cfg.x0.low},
                   {"high", cfg.x0.high},
                   {"split", cfg.x0.split}};
      break;
  }
  switch (cfg.weights.k) {
    case weight_spec::kind::dense_uniform: doc["weights"] = {{"kind", "dense-uniform"}}; break;
    case weight_spec::kind::entries: {
      json list = json::array();
      for (const auto& [u, v, r] : cfg.weights.entries) list.push_back({u, v, r});
      doc["weights"] = {{"kind", "entries"}, {"entries", list}};
      break;
    }
    case weight_spec::kind::random_sparse:
      doc["weights"] = {{"kind", "random-sparse"}, {"density", cfg.weights.density}};
      break;
  }
  doc["kernel"] = kernel_to_json(cfg.kernel);
  if (cfg.omega0.k == omega0_spec::kind::all_open) {
    doc["omega0"] = "all-open";
  } else if (cfg.omega0.k == omega0_spec::kind::sampled) {
    doc["omega0"] = "sampled";
  } else {
    json list = json::array();
    for (const auto& [u, v] : cfg.omega0.open) list.push_back({u, v});
    doc["omega0"] = list;
  }
  doc["seed"] = cfg.seed;
  doc["max_steps"] = cfg.max_steps;
  doc["consensus_tol"] = cfg.consensus_tol;
  doc["record"] = {{"beliefs", cfg.record.beliefs},
                   {"omegas", cfg.record.omegas},
                   {"gamma_per_step", cfg.record.gamma_per_step}};
  doc["mode"] = effective_mode(cfg) == run_mode::sparse ? "sparse" : "dense";
  if (cfg.truncation_window) doc["truncation_window"] = *cfg.truncation_window;
  return doc;
}

// --- trajectory tables ----------------------------------------------------

enum class table_format { csv, jsonl };

inline const char* trajectory_csv_header() { return "run_id,t,W,gamma_t,mean_X,stop_reason"; }

inline void write_trajectory_csv(std::ostream& out, const trajectory_record& rec,
                                 bool with_header = true) {
  if (with_header) out << trajectory_csv_header() << '\n';
  for (std::size_t t = 0; t < rec.w.size(); ++t) {
    out << rec.run_id << ',' << t << ',' << detail::fmt_double(rec.w[t]) << ',';
    if (t < rec.gamma_t.size()) out << detail::fmt_double(rec.gamma_t[t]);
    out << ',' << detail::fmt_double(rec.mean_x[t]) << ',';
    if (t + 1 == rec.w.size()) out << stop_reason_name(rec.reason);
    out << '\n';
  }
}

inline void write_trajectory_jsonl(std::ostream& out, const trajectory_record& rec) {
  for (std::size_t t = 0; t < rec.w.size(); ++t) {
    json line;
    line["run_id"] = rec.run_id;
    line["t"] = t;
    line["W"] = rec.w[t];
    if (t < rec.gamma_t.size()) line["gamma_t"] = rec.gamma_t[t];
    line["mean_X"] = rec.mean_x[t];
    if (t + 1 == rec.w.size()) line["stop_reason"] = stop_reason_name(rec.reason);
    out << line.dump() << '\n';
  }
}

inline void emit_trajectory(std::ostream& out, const trajectory_record& rec, table_format fmt,
                            bool with_header = true) {
  if (fmt == table_format::csv)
    write_trajectory_csv(out, rec, with_header);
  else
    write_trajectory_jsonl(out, rec);
}

// Parsed-back step row; what both readers reconstruct.
struct trajectory_row {
  std::size_t run_id = 0;
  std::size_t t = 0;
  double w = 0.0;
  std::optional<double> gamma;
  double mean_x = 0.0;
  std::string stop_reason;  // empty except on final rows

  bool operator==(const trajectory_row&) const = default;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace detail

inline std::vector<trajectory_row> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw config_error("trajectory csv: empty input");
  if (line != trajectory_csv_header())
    throw config_error("trajectory csv: unexpected header \"" + line + "\"");
  std::vector<trajectory_row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 6) throw config_error("trajectory csv: expected 6 columns");
    trajectory_row row;
    row.run_id = std::stoull(fields[0]);
    row.t = std::stoull(fields[1]);
    row.w = std::stod(fields[2]);
    if (!fields[3].empty()) row.gamma = std::stod(fields[3]);
    row.mean_x = std::stod(fields[4]);
    row.stop_reason = fields[5];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<trajectory_row> read_trajectory_jsonl(std::istream& in) {
  std::vector<trajectory_row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw config_error(std::string("trajectory jsonl: not valid JSON: ") + e.what());
    }
    trajectory_row row;
    row.run_id = doc.at("run_id").get<std::size_t>();
    row.t = doc.at("t").get<std::size_t>();
    row.w = doc.at("W").get<double>();
    if (doc.contains("gamma_t")) row.gamma = doc["gamma_t"].get<double>();
    row.mean_x = doc.at("mean_X").get<double>();
    if (doc.contains("stop_reason")) row.stop_reason = doc["stop_reason"].get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

// The rows a record emits, for round-trip comparisons.
inline std::vector<trajectory_row> rows_of(const trajectory_record& rec) {
  std::vector<trajectory_row> rows;
  for (std::size_t t = 0; t < rec.w.size(); ++t) {
    trajectory_row row;
    row.run_id = rec.run_id;
    row.t = t;
    row.w = rec.w[t];
    if (t < rec.gamma_t.size()) row.gamma = rec.gamma_t[t];
    row.mean_x = rec.mean_x[t];
    if (t + 1 == rec.w.size()) row.stop_reason = stop_reason_name(rec.reason);
    rows.push_back(std::move(row));
  }
  return rows;
}

// --- ensemble tables and reports -------------------------------------------

inline const char* ensemble_csv_header() { return "t,mean_W,se_W,bound_W"; }

// Mean disagreement against the certified curve; `bound` may be shorter than
// the mean table (or empty) when no exact certificate was computable.
inline void write_ensemble_csv(std::ostream& out, const std::vector<double>& mean_w,
                               const std::vector<double>& se_w,
                               const std::vector<double>& bound_w) {
  out << ensemble_csv_header() << '\n';
  for (std::size_t t = 0; t < mean_w.size(); ++t) {
    out << t << ',' << detail::fmt_double(mean_w[t]) << ',' << detail::fmt_double(se_w[t]) << ',';
    if (t < bound_w.size()) out << detail::fmt_double(bound_w[t]);
    out << '\n';
  }
}

inline void write_ensemble_jsonl(std::ostream& out, const std::vector<double>& mean_w,
                                 const std::vector<double>& se_w,
                                 const std::vector<double>& bound_w) {
  for (std::size_t t = 0; t < mean_w.size(); ++t) {
    json line;
    line["t"] = t;
    line["mean_W"] = mean_w[t];
    line["se_W"] = se_w[t];
    if (t < bound_w.size()) line["bound_W"] = bound_w[t];
    out << line.dump() << '\n';
  }
}

inline constexpr int report_schema_version = 1;

inline json check_to_json(const check_line& line) {
  json doc;
  doc["name"] = line.name;
  doc["status"] = line.skipped ? "skipped" : (line.pass ? "pass" : "fail");
  doc["margin"] = line.margin;
  doc["details"] = line.details;
  return doc;
}

// Full report: config echo, one entry per check, the tables behind them.
inline json report_to_json(const run_config& cfg, const std::vector<check_line>& checks,
                           const ensemble_verification* tables = nullptr) {
  json doc;
  doc["schema_version"] = report_schema_version;
  doc["config"] = config_to_json(cfg);
  json list = json::array();
  for (const auto& line : checks) list.push_back(check_to_json(line));
  doc["checks"] = list;
  if (tables) {
    json t;
    t["mean_W"] = tables->mean_w;
    t["se_W"] = tables->se_w;
    t["bound_W"] = tables->bound_w;
    t["pair_mean_W"] = tables->pair_mean_w;
    t["pair_se_W"] = tables->pair_se_w;
    t["pair_bound_W"] = tables->pair_bound_w;
    t["mean_dist"] = tables->mean_dist;
    t["dist_allowance"] = tables->dist_allowance;
    doc["tables"] = t;
  }
  return doc;
}

}  // namespace clab
