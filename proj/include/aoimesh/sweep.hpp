#ifndef AOIMESH_SWEEP_HPP
#define AOIMESH_SWEEP_HPP

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aoimesh/config.hpp"
#include "aoimesh/meanfield.hpp"
#include "aoimesh/population.hpp"
#include "aoimesh/sim.hpp"

namespace aoimesh {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { simulate, meanfield, analyze, sweep };
enum class SweepAxis { none, xi, p, lambda };

struct ExperimentSpec {
  NetworkConfig base;
  RunMode mode = RunMode::analyze;
  SweepAxis sweep_axis = SweepAxis::none;
  std::vector<double> sweep_values;
  int topology_count = 20;
  std::string output_path;
  bool want_sim = false;
  bool want_analytic = false;
  bool want_meanfield = false;
  bool columns_overridden = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, int line) {
  std::size_t pos = 0;
  double x;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": malformed number '" +
                      v + "'");
  }
  if (pos != v.size())
    throw ConfigError("line " + std::to_string(line) +
                      ": trailing characters in number '" + v + "'");
  return x;
}

inline long long parse_int(const std::string& v, int line) {
  std::size_t pos = 0;
  long long x;
  try {
    x = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": malformed integer '" +
                      v + "'");
  }
  if (pos != v.size())
    throw ConfigError("line " + std::to_string(line) +
                      ": trailing characters in integer '" + v + "'");
  return x;
}

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

} // namespace detail

/// Sets the run mode (possibly overriding the one in the file, e.g. from
/// the command line), re-derives default result columns unless the file
/// picked them explicitly, and enforces mode-specific requirements.
inline void set_mode(ExperimentSpec& spec, RunMode m) {
  spec.mode = m;
  if (m == RunMode::sweep) {
    if (spec.sweep_axis == SweepAxis::none || spec.sweep_values.empty())
      throw ConfigError("sweep mode requires sweep_axis and sweep_values");
  }
  if (spec.sweep_axis != SweepAxis::none) {
    for (double v : spec.sweep_values) {
      bool ok = spec.sweep_axis == SweepAxis::lambda ? v >= 0.0
                                                     : (v > 0.0 && v <= 1.0);
      if (!ok)
        throw ConfigError("sweep value " + std::to_string(v) +
                          " out of range for the swept parameter");
    }
  }
  if (!spec.columns_overridden) {
    spec.want_sim = spec.want_analytic = spec.want_meanfield = false;
    switch (m) {
      case RunMode::simulate: spec.want_sim = true; break;
      case RunMode::analyze: spec.want_analytic = true; break;
      case RunMode::sweep: spec.want_sim = spec.want_analytic = true; break;
      case RunMode::meanfield: spec.want_meanfield = true; break;
    }
  }
}

/// Parses a flat `key = value` experiment file. Keys are the NetworkConfig
/// field names (with theta_db, p_tx_dbm, noise_dbm accepted as dB/dBm
/// alternates) plus mode, sweep_axis, sweep_values, topology_count,
/// output_path and columns. Unknown keys, malformed values and range
/// violations are errors carrying the line number. Lines that are blank or
/// start with '#' are ignored.
inline ExperimentSpec parse_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file: " + path);

  ExperimentSpec spec;
  std::string raw;
  int line = 0;
  bool mode_set = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) +
                        ": expected 'key = value'");
    std::string key = detail::trim(s.substr(0, eq));
    std::string val = detail::trim(s.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("line " + std::to_string(line) +
                        ": expected 'key = value'");

    NetworkConfig& b = spec.base;
    if (key == "lambda") b.lambda = detail::parse_double(val, line);
    else if (key == "r") b.r = detail::parse_double(val, line);
    else if (key == "alpha") b.alpha = detail::parse_double(val, line);
    else if (key == "theta") b.theta = detail::parse_double(val, line);
    else if (key == "theta_db") b.theta = db_to_linear(detail::parse_double(val, line));
    else if (key == "p_tx") b.p_tx = detail::parse_double(val, line);
    else if (key == "p_tx_dbm") b.p_tx = dbm_to_watts(detail::parse_double(val, line));
    else if (key == "noise") b.noise = detail::parse_double(val, line);
    else if (key == "noise_dbm") b.noise = dbm_to_watts(detail::parse_double(val, line));
    else if (key == "xi") b.xi = detail::parse_double(val, line);
    else if (key == "p") b.p = detail::parse_double(val, line);
    else if (key == "window") b.window = detail::parse_double(val, line);
    else if (key == "seed") b.seed = static_cast<std::uint64_t>(detail::parse_int(val, line));
    else if (key == "warmup_slots") b.warmup_slots = detail::parse_int(val, line);
    else if (key == "measure_slots") b.measure_slots = detail::parse_int(val, line);
    else if (key == "topology_count") {
      long long n = detail::parse_int(val, line);
      if (n < 1)
        throw ConfigError("line " + std::to_string(line) +
                          ": topology_count must be >= 1");
      spec.topology_count = static_cast<int>(n);
    } else if (key == "output_path") {
      spec.output_path = val;
    } else if (key == "mode") {
      mode_set = true;
      if (val == "simulate") spec.mode = RunMode::simulate;
      else if (val == "meanfield") spec.mode = RunMode::meanfield;
      else if (val == "analyze") spec.mode = RunMode::analyze;
      else if (val == "sweep") spec.mode = RunMode::sweep;
      else
        throw ConfigError("line " + std::to_string(line) + ": unknown mode '" +
                          val + "' (simulate|meanfield|analyze|sweep)");
    } else if (key == "sweep_axis") {
      if (val == "xi") spec.sweep_axis = SweepAxis::xi;
      else if (val == "p") spec.sweep_axis = SweepAxis::p;
      else if (val == "lambda") spec.sweep_axis = SweepAxis::lambda;
      else
        throw ConfigError("line " + std::to_string(line) +
                          ": unknown sweep_axis '" + val + "' (xi|p|lambda)");
    } else if (key == "sweep_values") {
      std::stringstream ss(val);
      std::string item;
      spec.sweep_values.clear();
      while (std::getline(ss, item, ','))
        spec.sweep_values.push_back(detail::parse_double(detail::trim(item), line));
      if (spec.sweep_values.empty())
        throw ConfigError("line " + std::to_string(line) +
                          ": sweep_values must be non-empty");
      for (std::size_t i = 1; i < spec.sweep_values.size(); ++i)
        if (spec.sweep_values[i] <= spec.sweep_values[i - 1])
          throw ConfigError("line " + std::to_string(line) +
                            ": sweep_values must be strictly increasing");
    } else if (key == "columns") {
      spec.columns_overridden = true;
      spec.want_sim = spec.want_analytic = spec.want_meanfield = false;
      std::stringstream ss(val);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = detail::trim(item);
        if (item == "sim") spec.want_sim = true;
        else if (item == "analytic") spec.want_analytic = true;
        else if (item == "meanfield") spec.want_meanfield = true;
        else
          throw ConfigError("line " + std::to_string(line) +
                            ": unknown column '" + item +
                            "' (sim|analytic|meanfield)");
      }
    } else {
      throw ConfigError("line " + std::to_string(line) + ": unknown key '" +
                        key + "'");
    }
  }
  if (!mode_set) throw ConfigError("spec must set mode");
  set_mode(spec, spec.mode);
  validate_config(spec.base); // surface base-config range errors at parse time
  return spec;
}

struct SweepRow {
  double swept_value = 0.0;
  std::optional<double> sim_aoi, sim_stderr, analytic_aoi, meanfield_aoi;
  std::vector<std::string> flags;
  bool hard_failure() const {
    return !sim_aoi && !analytic_aoi && !meanfield_aoi;
  }
};

namespace detail {

inline NetworkConfig with_axis(NetworkConfig base, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::xi: base.xi = v; break;
    case SweepAxis::p: base.p = v; break;
    case SweepAxis::lambda: base.lambda = v; break;
    case SweepAxis::none: break;
  }
  return base;
}

inline double axis_value(const NetworkConfig& c, SweepAxis axis) {
  switch (axis) {
    case SweepAxis::p: return c.p;
    case SweepAxis::lambda: return c.lambda;
    default: return c.xi;
  }
}

} // namespace detail

/// Computes one sweep row. Solver failures become row flags, never throws
/// for per-row numerical trouble; config errors still propagate.
inline SweepRow run_row(const ExperimentSpec& spec, double value) {
  NetworkConfig raw = detail::with_axis(spec.base, spec.sweep_axis, value);
  ValidatedConfig cfg = validate_config(raw);
  SweepRow row;
  row.swept_value = spec.sweep_axis == SweepAxis::none
                        ? detail::axis_value(raw, spec.sweep_axis)
                        : value;

  if (spec.want_sim) {
    SimReport rep = run_simulation(cfg, spec.topology_count);
    if (rep.per_link.empty()) {
      row.flags.push_back("no_links");
    } else {
      row.sim_aoi = rep.network_avg_aoi;
      row.sim_stderr = rep.network_avg_aoi_stderr;
      if (rep.zero_link_topologies > 0) row.flags.push_back("empty_topologies");
    }
  }
  if (spec.want_analytic) {
    try {
      PicardResult pr = picard_solve(cfg);
      NetworkAoiResult na = network_aoi(pr.cdf, cfg);
      row.analytic_aoi = na.value;
      if (na.divergence_suspected) row.flags.push_back("divergence_suspected");
    } catch (const SolverError& e) {
      std::string what = e.what();
      row.flags.push_back(what.find("below the grid") != std::string::npos
                              ? "divergence_suspected"
                              : "nonconvergence");
    }
  }
  if (spec.want_meanfield) {
    double sum = 0.0;
    long links = 0;
    bool failed = false;
    for (int rep = 0; rep < spec.topology_count; ++rep) {
      Rng trng = make_rng(cfg.seed, RngPurpose::topology,
                          static_cast<std::uint64_t>(rep));
      Topology topo = sample_topology(cfg, trng);
      if (topo.empty()) continue;
      try {
        MeanFieldSolution sol = solve_fixed_point(topo, cfg);
        for (double v : sol.cond_aoi) sum += v;
        links += static_cast<long>(sol.cond_aoi.size());
      } catch (const FixedPointError&) {
        failed = true;
      }
    }
    if (links > 0)
      row.meanfield_aoi = sum / static_cast<double>(links);
    if (failed) row.flags.push_back("nonconvergence");
  }
  return row;
}

inline std::vector<SweepRow> run_rows(const ExperimentSpec& spec) {
  std::vector<SweepRow> rows;
  if (spec.mode == RunMode::sweep) {
    for (double v : spec.sweep_values) rows.push_back(run_row(spec, v));
  } else {
    rows.push_back(
        run_row(spec, detail::axis_value(spec.base, spec.sweep_axis)));
  }
  return rows;
}

inline void write_metadata(std::ostream& os, const ExperimentSpec& spec,
                           const std::string& git_describe) {
  using detail::fmt;
  const NetworkConfig& b = spec.base;
  const char* mode = spec.mode == RunMode::simulate    ? "simulate"
                     : spec.mode == RunMode::meanfield ? "meanfield"
                     : spec.mode == RunMode::analyze   ? "analyze"
                                                       : "sweep";
  os << "# aoi-mesh " << mode << " (" << git_describe << ")\n";
  os << "# lambda = " << fmt(b.lambda) << "\n";
  os << "# r = " << fmt(b.r) << "\n";
  os << "# alpha = " << fmt(b.alpha) << "\n";
  os << "# theta = " << fmt(b.theta) << "\n";
  os << "# p_tx = " << fmt(b.p_tx) << "\n";
  os << "# noise = " << fmt(b.noise) << "\n";
  os << "# xi = " << fmt(b.xi) << "\n";
  os << "# p = " << fmt(b.p) << "\n";
  os << "# window = " << fmt(b.window) << "\n";
  os << "# seed = " << b.seed << "\n";
  os << "# warmup_slots = " << b.warmup_slots << "\n";
  os << "# measure_slots = " << b.measure_slots << "\n";
  os << "# topology_count = " << spec.topology_count << "\n";
  if (spec.sweep_axis != SweepAxis::none) {
    os << "# sweep_axis = "
       << (spec.sweep_axis == SweepAxis::xi       ? "xi"
           : spec.sweep_axis == SweepAxis::p      ? "p"
                                                  : "lambda")
       << "\n";
  }
  os << "# note: desk-scale run; window/topology_count/measure_slots are "
        "reduced relative to a production campaign\n";
  os << "# flags cell uses ';' as separator\n";
}

inline void write_sweep_csv(std::ostream& os, const ExperimentSpec& spec,
                            const std::vector<SweepRow>& rows,
                            const std::string& git_describe) {
  using detail::fmt;
  write_metadata(os, spec, git_describe);
  os << "swept_value,sim_aoi,sim_stderr,analytic_aoi,meanfield_aoi,flags,"
        "seed,git_describe\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? detail::fmt(*v) : std::string();
  };
  for (const SweepRow& row : rows) {
    std::string flags;
    for (std::size_t i = 0; i < row.flags.size(); ++i) {
      if (i) flags += ';';
      flags += row.flags[i];
    }
    os << fmt(row.swept_value) << ',' << cell(row.sim_aoi) << ','
       << cell(row.sim_stderr) << ',' << cell(row.analytic_aoi) << ','
       << cell(row.meanfield_aoi) << ',' << flags << ',' << spec.base.seed
       << ',' << git_describe << '\n';
  }
}

/// meanfield mode artifact: per-link fixed-point solution on the first
/// topology substream.
inline void write_meanfield_csv(std::ostream& os, const ExperimentSpec& spec,
                                const std::string& git_describe) {
  ValidatedConfig cfg = validate_config(spec.base);
  Rng trng = make_rng(cfg.seed, RngPurpose::topology, 0);
  Topology topo = sample_topology(cfg, trng);
  write_metadata(os, spec, git_describe);
  os << "link_id,mu,a,cond_aoi\n";
  if (topo.empty()) return;
  MeanFieldSolution sol = solve_fixed_point(topo, cfg);
  for (std::size_t j = 0; j < sol.mu.size(); ++j)
    os << j << ',' << detail::fmt(sol.mu[j]) << ',' << detail::fmt(sol.a[j])
       << ',' << detail::fmt(sol.cond_aoi[j]) << '\n';
}

/// Executes a spec end to end. Returns the process exit code: 0 on success
/// (including rows that failed individually but not all of them), 3 when
/// every row hard-failed, 4 on output I/O failure.
inline int run(const ExperimentSpec& spec, const std::string& out_override,
               const std::string& git_describe) {
  std::string path = out_override.empty() ? spec.output_path : out_override;
  std::ostringstream body;
  if (spec.mode == RunMode::meanfield) {
    try {
      write_meanfield_csv(body, spec, git_describe);
    } catch (const FixedPointError&) {
      return 3;
    }
  } else {
    std::vector<SweepRow> rows = run_rows(spec);
    bool all_failed = !rows.empty();
    for (const SweepRow& r : rows) all_failed = all_failed && r.hard_failure();
    if (all_failed) return 3;
    write_sweep_csv(body, spec, rows, git_describe);
  }
  if (path.empty()) {
    std::cout << body.str();
    return std::cout ? 0 : 4;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) return 4;
  out << body.str();
  out.flush();
  return out ? 0 : 4;
}

struct CompareReport {
  struct RowGap {
    double swept_value;
    double gap; // max relative difference among compared column pairs
  };
  std::vector<RowGap> rows;
  double max_gap = 0.0;
  int skipped = 0;
};

namespace detail {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV: " + path);
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (t.header.empty()) t.header = cells;
    else t.rows.push_back(cells);
  }
  if (t.header.empty()) throw ConfigError("CSV has no header: " + path);
  return t;
}

inline int column_index(const CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return static_cast<int>(i);
  throw ConfigError("CSV column not found: " + name);
}

} // namespace detail

/// Row-by-row comparison of two sweep CSVs on matching swept grids.
/// col_a/col_b select which result column of each file to compare (they may
/// differ, e.g. sim_aoi of one run vs analytic_aoi of the same file). Rows
/// where either value is missing are skipped and counted; skip_flagged also
/// skips rows carrying any flag in either file.
inline CompareReport compare(const std::string& csv_a, const std::string& csv_b,
                             const std::string& col_a = "sim_aoi",
                             const std::string& col_b = "analytic_aoi",
                             bool skip_flagged = false) {
  detail::CsvTable a = detail::read_csv(csv_a);
  detail::CsvTable b = detail::read_csv(csv_b);
  if (a.rows.size() != b.rows.size())
    throw ConfigError("swept grids differ: row counts " +
                      std::to_string(a.rows.size()) + " vs " +
                      std::to_string(b.rows.size()));
  int ia = detail::column_index(a, col_a);
  int ib = detail::column_index(b, col_b);
  int fa = detail::column_index(a, "flags");
  int fb = detail::column_index(b, "flags");

  CompareReport rep;
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    double sa = std::stod(a.rows[r][0]);
    double sb = std::stod(b.rows[r][0]);
    if (std::abs(sa - sb) > 1e-12 * std::max(1.0, std::abs(sa)))
      throw ConfigError("swept grids differ at row " + std::to_string(r) +
                        ": " + a.rows[r][0] + " vs " + b.rows[r][0]);
    const std::string& va = a.rows[r][ia];
    const std::string& vb = b.rows[r][ib];
    bool flagged = !a.rows[r][fa].empty() || !b.rows[r][fb].empty();
    if (va.empty() || vb.empty() || (skip_flagged && flagged)) {
      rep.skipped += 1;
      continue;
    }
    double xa = std::stod(va), xb = std::stod(vb);
    double denom = std::max(std::abs(xa), std::abs(xb));
    double gap = denom > 0.0 ? std::abs(xa - xb) / denom : 0.0;
    rep.rows.push_back({sa, gap});
    rep.max_gap = std::max(rep.max_gap, gap);
  }
  return rep;
}

} // namespace aoimesh

#endif
