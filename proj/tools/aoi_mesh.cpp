// Command-line front end: parse an experiment spec, run the requested mode,
// emit deterministic CSV. Exit codes: 0 success, 2 parse error, 3 solver
// failure, 4 I/O error (1 is reserved for compare-over-tolerance).

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "aoimesh/sweep.hpp"

#ifndef AOIMESH_GIT_DESCRIBE
#define AOIMESH_GIT_DESCRIBE "unknown"
#endif

namespace {

int run_mode(aoimesh::RunMode mode, const std::string& spec_path,
             std::uint64_t seed, bool seed_set, const std::string& out_path) {
  aoimesh::ExperimentSpec spec;
  try {
    spec = aoimesh::parse_spec(spec_path);
    aoimesh::set_mode(spec, mode);
    if (seed_set) spec.base.seed = seed;
    aoimesh::validate_config(spec.base);
  } catch (const aoimesh::IoError& e) {
    std::fprintf(stderr, "aoi-mesh: %s\n", e.what());
    return 4;
  } catch (const aoimesh::ConfigError& e) {
    std::fprintf(stderr, "aoi-mesh: %s: %s\n", spec_path.c_str(), e.what());
    return 2;
  }
  try {
    return aoimesh::run(spec, out_path, AOIMESH_GIT_DESCRIBE);
  } catch (const aoimesh::IoError& e) {
    std::fprintf(stderr, "aoi-mesh: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "aoi-mesh: solver failure: %s\n", e.what());
    return 3;
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"slotted random-access network AoI: simulator and solvers"};
  app.require_subcommand(1);

  struct ModeArgs {
    std::string spec_path;
    std::string out_path;
    std::uint64_t seed = 0;
    CLI::App* sub = nullptr;
    CLI::Option* seed_opt = nullptr;
  };
  const std::pair<const char*, aoimesh::RunMode> modes[] = {
      {"simulate", aoimesh::RunMode::simulate},
      {"meanfield", aoimesh::RunMode::meanfield},
      {"analyze", aoimesh::RunMode::analyze},
      {"sweep", aoimesh::RunMode::sweep},
  };
  ModeArgs args[4];
  for (int i = 0; i < 4; ++i) {
    args[i].sub = app.add_subcommand(modes[i].first);
    args[i].sub->add_option("--spec", args[i].spec_path, "experiment file")
        ->required();
    args[i].seed_opt =
        args[i].sub->add_option("--seed", args[i].seed, "master seed override");
    args[i].sub->add_option("--out", args[i].out_path,
                            "output CSV path (default: spec output_path or "
                            "stdout)");
  }

  auto* cmp = app.add_subcommand("compare", "compare two sweep CSVs");
  std::string csv_a, csv_b, col_a = "sim_aoi", col_b = "analytic_aoi";
  double tol = 0.1;
  bool skip_flagged = false;
  cmp->add_option("csv_a", csv_a)->required();
  cmp->add_option("csv_b", csv_b)->required();
  cmp->add_option("--col-a", col_a, "column of csv_a (default sim_aoi)");
  cmp->add_option("--col-b", col_b, "column of csv_b (default analytic_aoi)");
  cmp->add_option("--tol", tol, "max allowed relative gap (default 0.1)");
  cmp->add_flag("--skip-flagged", skip_flagged, "ignore rows carrying flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (int i = 0; i < 4; ++i)
    if (args[i].sub->parsed())
      return run_mode(modes[i].second, args[i].spec_path, args[i].seed,
                      args[i].seed_opt->count() > 0, args[i].out_path);

  try {
    aoimesh::CompareReport rep =
        aoimesh::compare(csv_a, csv_b, col_a, col_b, skip_flagged);
    for (const auto& row : rep.rows)
      std::printf("swept_value=%.12g relative_gap=%.6g\n", row.swept_value,
                  row.gap);
    std::printf("rows_compared=%zu rows_skipped=%d max_relative_gap=%.6g\n",
                rep.rows.size(), rep.skipped, rep.max_gap);
    return rep.max_gap <= tol ? 0 : 1;
  } catch (const aoimesh::IoError& e) {
    std::fprintf(stderr, "aoi-mesh: %s\n", e.what());
    return 4;
  } catch (const aoimesh::ConfigError& e) {
    std::fprintf(stderr, "aoi-mesh: %s\n", e.what());
    return 2;
  }
}
