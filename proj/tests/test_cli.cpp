#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>

#include "aoimesh/sweep.hpp"

using namespace aoimesh;
using Catch::Approx;

#ifndef AOIMESH_CLI_PATH
#error "AOIMESH_CLI_PATH must point at the aoi-mesh binary"
#endif

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  fs::path d = fs::temp_directory_path() / "aoimesh-cli-tests";
  fs::create_directories(d);
  return d;
}

fs::path write_file(const std::string& name, const std::string& content) {
  fs::path p = scratch_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(AOIMESH_CLI_PATH) + " " + args +
                    " > /dev/null 2> /dev/null";
  int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string first_data_header(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return "";
}

} // namespace

TEST_CASE("spec parsing: defaults, alternates and diagnostics") {
  SECTION("mode alone yields library defaults and mode-derived columns") {
    fs::path p = write_file("minimal.spec", "mode = analyze\n");
    ExperimentSpec spec = parse_spec(p.string());
    CHECK(spec.mode == RunMode::analyze);
    CHECK(spec.want_analytic);
    CHECK_FALSE(spec.want_sim);
    CHECK(spec.base.lambda == Approx(1e-2));
    CHECK(spec.base.alpha == Approx(3.8));
    CHECK(spec.topology_count == 20);
  }
  SECTION("dB / dBm alternates convert at the boundary") {
    fs::path p = write_file("db.spec",
                            "mode = analyze\n"
                            "theta_db = 0\n"
                            "p_tx_dbm = 17\n"
                            "noise_dbm = -90\n");
    ExperimentSpec spec = parse_spec(p.string());
    CHECK(spec.base.theta == Approx(1.0));
    CHECK(spec.base.p_tx == Approx(0.05011872336272722).epsilon(1e-14));
    CHECK(spec.base.noise == Approx(1e-12).epsilon(1e-14));
  }
  SECTION("unknown keys are an error carrying the line number") {
    fs::path p = write_file("badkey.spec",
                            "mode = analyze\n"
                            "# comment\n"
                            "lambada = 0.5\n");
    CHECK_THROWS_WITH(parse_spec(p.string()),
                      Catch::Matchers::ContainsSubstring("line 3") &&
                          Catch::Matchers::ContainsSubstring("lambada"));
  }
  SECTION("range violations surface at parse time") {
    fs::path p = write_file("range.spec", "mode = analyze\nxi = 1.5\n");
    CHECK_THROWS_AS(parse_spec(p.string()), ConfigError);
  }
  SECTION("sweep values must be present, increasing and in range") {
    fs::path p = write_file("sweep1.spec",
                            "mode = sweep\nsweep_axis = xi\n"
                            "sweep_values = 0.1, 0.5, 0.9\n");
    ExperimentSpec spec = parse_spec(p.string());
    REQUIRE(spec.sweep_values.size() == 3);
    CHECK(spec.sweep_values[1] == Approx(0.5));
    CHECK(spec.want_sim);
    CHECK(spec.want_analytic);

    fs::path bad = write_file("sweep2.spec",
                              "mode = sweep\nsweep_axis = xi\n"
                              "sweep_values = 0.5, 0.1\n");
    CHECK_THROWS_AS(parse_spec(bad.string()), ConfigError);
    fs::path missing = write_file("sweep3.spec", "mode = sweep\n");
    CHECK_THROWS_AS(parse_spec(missing.string()), ConfigError);
    fs::path range = write_file("sweep4.spec",
                                "mode = sweep\nsweep_axis = p\n"
                                "sweep_values = 0.5, 1.5\n");
    CHECK_THROWS_AS(parse_spec(range.string()), ConfigError);
  }
  SECTION("explicit columns override the mode defaults") {
    fs::path p = write_file("cols.spec",
                            "mode = sweep\nsweep_axis = xi\n"
                            "sweep_values = 0.2, 0.4\n"
                            "columns = analytic, meanfield\n");
    ExperimentSpec spec = parse_spec(p.string());
    CHECK_FALSE(spec.want_sim);
    CHECK(spec.want_analytic);
    CHECK(spec.want_meanfield);
  }
  SECTION("a spec without a mode is rejected") {
    fs::path p = write_file("nomode.spec", "lambda = 1e-3\n");
    CHECK_THROWS_AS(parse_spec(p.string()), ConfigError);
  }
}

TEST_CASE("analyze mode emits the CSV contract") {
  fs::path spec = write_file("analyze.spec",
                             "mode = analyze\nlambda = 1e-6\nxi = 0.5\n");
  fs::path out = scratch_dir() / "analyze.csv";
  int code = run_cli("analyze --spec " + spec.string() + " --out " +
                     out.string());
  REQUIRE(code == 0);
  std::string csv = slurp(out);
  CHECK(first_data_header(csv) ==
        "swept_value,sim_aoi,sim_stderr,analytic_aoi,meanfield_aoi,flags,"
        "seed,git_describe");
  CHECK(csv.rfind("# aoi-mesh analyze", 0) == 0);
  CHECK(csv.find("\r") == std::string::npos); // LF endings only
  // the single row carries the analytic value near the interference-free 2.0
  std::istringstream in(csv);
  std::string line, data;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line[0] != 's') data = line;
  REQUIRE_FALSE(data.empty());
  std::stringstream ss(data);
  std::string cell;
  std::getline(ss, cell, ','); // swept_value
  std::getline(ss, cell, ','); // sim_aoi (empty)
  CHECK(cell.empty());
  std::getline(ss, cell, ','); // sim_stderr (empty)
  std::getline(ss, cell, ','); // analytic_aoi
  CHECK(std::stod(cell) == Approx(2.0).epsilon(1e-4));
}

TEST_CASE("sweep output is byte-identical across runs") {
  fs::path spec = write_file("det.spec",
                             "mode = sweep\nlambda = 1e-6\n"
                             "sweep_axis = xi\nsweep_values = 0.25, 0.5\n"
                             "columns = analytic\n");
  fs::path o1 = scratch_dir() / "det1.csv";
  fs::path o2 = scratch_dir() / "det2.csv";
  REQUIRE(run_cli("sweep --spec " + spec.string() + " --out " + o1.string()) ==
          0);
  REQUIRE(run_cli("sweep --spec " + spec.string() + " --out " + o2.string()) ==
          0);
  std::string a = slurp(o1), b = slurp(o2);
  REQUIRE_FALSE(a.empty());
  CHECK(a == b);
}

TEST_CASE("simulate mode runs a small network end to end") {
  fs::path spec = write_file("sim.spec",
                             "mode = simulate\nlambda = 1e-3\nwindow = 100\n"
                             "warmup_slots = 100\nmeasure_slots = 500\n"
                             "topology_count = 5\n");
  fs::path out = scratch_dir() / "sim.csv";
  REQUIRE(run_cli("simulate --spec " + spec.string() + " --out " +
                  out.string()) == 0);
  std::string csv = slurp(out);
  CHECK(first_data_header(csv).rfind("swept_value,", 0) == 0);
  CHECK(csv.find("# aoi-mesh simulate") != std::string::npos);
}

TEST_CASE("meanfield mode dumps the per-link fixed point") {
  fs::path spec = write_file("mf.spec",
                             "mode = meanfield\nlambda = 2e-3\nwindow = 50\n");
  fs::path out = scratch_dir() / "mf.csv";
  REQUIRE(run_cli("meanfield --spec " + spec.string() + " --out " +
                  out.string()) == 0);
  CHECK(first_data_header(slurp(out)) == "link_id,mu,a,cond_aoi");
}

TEST_CASE("seed override changes simulation output, not the contract") {
  fs::path spec = write_file("seed.spec",
                             "mode = simulate\nlambda = 1e-3\nwindow = 100\n"
                             "warmup_slots = 50\nmeasure_slots = 200\n"
                             "topology_count = 3\n");
  fs::path o1 = scratch_dir() / "seed1.csv";
  fs::path o2 = scratch_dir() / "seed2.csv";
  REQUIRE(run_cli("simulate --spec " + spec.string() + " --seed 7 --out " +
                  o1.string()) == 0);
  REQUIRE(run_cli("simulate --spec " + spec.string() + " --seed 8 --out " +
                  o2.string()) == 0);
  CHECK(slurp(o1) != slurp(o2));
  CHECK(slurp(o1).find(",7,") != std::string::npos); // seed column echoes 7
}

TEST_CASE("exit codes distinguish parse, I/O and usage failures") {
  fs::path bad = write_file("bad.spec", "mode = analyze\nwat = 1\n");
  CHECK(run_cli("analyze --spec " + bad.string()) == 2);
  CHECK(run_cli("analyze --spec /nonexistent/path.spec") == 4);
  CHECK(run_cli("") == 2);          // missing subcommand
  CHECK(run_cli("analyze") == 2);   // missing --spec
  fs::path ok = write_file("ok.spec", "mode = analyze\nlambda = 1e-6\n");
  fs::path noperm = fs::path("/nonexistent-dir") / "out.csv";
  CHECK(run_cli("analyze --spec " + ok.string() + " --out " +
                noperm.string()) == 4);
}

TEST_CASE("compare subcommand reports gaps and grid mismatches") {
  fs::path spec = write_file("cmp.spec",
                             "mode = sweep\nlambda = 1e-6\n"
                             "sweep_axis = xi\nsweep_values = 0.25, 0.5\n"
                             "columns = analytic\n");
  fs::path out = scratch_dir() / "cmp.csv";
  REQUIRE(run_cli("sweep --spec " + spec.string() + " --out " + out.string()) ==
          0);
  CHECK(run_cli("compare " + out.string() + " " + out.string() +
                " --col-a analytic_aoi --col-b analytic_aoi") == 0);

  fs::path other = write_file(
      "cmp_other.csv",
      "swept_value,sim_aoi,sim_stderr,analytic_aoi,meanfield_aoi,flags,"
      "seed,git_describe\n"
      "0.3,,,4.0,,,1,x\n"
      "0.5,,,2.9,,,1,x\n");
  CHECK(run_cli("compare " + out.string() + " " + other.string() +
                " --col-a analytic_aoi --col-b analytic_aoi") == 2);

  CompareReport rep = compare(out.string(), out.string(), "analytic_aoi",
                              "analytic_aoi");
  CHECK(rep.max_gap == 0.0);
  CHECK(rep.rows.size() == 2);
}
