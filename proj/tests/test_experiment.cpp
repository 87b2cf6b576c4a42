#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "husimi/experiment.hpp"

using namespace husimi;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("husimi_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

// Small torsional run with a grid reference, cheap enough for unit tests.
ExperimentConfig tiny_grid_config(const fs::path& dir) {
  ExperimentConfig c = preset("D-desk");
  c.t_final = 0.5;
  c.output_dir = dir.string();
  c.reference_check = false;
  for (auto& r : c.runs) {
    r.n1 = 2000;
    r.n2 = 200;
    r.grid_points = 128;
    r.grid_dt = 5e-3;
  }
  return c;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(HUSIMI_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("convergence slopes of synthetic data") {
  std::vector<ConvergenceRow> quad, lin;
  for (double e : {0.1, 0.05, 0.01, 0.005}) {
    quad.push_back({e, 3.0 * e * e});
    lin.push_back({e, 0.7 * e});
  }
  CHECK(convergence_table(quad).slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(convergence_table(quad).intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(convergence_table(lin).slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(convergence_table({{0.1, 1.0}, {0.05, 0.5}}), ContractError);
  CHECK_THROWS_AS(convergence_table({{0.1, 1.0}, {0.05, 0.0}, {0.01, 0.1}}), ContractError);
}

TEST_CASE("presets mirror the sample-count table") {
  const ExperimentConfig d = preset("D");
  REQUIRE(d.runs.size() == 5);
  CHECK(d.runs[0].epsilon == 0.1);
  CHECK(d.runs[0].n1 == 10000);
  CHECK(d.runs[0].n2 == 1000);
  CHECK(d.runs[0].h1 == 1e-2);
  CHECK(d.runs[0].h2 == 1e-3);
  CHECK(d.runs[4].n1 == 1000000);
  CHECK(d.runs[4].n2 == 50000);
  CHECK(d.runs[4].h2 == 2e-4);
  CHECK(d.t_final == 20.0);
  const ExperimentConfig e = preset("E");
  CHECK(e.runs[0].n1 == 100000);
  CHECK(e.runs[1].n2 == 20000);
  CHECK(e.centers.size() == 2);
  const ExperimentConfig desk = preset("D-desk");
  REQUIRE(desk.runs.size() == 3);
  CHECK(desk.runs[2].epsilon == 0.01);
  CHECK(desk.runs[2].n1 == 100000);
  CHECK(desk.t_final == 5.0);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
  CHECK_THROWS_AS(preset("F"), ConfigError);
}

TEST_CASE("configuration round trip") {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    const ExperimentConfig back = parse(serialize_config(c));
    CHECK(back == c);
    CHECK(serialize_config(back) == serialize_config(c));
  }
  const ExperimentConfig custom = parse(R"(
[experiment]
potential = henon-heiles
dimension = 2
sigma = 0.2
centers = 1 0.5 0 0 | -1 0 0.25 0
methods = A, husimi-naive
observables = q1, total
t_final = 2
seed = 9
sampling = mcmc
reference = none

[epsilon.2]
epsilon = 0.05
n1 = 400
n2 = 40

[epsilon.1]
epsilon = 0.1
n1 = 100
n2 = 10
)");
  CHECK(custom.sigma == 0.2);
  REQUIRE(custom.runs.size() == 2);
  CHECK(custom.runs[0].epsilon == 0.1);
  CHECK(custom.runs[1].n1 == 400);
  CHECK(custom.centers[1](2) == 0.25);
  CHECK(custom.methods == std::vector<Method>{Method::husimi_corrected, Method::husimi_naive});
  CHECK(parse(serialize_config(custom)) == custom);
}

TEST_CASE("configuration errors carry field and line") {
  auto expect = [](const std::string& text, const std::string& field, std::size_t line) {
    try {
      parse(text);
      FAIL("expected a config error for " << field);
    } catch (const ConfigError& e) {
      CHECK(e.field() == field);
      CHECK(e.line() == line);
    }
  };
  expect("[experiment]\npreset = D-desk\nobservables =\n", "experiment.observables", 3);
  expect("[experiment]\npreset = D-desk\nbogus = 1\n", "experiment.bogus", 3);
  expect("[experiment]\n\nt_final = soon\n", "experiment.t_final", 3);
  expect("[experiment]\npreset = nope\n", "experiment.preset", 2);
  expect("[experiment]\npreset = D-desk\n[epsilon.1]\nepsilon = 0.1\ngrid_points = 100\n",
         "epsilon.1.grid_points", 5);
  expect("[experiment]\npreset = D-desk\nmethods = A, Z\n", "experiment.methods", 3);
  expect("[experiment]\npreset = E-desk\nmethods = wigner\n", "experiment.methods", 3);
  expect("[experiment]\npreset = D-desk\nepsilons = 0.3\n", "experiment.epsilons", 3);
  expect("[other]\nx = 1\n", "other", 1);
  CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("empty observable list writes nothing") {
  const fs::path dir = scratch_dir("empty");
  ExperimentConfig c = preset("harmonic-sanity");
  c.output_dir = dir.string();
  c.observables.clear();
  CHECK_THROWS_AS(run_experiment(c), ConfigError);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("harmonic sanity preset") {
  const fs::path dir = scratch_dir("harmonic");
  ExperimentConfig c = preset("harmonic-sanity");
  c.output_dir = dir.string();
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.runs.size() == 1);
  const auto& s = r.runs[0].series;
  const auto& ref = r.references[0];
  const Index q = s.observable_index("q1"), p = s.observable_index("p1");
  CHECK((s.values.col(q) - ref.values.col(q)).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK((s.values.col(p) - ref.values.col(p)).cwiseAbs().maxCoeff() <= 1e-4);
  const std::string csv = slurp(dir / "series_eps0.1_husimi-corrected.csv");
  CHECK(csv.rfind("time,observable,method,value,reference,error\n", 0) == 0);
  CHECK(fs::exists(dir / "error_summary_eps0.1.csv"));
  CHECK(fs::exists(dir / "timings.txt"));
}

TEST_CASE("grid-reference experiment, determinism and converge files") {
  const fs::path dir = scratch_dir("grid");
  const ExperimentConfig c = tiny_grid_config(dir);
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.convergence.size() == 1);
  CHECK(r.runs.size() == 3);
  CHECK(r.references.size() == 3);
  for (const auto& ref : r.references) CHECK(ref.resolved);
  for (const auto& run : r.runs) {
    REQUIRE(run.average_error.has_value());
    CHECK(run.group_errors.size() == 5);
  }
  const std::string conv = slurp(dir / "convergence.csv");
  CHECK(conv.rfind("method,epsilon,time_avg_error,slope\n", 0) == 0);
  CHECK(fs::exists(dir / "reference_summary.csv"));

  const std::vector<std::string> summaries = {(dir / "error_summary_eps0.1.csv").string(),
                                              (dir / "error_summary_eps0.05.csv").string(),
                                              (dir / "error_summary_eps0.01.csv").string()};
  const auto tables = converge_files(summaries, (dir / "again.csv").string());
  REQUIRE(tables.size() == 1);
  CHECK(tables[0].first == "husimi-corrected");
  CHECK(tables[0].second.slope == doctest::Approx(r.convergence[0].second.slope).epsilon(1e-12));

  const fs::path dir2 = scratch_dir("grid2");
  ExperimentConfig c2 = c;
  c2.output_dir = dir2.string();
  c2.threads = 2;
  run_experiment(c2);
  for (const char* f : {"series_eps0.1_husimi-corrected.csv", "series_eps0.01_husimi-corrected.csv",
                        "reference_eps0.05.csv", "error_summary_eps0.05.csv", "convergence.csv"})
    CHECK(slurp(dir / f) == slurp(dir2 / f));
}

TEST_CASE("time-averaged error groups") {
  ExperimentConfig c = preset("D-desk");
  CHECK(error_groups(c) == std::vector<std::string>{"position", "momentum", "potential", "kinetic", "total"});
  ExpectationSeries est;
  est.times = {0.0, 1.0};
  est.observables = {"q1", "q2", "total"};
  est.values = MatrixXd::Zero(2, 3);
  est.values(1, 0) = 3.0;
  est.values(1, 1) = 4.0;
  est.values(0, 2) = -0.5;
  ReferenceSeries ref;
  ref.times = est.times;
  ref.observables = est.observables;
  ref.values = MatrixXd::Zero(2, 3);
  CHECK(time_averaged_error(est, ref, "position") == 2.5);
  CHECK(time_averaged_error(est, ref, "total") == 0.25);
}

TEST_CASE("instability keeps partial output") {
  const fs::path dir = scratch_dir("unstable");
  ExperimentConfig c = preset("henon-heiles-desk");
  c.output_dir = dir.string();
  c.methods = {Method::husimi_corrected};
  c.runs[0].n1 = 256;
  c.runs[0].n2 = 32;
  c.runs[0].h1 = c.runs[0].h2 = 1e-2;
  c.t_final = 0.5;
  c.q_bound = 2.05;
  CHECK_THROWS_AS(run_experiment(c), PartialEstimateError);
  CHECK(fs::exists(dir / "series_eps0.01_husimi-corrected.csv"));
}

TEST_CASE("command line exit status") {
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.ini") << "[experiment]\npreset = D-desk\nobservables =\n";
  CHECK(run_cli("simulate --config " + (dir / "bad.ini").string()) == 2);
  CHECK(run_cli("simulate --config preset:harmonic-sanity --n1 4096 --output " + (dir / "ok").string()) == 0);
  CHECK(fs::exists(dir / "ok" / "series_eps0.1_husimi-corrected.csv"));
  CHECK(run_cli("simulate --config preset:henon-heiles-desk --method A --n1 64 --n2 16 --h1 0.01 "
                "--h2 0.01 --t-final 0.2 --output " +
                (dir / "hh").string() + " --config preset:henon-heiles-desk") == 2);
  std::ofstream(dir / "unstable.ini") << "[experiment]\npreset = henon-heiles-desk\nq_bound = 2.05\n"
                                         "t_final = 0.2\nmethods = A\n"
                                      << "output = " << (dir / "unstable").string() << "\n"
                                      << "[epsilon.1]\nepsilon = 0.01\nn1 = 64\nn2 = 16\nh1 = 0.01\nh2 = 0.01\n";
  CHECK(run_cli("simulate --config " + (dir / "unstable.ini").string()) == 3);
  CHECK(run_cli("reference --config preset:harmonic-sanity --output " + (dir / "ref").string()) == 0);
  CHECK(fs::exists(dir / "ref" / "reference_eps0.1.csv"));
  CHECK(run_cli("reference --config preset:henon-heiles-desk") == 2);
  CHECK(run_cli("converge --inputs '" + (dir / "none*.csv").string() + "' --output x.csv") == 2);
}
