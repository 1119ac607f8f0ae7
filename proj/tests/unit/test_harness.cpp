#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "harness/experiment.hpp"
#include "harness/gradcheck_suite.hpp"

using namespace knife;
using namespace knife::harness;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("knife_harness_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_gauss() {
  return json{{"experiment", "gauss-entropy"},
              {"seeds", {0, 1}},
              {"train", {{"modes", 16}, {"iterations_per_epoch", 30}, {"epochs", 2}}},
              {"estimators", {"knife", "doe"}},
              {"gaussian", {{"dim", 2}}}};
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults and overrides") {
    const ExperimentConfig c = parse_config(small_gauss());
    CHECK(c.id == "gauss-entropy");
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1});
    CHECK(c.train.modes == 16);
    CHECK(c.train.epochs == 2);
    CHECK(c.modes.size() == 2);
    CHECK(c.gaussian.dim == 2);
    CHECK(c.gaussian.shrink == 1.0);
  }
  SUBCASE("seed ranges") {
    json j = small_gauss();
    j["seeds"] = {{"count", 3}, {"start", 5}};
    CHECK(parse_config(j).seeds == std::vector<std::uint64_t>{5, 6, 7});
  }
  SUBCASE("errors") {
    json j = small_gauss();
    j["experiment"] = "nope";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_gauss();
    j["train"]["learning_rte"] = 0.1;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_gauss();
    j["typo"] = 1;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_gauss();
    j["seeds"] = json::array();
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_gauss();
    j["estimators"] = {"kde"};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_gauss();
    j["train"]["covariance"] = "banded";
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  }
  SUBCASE("every shipped config parses") {
    for (const auto& entry : std::filesystem::directory_iterator(KNIFE_CONFIG_DIR))
      CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("results CSV round trip and summaries") {
  std::vector<ResultRow> rows{
      {"a:knife", 0, 0, 10, 1.0, 1.5, 0.0},
      {"a:knife", 0, 1, 20, 1.25, 1.5, 0.0},
      {"a:knife", 1, 1, 20, 2.0, 1.5, 0.0},
      {"a:knife/train", 0, 0, 10, 3.0, std::nullopt, 0.0},
      {"a:plain", 0, 0, 0, 0.1 + 0.2, std::nullopt, 0.0},
  };
  const auto dir = scratch("csv");
  write_results_csv(dir / "results.csv", rows);
  const std::string text = slurp(dir / "results.csv");
  CHECK(text.rfind("experiment,seed,epoch,iteration,estimate,oracle,abs_error,wall_ms\n", 0) == 0);
  CHECK(text.find("a:knife/train,0,0,10,3,,,0\n") != std::string::npos);

  const std::vector<ResultRow> back = read_results_csv(dir / "results.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].experiment == rows[i].experiment);
    CHECK(back[i].estimate == rows[i].estimate);  // bit-exact
    CHECK(back[i].oracle == rows[i].oracle);
  }

  const json s = summarize_rows(back);
  CHECK_FALSE(s.contains("a:knife/train"));
  const json& k = s["a:knife"];
  // Final rows: seed 0 -> 0.25 error, seed 1 -> 0.5 error.
  CHECK(k["median_abs_error"].get<double>() == doctest::Approx(0.375));
  CHECK(k["max_abs_error"].get<double>() == doctest::Approx(0.5));
  CHECK(k["epochs"].size() == 2);
  CHECK(k["epochs"][0]["abs_error"]["mean"].get<double>() == doctest::Approx(0.5));
  CHECK_FALSE(s["a:plain"].contains("median_abs_error"));

  std::ofstream(dir / "bad.csv") << "experiment,seed\n";
  CHECK_THROWS_AS(read_results_csv(dir / "bad.csv"), ConfigError);
}

TEST_CASE("bounds CSV marks infeasible points") {
  const auto dir = scratch("bounds");
  write_bounds_csv(dir / "bounds.csv", {{100, 1e10, 1e-3, 0.05, std::nullopt}, {1e6, 1e30, 1e-7, 0.05, 0.5}});
  const std::string text = slurp(dir / "bounds.csv");
  CHECK(text.rfind("N,M,w,delta,epsilon\n", 0) == 0);
  CHECK(text.find("infeasible") != std::string::npos);
  CHECK(text.find(",0.5\n") != std::string::npos);
}

TEST_CASE("runs, checks and determinism") {
  const ExperimentConfig c = parse_config(small_gauss());
  RunResult a = run_experiment(c, {true, false});
  const RunResult b = run_experiment(c, {true, false});
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].experiment == b.rows[i].experiment);
    CHECK(a.rows[i].estimate == b.rows[i].estimate);
    CHECK(a.rows[i].wall_ms == 0.0);
  }
  CHECK(a.rows.front().seed == 0);
  CHECK(a.rows.back().seed == 1);
  CHECK(a.summary["series"].contains("gauss-entropy:knife"));
  CHECK(a.summary["series"].contains("gauss-entropy:doe"));

  ExperimentConfig strict = c;
  strict.check = {{"gauss-entropy:doe", {{"max_abs_error", 1e-12}}}};
  apply_checks(strict, a);
  CHECK_FALSE(a.check_passed);
  REQUIRE(a.check_messages.size() == 1);
  CHECK(a.check_messages[0].rfind("FAIL", 0) == 0);

  RunResult loose = b;
  ExperimentConfig lenient = c;
  lenient.check = {{"gauss-entropy:doe", {{"max_abs_error", 100.0}}}};
  apply_checks(lenient, loose);
  CHECK(loose.check_passed);

  ExperimentConfig missing = c;
  missing.check = {{"gauss-entropy:parzen", {{"max_abs_error", 1.0}}}};
  RunResult m = b;
  CHECK_THROWS_AS(apply_checks(missing, m), ConfigError);

  const auto dir = scratch("run");
  ExperimentConfig out = c;
  out.output = dir;
  write_outputs(out, b);
  CHECK(std::filesystem::exists(dir / "results.csv"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  CHECK(read_results_csv(dir / "results.csv").size() == b.rows.size());
}

TEST_CASE("bounds-scan run") {
  ExperimentConfig c = load_config(std::filesystem::path(KNIFE_CONFIG_DIR) / "bounds-scan.json");
  RunResult r = run_experiment(c, {true, false});
  apply_checks(c, r);
  CHECK(r.check_passed);
  CHECK(r.summary["bounds"]["schedule_monotone_nonincreasing"].get<bool>());
  CHECK(r.bound_rows.size() == c.bounds.n_count + 3 * 3 * 3 * 2);
}

TEST_CASE("gradcheck suite covers every kind") {
  const auto results = run_gradcheck_suite(8, 42, 1e-5);
  REQUIRE(results.size() == 8);
  std::set<std::string> kinds;
  for (const auto& r : results) {
    kinds.insert(r.kind);
    CHECK(r.max_relative_error < 1e-5);
  }
  CHECK(kinds.size() == 4);
}
