#include <doctest.h>

#include <filesystem>

#include "hkflow/error.hpp"
#include "hkflow/experiment.hpp"
#include "hkflow/io.hpp"

using namespace hkflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hkflow_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("number formatting keeps 12 significant digits") {
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(NAN) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
  CHECK(round12(2.0 / 3.0) == 0.666666666667);
  CHECK(json(round12(1.0 / 7.0)).dump() == "0.142857142857");
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("measure and entropy JSON round trips") {
  auto d = GridDomain::interval(0, 2, 5);
  DiscreteMeasure mu(d, Eigen::VectorXd::LinSpaced(5, 0.25, 1.25));
  const auto back = measure_from_json(measure_to_json(mu));
  CHECK(*back.domain() == *d);
  CHECK((back.density() - mu.density()).norm() == 0.0);
  for (const Entropy& e : {Entropy::power_mass(1.0, 2.0, -1.0), Entropy::neg_power(0.5, 2.0),
                           Entropy::capped(-1.0, 1e-3), Entropy::custom_table({0, 1, 2}, {0, -0.5, 0.5}, 0.0)}) {
    const Entropy r = entropy_from_json(entropy_to_json(e));
    for (double c : {0.1, 0.5, 0.9}) CHECK(r.value(c) == doctest::Approx(e.value(c)));
  }
}

TEST_CASE("profiles and strict field checking") {
  const json j = json::parse(R"({"domain": {"lower": [0], "upper": [1], "nodes": [11]},
                                 "profile": {"kind": "diracs", "points": [{"x": [0.3], "mass": 2.0}]}})");
  const auto mu = measure_from_json(j);
  CHECK(total_mass(mu) == doctest::Approx(2.0));
  json bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(measure_from_json(bad), ConfigError);
  json off = j;
  off["profile"]["points"][0]["x"] = {0.33};
  CHECK_THROWS_AS(measure_from_json(off), ConfigError);
  CHECK_THROWS_AS(entropy_from_json(json::parse(R"({"family": "power_mass", "alpha": 1, "m": 2, "k": 1})")), ConfigError);
  CHECK_THROWS_AS(entropy_from_json(json::parse(R"({"family": "neg_power", "q": 2})")), ConfigError);
}

TEST_CASE("trajectory JSON round trip and step CSV") {
  auto d = GridDomain::interval(0, 1, 6);
  const auto tr = run_mm(Metric::HK, DiscreteMeasure(d, Eigen::VectorXd::LinSpaced(6, 0.4, 0.6)),
                         Entropy::power_mass(1.0, 2.0, -1.0), 0.05, 3);
  const auto back = trajectory_from_json(trajectory_to_json(tr));
  CHECK(back.steps() == 3);
  CHECK(back.tau == 0.05);
  CHECK((back.measures[3].density() - tr.measures[3].density()).lpNorm<Eigen::Infinity>() < 1e-11);
  const std::string csv = trajectory_steps_csv(tr);
  CHECK(csv.rfind("k,d2,energy,min_rho,max_rho,slope_surrogate,converged\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("atomic writes replace the target") {
  const auto dir = scratch_dir("atomic");
  write_file_atomic(dir / "a.txt", "one");
  write_file_atomic(dir / "a.txt", "two");
  CHECK(read_file(dir / "a.txt") == "two");
  int n = 0;
  for (auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  CHECK(n == 1);
}

TEST_CASE("experiment exit codes and manifest round trip") {
  const auto dir = scratch_dir("exp");
  write_file_atomic(dir / "empty.json", "{}");
  ExperimentConfig cfg;
  cfg.verb = "mm-run";
  cfg.config_path = dir / "empty.json";
  cfg.out_dir = dir / "o1";
  CHECK(run_experiment(cfg).exit_code == kExitConfig);
  cfg.config_path.reset();
  CHECK(run_experiment(cfg).exit_code == kExitConfig);

  write_file_atomic(dir / "dist.json", R"({"mu0": {"domain": {"lower": [0], "upper": [1], "nodes": [11]},
    "profile": {"kind": "diracs", "points": [{"x": [0.2], "mass": 1.0}]}},
    "mu1": {"domain": {"lower": [0], "upper": [1], "nodes": [11]},
    "profile": {"kind": "diracs", "points": [{"x": [0.7], "mass": 2.0}]}}})");
  cfg.verb = "distance";
  cfg.config_path = dir / "dist.json";
  cfg.out_dir = dir / "o2";
  const auto r = run_experiment(cfg);
  REQUIRE(r.exit_code == kExitOk);
  const json out = read_json_file(dir / "o2" / "distance.json");
  CHECK(out["distance_squared"].get<double>() == doctest::Approx(3.0 - 2.0 * std::sqrt(2.0) * std::cos(0.5)));
  CHECK(verify_manifest(dir / "o2").ok);
  write_file_atomic(dir / "o2" / "distance.json", "{}");
  CHECK_FALSE(verify_manifest(dir / "o2").ok);

  ExperimentConfig ap;
  ap.verb = "appendix-check";
  ap.p = 0.4;
  ap.out_dir = dir / "o3";
  const auto a = run_experiment(ap);
  CHECK(a.exit_code == kExitAssertion);
  CHECK(read_json_file(dir / "o3" / "appendix.json")["witness_delta"].get<double>() > 3.0);

  ExperimentConfig bad;
  bad.verb = "nonsense";
  CHECK(run_experiment(bad).exit_code == kExitConfig);
}
