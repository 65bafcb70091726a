// Command-line front end: one subcommand per experiment verb.
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <map>

#include "hkflow/experiment.hpp"

using hkflow::ExperimentConfig;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("hkflow");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("HKFLOW_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
}

const std::map<std::string, std::string> kDescriptions{
    {"distance", "HK^2 (and SHK for unit masses) between two measures"},
    {"mm-run", "minimizing movement trajectory with density-bound checks"},
    {"evi-check", "integrated EVI residuals and error budget of a trajectory"},
    {"pde-compare", "L1 gap between MM trajectories and the PDE across tau"},
    {"geometry-probe", "angle, LAC, Cauchy-Schwarz and midpoint sweeps"},
    {"appendix-check", "Q_p transfer estimate for one exponent"},
    {"convergence-study", "tau-halving study with EVI residual columns"},
    {"verify-manifest", "recompute output hashes listed in manifest.json"},
};

void common_flags(CLI::App* sub, ExperimentConfig& cfg, std::string& config, std::string& out,
                  std::uint64_t& seed) {
  sub->add_option("--config", config, "JSON config file");
  sub->add_option("--out", out, "output directory")->capture_default_str();
  sub->add_option("--seed", seed, "seed for randomized suites");
  sub->add_option("--tol-scale", cfg.tol_scale, "multiplier for assertion tolerances")->capture_default_str();
  sub->add_option("--jobs", cfg.jobs, "concurrent sub-runs")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Hellinger-Kantorovich gradient-flow experiments"};
  app.require_subcommand(1);
  ExperimentConfig cfg;
  std::string config, out = "out", trajectory, observers, space, check;
  std::uint64_t seed = 0;
  double lambda = 0.0, p = 0.0;

  std::vector<CLI::App*> subs;
  for (const auto& verb : hkflow::experiment_verbs()) {
    auto* sub = app.add_subcommand(verb, kDescriptions.at(verb));
    common_flags(sub, cfg, config, out, seed);
    subs.push_back(sub);
    if (verb == "evi-check") {
      sub->add_option("--trajectory", trajectory, "trajectory JSON from mm-run");
      sub->add_option("--observers", observers, "observer list JSON");
      sub->add_option("--lambda", lambda, "convexity modulus");
    } else if (verb == "geometry-probe") {
      sub->add_option("--space", space, "euclid | cone | hk2");
      sub->add_option("--check", check, "lac | cs | kappa | midpoint | appendix");
    } else if (verb == "appendix-check") {
      sub->add_option("--p", p, "exponent p");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hkflow::kExitConfig;
  }
  CLI::App* sub = nullptr;
  for (auto* s : subs)
    if (s->parsed()) sub = s;
  cfg.verb = sub->get_name();
  if (sub->count("--config")) cfg.config_path = config;
  cfg.out_dir = out;
  if (sub->count("--seed")) cfg.seed = seed;
  if (cfg.verb == "evi-check") {
    if (sub->count("--trajectory")) cfg.trajectory = trajectory;
    if (sub->count("--observers")) cfg.observers = observers;
    if (sub->count("--lambda")) cfg.lambda = lambda;
  } else if (cfg.verb == "geometry-probe") {
    if (sub->count("--space")) cfg.space = space;
    if (sub->count("--check")) cfg.check = check;
  } else if (cfg.verb == "appendix-check") {
    if (sub->count("--p")) cfg.p = p;
  }

  const auto res = hkflow::run_experiment(cfg, [](int level, const std::string& msg) {
    if (level == 0) spdlog::error(msg);
    else if (level == 1) spdlog::info(msg);
    else spdlog::debug(msg);
  });
  if (!res.message.empty()) spdlog::error(res.message);
  for (const auto& f : res.files) spdlog::info("wrote {}", (cfg.out_dir / f).string());
  if (res.exit_code == hkflow::kExitAssertion)
    spdlog::error("{} assertion(s) failed", res.failures.size());
  return res.exit_code;
}
