/// Experiment runner behind the command-line verbs: config parsing, sweeps, reports, manifests.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hkflow/io.hpp"

namespace hkflow {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode { kExitOk = 0, kExitAssertion = 1, kExitConfig = 2, kExitSolver = 3 };

// distance | mm-run | evi-check | pde-compare | geometry-probe | appendix-check |
// convergence-study | verify-manifest
const std::vector<std::string>& experiment_verbs();

struct ExperimentConfig {
  std::string verb;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  double tol_scale = 1.0;
  int jobs = 1;
  // Verb flags; each may also be given in the config file.
  std::optional<std::filesystem::path> trajectory;
  std::optional<std::filesystem::path> observers;
  std::optional<double> lambda;
  std::optional<std::string> space;
  std::optional<std::string> check;
  std::optional<double> p;
};

struct ExperimentResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;     // written reports, relative to out_dir
  std::vector<std::string> failures;  // failed assertions
  std::string message;                // error text for exit codes 2 and 3
};

// level: 0 error, 1 info, 2 debug.
using LogFn = std::function<void(int level, const std::string& msg)>;

// Never throws for config, solver or assertion problems; those map to exit codes.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogFn& log = {});

}  // namespace hkflow
