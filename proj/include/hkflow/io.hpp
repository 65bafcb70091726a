/// JSON/CSV persistence for measures, entropies and trajectories; atomic writes and manifests.
#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <json.hpp>
#include <string>
#include <vector>

#include "hkflow/entropy.hpp"
#include "hkflow/mm.hpp"

namespace hkflow {

using json = nlohmann::json;

// Decimal form with 12 significant digits ("nan", "inf", "-inf" for non-finite values).
std::string format_number(double x);
// x rounded to 12 significant digits, so that JSON output carries at most 12 digits.
double round12(double x);
json number_json(double x);  // round12, or the strings above for non-finite values

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t h);

// Writes to a sibling temporary file, then renames over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
// Throws ConfigError on unreadable or malformed JSON.
json read_json_file(const std::filesystem::path& path);

// Throws ConfigError if obj is not an object or has a key outside allowed.
void check_fields(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context);
const json& require_field(const json& obj, const char* key, const std::string& context);

/// Simple CSV table with a fixed header; numbers use format_number.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(const std::vector<std::string>& cells);
  std::string str() const;
  static std::string cell(double x) { return format_number(x); }
  static std::string cell(long x) { return std::to_string(x); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// {"lower": [...], "upper": [...], "nodes": [...]}
DomainPtr domain_from_json(const json& j);
json domain_to_json(const GridDomain& d);

// {"domain": ..., "density": [...]} or {"domain": ..., "profile": {...}}. Profiles:
//   uniform {value}; cosine {base, amplitude, frequency = 1} (axis 0);
//   bump {base, height, center, width}; two_level {low, high, split} (axis 0);
//   diracs {points: [{x: [...], mass}]} (each point must be a grid node).
// Optional "normalize": true rescales to unit mass.
DiscreteMeasure measure_from_json(const json& j);
json measure_to_json(const DiscreteMeasure& mu);

// {"family": "power_mass", "alpha", "m", "gamma"} | {"family": "neg_power", "q", "beta"} |
// {"family": "custom_table", "c": [...], "e": [...], "lambda"} |
// {"family": "capped", "gamma", "eps"}; optional "c_low".
Entropy entropy_from_json(const json& j);
json entropy_to_json(const Entropy& e);

json trajectory_to_json(const MMTrajectory& traj);
MMTrajectory trajectory_from_json(const json& j);

// Per-step CSV: k, d2, energy, min_rho, max_rho, slope_surrogate, converged.
std::string trajectory_steps_csv(const MMTrajectory& traj);

// Optional solver block {"tol_g", "restarts", "seed", "verify", "let": {"tol", "gap_tol",
// "eps_schedule", "max_sweeps", "max_newton"}}.
MMOptions mm_options_from_json(const json& j);
LetOptions let_options_from_json(const json& j);

struct ManifestCheck {
  bool ok = true;
  std::vector<std::string> problems;
};
// manifest.json lists every output file with its FNV-1a hash.
ManifestCheck verify_manifest(const std::filesystem::path& dir);

}  // namespace hkflow
