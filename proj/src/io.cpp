#include "hkflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "hkflow/error.hpp"

namespace hkflow {

namespace fs = std::filesystem;

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

double round12(double x) {
  if (!std::isfinite(x) || x == 0.0) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

json number_json(double x) {
  if (std::isfinite(x)) return round12(x);
  return format_number(x);
}

namespace {

double number_from_json(const json& j, const std::string& context) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ConfigError(context + ": expected a number");
}

std::vector<double> numbers_from_json(const json& j, const std::string& context) {
  if (!j.is_array()) throw ConfigError(context + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) v.push_back(number_from_json(x, context));
  return v;
}

json numbers_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(number_json(v[i]));
  return a;
}

json numbers_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

double get_number(const json& obj, const char* key, const std::string& context) {
  return number_from_json(require_field(obj, key, context), context + "." + key);
}

double get_number_or(const json& obj, const char* key, double fallback, const std::string& context) {
  return obj.contains(key) ? number_from_json(obj.at(key), context + "." + key) : fallback;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void check_fields(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context) {
  if (!obj.is_object()) throw ConfigError(context + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(context + ": unknown field '" + it.key() + "'");
  }
}

const json& require_field(const json& obj, const char* key, const std::string& context) {
  if (!obj.is_object() || !obj.contains(key))
    throw ConfigError(context + ": missing field '" + key + "'");
  return obj.at(key);
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw InvalidArgument("CSV row width mismatch");
  rows_.push_back(cells);
}

std::string CsvTable::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return os.str();
}

DomainPtr domain_from_json(const json& j) {
  const std::string ctx = "domain";
  check_fields(j, {"lower", "upper", "nodes"}, ctx);
  const auto lo = numbers_from_json(require_field(j, "lower", ctx), ctx + ".lower");
  const auto hi = numbers_from_json(require_field(j, "upper", ctx), ctx + ".upper");
  const json& nj = require_field(j, "nodes", ctx);
  if (!nj.is_array()) throw ConfigError("domain.nodes: expected an array");
  std::vector<int> nodes;
  for (const auto& x : nj) {
    if (!x.is_number_integer()) throw ConfigError("domain.nodes: expected integers");
    nodes.push_back(x.get<int>());
  }
  try {
    return std::make_shared<const GridDomain>(lo, hi, nodes);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }
}

json domain_to_json(const GridDomain& d) {
  json nodes = json::array();
  for (int n : d.nodes()) nodes.push_back(n);
  return {{"lower", numbers_json(d.lower())}, {"upper", numbers_json(d.upper())}, {"nodes", nodes}};
}

namespace {

Eigen::VectorXd profile_density(const GridDomain& dom, const json& p) {
  const std::string ctx = "profile";
  if (!p.is_object()) throw ConfigError("profile: expected an object");
  const std::string kind = require_field(p, "kind", ctx).get<std::string>();
  const int n = dom.size();
  const Eigen::MatrixXd& x = dom.coords();
  Eigen::VectorXd rho(n);
  if (kind == "uniform") {
    check_fields(p, {"kind", "value"}, ctx);
    rho.setConstant(get_number(p, "value", ctx));
  } else if (kind == "cosine") {
    check_fields(p, {"kind", "base", "amplitude", "frequency"}, ctx);
    const double base = get_number(p, "base", ctx), amp = get_number(p, "amplitude", ctx);
    const double freq = get_number_or(p, "frequency", 1.0, ctx);
    const double a = dom.lower()[0], len = dom.upper()[0] - dom.lower()[0];
    for (int i = 0; i < n; ++i) rho[i] = base + amp * std::cos(M_PI * freq * (x(i, 0) - a) / len);
  } else if (kind == "bump") {
    check_fields(p, {"kind", "base", "height", "center", "width"}, ctx);
    const double base = get_number(p, "base", ctx), height = get_number(p, "height", ctx);
    const double width = get_number(p, "width", ctx);
    const auto c = numbers_from_json(require_field(p, "center", ctx), "profile.center");
    if (static_cast<int>(c.size()) != dom.dim()) throw ConfigError("profile.center: wrong dimension");
    for (int i = 0; i < n; ++i) {
      double r2 = 0.0;
      for (int k = 0; k < dom.dim(); ++k) r2 += (x(i, k) - c[k]) * (x(i, k) - c[k]);
      rho[i] = base + height * std::exp(-r2 / (2.0 * width * width));
    }
  } else if (kind == "two_level") {
    check_fields(p, {"kind", "low", "high", "split"}, ctx);
    const double lo = get_number(p, "low", ctx), hi = get_number(p, "high", ctx);
    const double split = get_number(p, "split", ctx);
    for (int i = 0; i < n; ++i) rho[i] = x(i, 0) < split ? lo : hi;
  } else if (kind == "diracs") {
    check_fields(p, {"kind", "points"}, ctx);
    rho.setZero();
    for (const auto& pt : require_field(p, "points", ctx)) {
      check_fields(pt, {"x", "mass"}, "profile.points");
      const auto xv = numbers_from_json(require_field(pt, "x", "profile.points"), "profile.points.x");
      if (static_cast<int>(xv.size()) != dom.dim()) throw ConfigError("profile.points.x: wrong dimension");
      const int k = dom.find_node(Eigen::Map<const Eigen::VectorXd>(xv.data(), dom.dim()), 1e-9);
      if (k < 0) throw ConfigError("profile.points.x: not a grid node");
      rho[k] += get_number(pt, "mass", "profile.points") / dom.weights()[k];
    }
  } else {
    throw ConfigError("profile: unknown kind '" + kind + "'");
  }
  return rho;
}

}  // namespace

DiscreteMeasure measure_from_json(const json& j) {
  const std::string ctx = "measure";
  check_fields(j, {"domain", "density", "profile", "normalize"}, ctx);
  DomainPtr dom = domain_from_json(require_field(j, "domain", ctx));
  Eigen::VectorXd rho;
  if (j.contains("density") == j.contains("profile"))
    throw ConfigError("measure: give exactly one of 'density' or 'profile'");
  if (j.contains("density")) {
    const auto v = numbers_from_json(j.at("density"), "measure.density");
    if (static_cast<int>(v.size()) != dom->size()) throw ConfigError("measure.density: wrong length");
    rho = Eigen::Map<const Eigen::VectorXd>(v.data(), dom->size());
  } else {
    rho = profile_density(*dom, j.at("profile"));
  }
  try {
    DiscreteMeasure mu(dom, rho);
    if (j.value("normalize", false)) mu = normalize(mu);
    return mu;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("measure: ") + e.what());
  }
}

json measure_to_json(const DiscreteMeasure& mu) {
  return {{"domain", domain_to_json(*mu.domain())}, {"density", numbers_json(mu.density())}};
}

Entropy entropy_from_json(const json& j) {
  const std::string ctx = "entropy";
  if (!j.is_object()) throw ConfigError("entropy: expected an object");
  const std::string fam = require_field(j, "family", ctx).get<std::string>();
  try {
    Entropy e;
    if (fam == "zero") {
      check_fields(j, {"family"}, ctx);
    } else if (fam == "power_mass") {
      check_fields(j, {"family", "alpha", "m", "gamma", "c_low"}, ctx);
      e = Entropy::power_mass(get_number(j, "alpha", ctx), get_number(j, "m", ctx),
                              get_number_or(j, "gamma", 0.0, ctx));
    } else if (fam == "neg_power") {
      check_fields(j, {"family", "q", "beta", "c_low"}, ctx);
      e = Entropy::neg_power(get_number(j, "q", ctx), get_number_or(j, "beta", 1.0, ctx));
    } else if (fam == "custom_table") {
      check_fields(j, {"family", "c", "e", "lambda", "c_low"}, ctx);
      e = Entropy::custom_table(numbers_from_json(require_field(j, "c", ctx), "entropy.c"),
                                numbers_from_json(require_field(j, "e", ctx), "entropy.e"),
                                get_number_or(j, "lambda", 0.0, ctx));
    } else if (fam == "capped") {
      check_fields(j, {"family", "gamma", "eps", "c_low"}, ctx);
      e = Entropy::capped(get_number(j, "gamma", ctx), get_number_or(j, "eps", 1e-3, ctx));
    } else {
      throw ConfigError("entropy: unknown family '" + fam + "'");
    }
    if (j.contains("c_low")) e = e.with_c_low(get_number(j, "c_low", ctx));
    return e;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("entropy: ") + e.what());
  }
}

json entropy_to_json(const Entropy& e) {
  json j;
  switch (e.family()) {
    case EntropyFamily::PowerMass:
      j = {{"family", "power_mass"},
           {"alpha", number_json(e.param(0))},
           {"m", number_json(e.param(1))},
           {"gamma", number_json(e.param(2))}};
      break;
    case EntropyFamily::NegPower:
      j = {{"family", "neg_power"}, {"q", number_json(e.param(1))}, {"beta", number_json(e.param(0))}};
      break;
    case EntropyFamily::CustomTable:
      j = {{"family", "custom_table"},
           {"c", numbers_json(e.table_c())},
           {"e", numbers_json(e.table_e())},
           {"lambda", number_json(e.lambda())}};
      break;
    case EntropyFamily::Capped:
      j = {{"family", "capped"}, {"gamma", number_json(e.param(0))}, {"eps", number_json(e.param(1))}};
      break;
  }
  if (e.c_low()) j["c_low"] = number_json(*e.c_low());
  return j;
}

json trajectory_to_json(const MMTrajectory& traj) {
  json dens = json::array();
  for (const auto& m : traj.measures) dens.push_back(numbers_json(m.density()));
  json j = {{"metric", metric_name(traj.metric)},
            {"tau", number_json(traj.tau)},
            {"entropy", entropy_to_json(traj.entropy)},
            {"domain", traj.measures.empty() ? json(nullptr) : domain_to_json(*traj.measures[0].domain())},
            {"times", numbers_json(traj.times)},
            {"energies", numbers_json(traj.energies)},
            {"step_distance_sq", numbers_json(traj.step_distance_sq)},
            {"stationarity", numbers_json(traj.stationarity)},
            {"objective", numbers_json(traj.objective)},
            {"densities", dens}};
  return j;
}

MMTrajectory trajectory_from_json(const json& j) {
  const std::string ctx = "trajectory";
  check_fields(j, {"metric", "tau", "entropy", "domain", "times", "energies", "step_distance_sq",
                   "stationarity", "objective", "densities"},
               ctx);
  MMTrajectory t;
  try {
    t.metric = parse_metric(require_field(j, "metric", ctx).get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("trajectory: ") + e.what());
  }
  t.tau = get_number(j, "tau", ctx);
  if (!(t.tau > 0.0)) throw ConfigError("trajectory.tau must be positive");
  t.entropy = entropy_from_json(require_field(j, "entropy", ctx));
  DomainPtr dom = domain_from_json(require_field(j, "domain", ctx));
  for (const auto& row : require_field(j, "densities", ctx)) {
    const auto v = numbers_from_json(row, "trajectory.densities");
    if (static_cast<int>(v.size()) != dom->size()) throw ConfigError("trajectory.densities: wrong length");
    try {
      t.measures.emplace_back(dom, Eigen::Map<const Eigen::VectorXd>(v.data(), dom->size()));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("trajectory.densities: ") + e.what());
    }
  }
  if (t.measures.empty()) throw ConfigError("trajectory: no densities");
  const std::size_t n = t.measures.size();
  auto series = [&](const char* key) {
    auto v = j.contains(key) ? numbers_from_json(j.at(key), ctx + "." + key) : std::vector<double>{};
    if (!v.empty() && v.size() != n) throw ConfigError(ctx + "." + key + ": wrong length");
    return v;
  };
  t.times = series("times");
  t.energies = series("energies");
  t.step_distance_sq = series("step_distance_sq");
  t.stationarity = series("stationarity");
  t.objective = series("objective");
  if (t.times.empty())
    for (std::size_t k = 0; k < n; ++k) t.times.push_back(k * t.tau);
  if (t.energies.empty())
    for (const auto& m : t.measures) t.energies.push_back(t.entropy.functional(m));
  return t;
}

std::string trajectory_steps_csv(const MMTrajectory& traj) {
  CsvTable csv({"k", "d2", "energy", "min_rho", "max_rho", "slope_surrogate", "converged"});
  for (int k = 0; k <= traj.steps(); ++k) {
    const double d2 = k < static_cast<int>(traj.step_distance_sq.size()) ? traj.step_distance_sq[k] : 0.0;
    // run_mm rejects steps that miss their stationarity tolerance.
    const bool conv = true;
    csv.add_row({std::to_string(k), format_number(d2), format_number(traj.energies[k]),
                 format_number(traj.measures[k].min_density()),
                 format_number(traj.measures[k].max_density()),
                 format_number(std::sqrt(std::max(d2, 0.0)) / traj.tau), conv ? "1" : "0"});
  }
  return csv.str();
}

LetOptions let_options_from_json(const json& j) {
  LetOptions o;
  if (j.is_null()) return o;
  const std::string ctx = "solver.let";
  check_fields(j, {"tol", "gap_tol", "eps_schedule", "max_sweeps", "max_newton"}, ctx);
  o.tol = get_number_or(j, "tol", o.tol, ctx);
  o.gap_tol = get_number_or(j, "gap_tol", o.gap_tol, ctx);
  if (j.contains("eps_schedule")) o.eps_schedule = numbers_from_json(j.at("eps_schedule"), ctx + ".eps_schedule");
  o.max_sweeps = j.value("max_sweeps", o.max_sweeps);
  o.max_newton = j.value("max_newton", o.max_newton);
  return o;
}

MMOptions mm_options_from_json(const json& j) {
  MMOptions o;
  if (j.is_null()) return o;
  const std::string ctx = "solver";
  check_fields(j, {"tol_g", "restarts", "seed", "verify", "density_floor", "let"}, ctx);
  o.tol_g = get_number_or(j, "tol_g", o.tol_g, ctx);
  o.density_floor = get_number_or(j, "density_floor", o.density_floor, ctx);
  o.restarts = j.value("restarts", o.restarts);
  o.seed = j.value("seed", o.seed);
  o.verify = j.value("verify", o.verify);
  if (j.contains("let")) o.let = let_options_from_json(j.at("let"));
  return o;
}

ManifestCheck verify_manifest(const fs::path& dir) {
  ManifestCheck c;
  json m;
  try {
    m = read_json_file(dir / "manifest.json");
  } catch (const ConfigError& e) {
    c.ok = false;
    c.problems.push_back(e.what());
    return c;
  }
  if (!m.contains("outputs") || !m.at("outputs").is_object()) {
    c.ok = false;
    c.problems.push_back("manifest has no outputs table");
    return c;
  }
  for (auto it = m.at("outputs").begin(); it != m.at("outputs").end(); ++it) {
    const fs::path p = dir / it.key();
    if (!fs::exists(p)) {
      c.ok = false;
      c.problems.push_back("missing " + it.key());
      continue;
    }
    if (hex64(fnv1a64(read_file(p))) != it.value().get<std::string>()) {
      c.ok = false;
      c.problems.push_back("hash mismatch for " + it.key());
    }
  }
  return c;
}

}  // namespace hkflow
