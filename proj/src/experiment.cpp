#include "hkflow/experiment.hpp"

#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include "hkflow/error.hpp"
#include "hkflow/evi.hpp"
#include "hkflow/geometry.hpp"
#include "hkflow/hk.hpp"
#include "hkflow/pde.hpp"

namespace hkflow {

namespace fs = std::filesystem;

namespace {

// Collects outputs and failed assertions for one run.
class Run {
 public:
  Run(const ExperimentConfig& cfg, const LogFn& log) : cfg_(cfg), log_(log) {}

  void info(const std::string& m) const {
    if (log_) log_(1, m);
  }
  void debug(const std::string& m) const {
    if (log_) log_(2, m);
  }

  void write(const std::string& name, const std::string& content) {
    write_file_atomic(cfg_.out_dir / name, content);
    files_.push_back(name);
    hashes_[name] = hex64(fnv1a64(content));
    debug("wrote " + (cfg_.out_dir / name).string());
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  void require(bool ok, const std::string& what) {
    if (!ok) {
      failures_.push_back(what);
      if (log_) log_(0, "assertion failed: " + what);
    }
  }

  double tol_scale() const { return cfg_.tol_scale; }
  const ExperimentConfig& cfg() const { return cfg_; }
  std::vector<std::string>& files() { return files_; }
  std::vector<std::string>& failures() { return failures_; }
  const json& hashes() const { return hashes_; }

 private:
  const ExperimentConfig& cfg_;
  const LogFn& log_;
  std::vector<std::string> files_, failures_;
  json hashes_ = json::object();
};

// Runs fn(i) for i < n with at most jobs tasks in flight; results in index order.
template <class T, class F>
std::vector<T> parallel_map(int n, int jobs, F fn) {
  std::vector<T> out(n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  for (int start = 0; start < n; start += jobs) {
    std::vector<std::future<T>> fut;
    for (int i = start; i < std::min(n, start + jobs); ++i) fut.push_back(std::async(std::launch::async, fn, i));
    for (int i = start; i < std::min(n, start + jobs); ++i) out[i] = fut[i - start].get();
  }
  return out;
}

json numbers_json_vec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_json(x));
  return a;
}

double get_double(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_number()) throw ConfigError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

double get_double_or(const json& j, const char* key, double fallback, const std::string& ctx) {
  return j.contains(key) ? get_double(j, key, ctx) : fallback;
}

std::vector<double> get_doubles(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_array() || v.empty()) throw ConfigError(ctx + "." + key + ": expected a nonempty array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(ctx + "." + key + ": expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Metric get_metric(const json& j, const std::string& ctx) {
  if (!j.contains("metric")) return Metric::HK;
  try {
    return parse_metric(j.at("metric").get<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(ctx + ".metric: " + e.what());
  }
}

json load_config(const ExperimentConfig& cfg, bool required) {
  if (!cfg.config_path) {
    if (required) throw ConfigError(cfg.verb + " needs --config");
    return json::object();
  }
  const std::string text = read_file(*cfg.config_path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(cfg.config_path->string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (required && j.empty()) throw ConfigError("config is empty");
  return j;
}

MMOptions solver_options(const json& j, const Run& run) {
  MMOptions o = mm_options_from_json(j.contains("solver") ? j.at("solver") : json(nullptr));
  o.tol_g *= run.tol_scale();
  if (run.cfg().seed) o.seed = *run.cfg().seed;
  return o;
}

json bound_json(const BoundCheck& b) {
  return {{"name", b.name},
          {"applicable", b.applicable},
          {"holds", b.holds},
          {"worst_margin", number_json(b.worst_margin)},
          {"worst_step", b.worst_step},
          {"note", b.note}};
}

// Single positive node of a measure, if there is exactly one.
std::optional<int> single_atom(const DiscreteMeasure& mu) {
  std::optional<int> k;
  for (int i = 0; i < mu.size(); ++i)
    if (mu.density(i) > 0.0) {
      if (k) return std::nullopt;
      k = i;
    }
  return k;
}

void verb_distance(Run& run) {
  const json j = load_config(run.cfg(), true);
  const std::string ctx = "distance";
  check_fields(j, {"mu0", "mu1", "metric", "let"}, ctx);
  const DiscreteMeasure mu0 = measure_from_json(require_field(j, "mu0", ctx));
  const DiscreteMeasure mu1 = measure_from_json(require_field(j, "mu1", ctx));
  const Metric m = get_metric(j, ctx);
  const LetOptions let = let_options_from_json(j.contains("let") ? j.at("let") : json(nullptr));
  if (*mu0.domain() != *mu1.domain()) throw ConfigError("mu0 and mu1 live on different grids");
  const double m0 = total_mass(mu0), m1 = total_mass(mu1);
  json out = {{"metric", metric_name(m)}, {"mass0", number_json(m0)}, {"mass1", number_json(m1)}};
  const LetResult r = hk_distance_squared(mu0, mu1, let);
  if (!r.converged) throw SolverFailure("distance solver did not converge");
  double d2 = r.value;
  if (m == Metric::SHK) {
    if (std::abs(m0 - 1.0) > 1e-8 || std::abs(m1 - 1.0) > 1e-8)
      throw ConfigError("SHK needs unit-mass measures");
    d2 = std::pow(shk_from_hk(std::sqrt(std::max(r.value, 0.0))), 2);
  }
  out["hk_squared"] = number_json(r.value);
  out["distance_squared"] = number_json(d2);
  out["distance"] = number_json(std::sqrt(std::max(d2, 0.0)));
  out["dual_value"] = number_json(r.dual_value);
  out["gap"] = number_json(r.gap);
  out["exact"] = r.exact;
  const double lower = hk_mass_lower_bound(mu0, mu1);
  out["mass_lower_bound"] = number_json(lower);
  run.require(r.value >= lower - 1e-8 * run.tol_scale(), "HK^2 below the mass lower bound");
  const auto a0 = single_atom(mu0), a1 = single_atom(mu1);
  if (a0 && a1) {
    const double a = mu0.masses()[*a0], b = mu1.masses()[*a1];
    const double cf = hk_two_dirac(a, b, mu0.domain()->distance(*a0, *a1));
    const double cf_m = m == Metric::HK ? cf : std::pow(shk_from_hk(std::sqrt(cf)), 2);
    out["closed_form"] = number_json(cf_m);
    out["closed_form_error"] = number_json(std::abs(cf_m - d2));
    run.require(std::abs(cf_m - d2) <= 1e-5 * run.tol_scale(), "two-Dirac closed form mismatch");
  }
  run.write_json("distance.json", out);
}

void verb_mm_run(Run& run) {
  const json j = load_config(run.cfg(), true);
  const std::string ctx = "mm-run";
  check_fields(j, {"metric", "entropy", "mu0", "tau", "steps", "solver", "bounds"}, ctx);
  const Metric m = get_metric(j, ctx);
  const Entropy e = entropy_from_json(require_field(j, "entropy", ctx));
  DiscreteMeasure mu0 = measure_from_json(require_field(j, "mu0", ctx));
  const double tau = get_double(j, "tau", ctx);
  const json& sj = require_field(j, "steps", ctx);
  if (!sj.is_number_integer() || sj.get<int>() < 0) throw ConfigError("mm-run.steps: expected a nonnegative integer");
  const int steps = sj.get<int>();
  if (!(tau > 0.0)) throw ConfigError("mm-run.tau must be positive");
  if (e.lambda() < 0.0 && !(tau * e.lambda() > -0.5)) throw ConfigError("mm-run needs tau lambda > -1/2");
  if (m == Metric::SHK && std::abs(total_mass(mu0) - 1.0) > 1e-8)
    throw ConfigError("SHK runs need a unit-mass initial measure");
  HKBoundParams bp;
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    check_fields(b, {"c_upp", "c_low", "e_star", "c_star", "slack"}, ctx + ".bounds");
    if (b.contains("c_upp")) bp.c_upp = get_double(b, "c_upp", ctx);
    if (b.contains("c_low")) bp.c_low = get_double(b, "c_low", ctx);
    if (b.contains("e_star")) bp.e_star = get_double(b, "e_star", ctx);
    if (b.contains("c_star")) bp.c_star = get_double(b, "c_star", ctx);
    bp.slack = get_double_or(b, "slack", bp.slack, ctx);
  }
  bp.slack *= run.tol_scale();
  MMOptions opt = solver_options(j, run);
  opt.keep_plans = true;
  run.info("mm-run: " + metric_name(m) + ", " + e.describe() + ", tau " + format_number(tau) +
           ", " + std::to_string(steps) + " steps");
  const MMTrajectory traj = run_mm(m, mu0, e, tau, steps, opt);

  const double slack = 1e-9 * run.tol_scale();
  for (int k = 1; k <= steps; ++k) {
    run.require(traj.objective[k] <= traj.energies[k - 1] + slack * (1.0 + std::abs(traj.energies[k - 1])),
                "step " + std::to_string(k) + ": minimizer does not beat the stay-put candidate");
    if (m == Metric::SHK)
      run.require(std::abs(total_mass(traj.measures[k]) - 1.0) <= 1e-8,
                  "step " + std::to_string(k) + ": SHK mass drift");
  }
  json bounds = json::array();
  const auto checks = m == Metric::HK ? check_density_bounds_hk(traj, bp) : check_density_bounds_shk(traj, bp.slack);
  for (const auto& b : checks) {
    bounds.push_back(bound_json(b));
    if (b.applicable) run.require(b.holds, "density bound " + b.name);
  }
  json report = {{"bounds", bounds}};
  if (steps > 0) {
    const MonotoneReport mr = monotone_test_lemma_check(traj);
    report["monotone_violating_fraction"] = number_json(mr.violating_fraction);
    report["monotone_worst_step"] = mr.worst_step;
  }
  run.write_json("trajectory.json", trajectory_to_json(traj));
  run.write("steps.csv", trajectory_steps_csv(traj));
  run.write_json("bounds.json", report);
}

std::vector<Observer> observers_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("observers") ? j.at("observers") : j;
  if (!arr.is_array() || arr.empty()) throw ConfigError("observers: expected a nonempty array");
  std::vector<Observer> obs;
  for (const auto& o : arr) {
    check_fields(o, {"id", "measure"}, "observers");
    obs.push_back({require_field(o, "id", "observers").get<std::string>(),
                   measure_from_json(require_field(o, "measure", "observers"))});
  }
  return obs;
}

void verb_evi_check(Run& run) {
  const json j = load_config(run.cfg(), false);
  const std::string ctx = "evi-check";
  check_fields(j, {"trajectory", "observers", "lambda", "kappa", "let"}, ctx);
  std::optional<fs::path> tpath = run.cfg().trajectory;
  if (!tpath && j.contains("trajectory")) tpath = j.at("trajectory").get<std::string>();
  if (!tpath) throw ConfigError("evi-check needs --trajectory");
  const MMTrajectory traj = trajectory_from_json(read_json_file(*tpath));
  std::optional<fs::path> opath = run.cfg().observers;
  if (!opath && j.contains("observers")) opath = j.at("observers").get<std::string>();
  const std::vector<Observer> obs =
      opath ? observers_from_json(read_json_file(*opath)) : default_observers(traj.measures[0], traj.metric);
  for (const auto& o : obs)
    if (*o.mu.domain() != *traj.measures[0].domain()) throw ConfigError("observer " + o.id + " uses another grid");
  const double lambda = run.cfg().lambda ? *run.cfg().lambda : get_double_or(j, "lambda", traj.entropy.lambda(), ctx);
  const double kappa = get_double_or(j, "kappa", 0.0, ctx);
  const LetOptions let = let_options_from_json(j.contains("let") ? j.at("let") : json(nullptr));
  const EVIReport rep = evi_residual_integrated(traj.measures, traj.tau, obs, lambda, traj.entropy, traj.metric, let);
  CsvTable csv({"s", "t", "observer_id", "residual_lambda_star", "residual_lambda"});
  const int n = rep.samples();
  for (int o = 0; o < static_cast<int>(obs.size()); ++o)
    for (int s = 0; s < n; ++s)
      for (int t = s + 1; t < n; ++t)
        csv.add_row({format_number(s * traj.tau), format_number(t * traj.tau), rep.observer_ids[o],
                     format_number(rep.residual(s, t, o, true)), format_number(rep.residual(s, t, o, false))});
  const double c = metric_slope_squared(traj.measures[0], traj.entropy, traj.metric);
  const double bound = c * std::sqrt(traj.tau);
  json summary = {{"tau", number_json(traj.tau)},
                  {"steps", traj.steps()},
                  {"metric", metric_name(traj.metric)},
                  {"lambda", number_json(lambda)},
                  {"lambda_star", number_json(rep.lambda_star)},
                  {"quadrature", rep.quadrature},
                  {"observers", rep.observer_ids},
                  {"worst_residual_lambda_star", number_json(rep.worst_lambda_star)},
                  {"worst_residual_lambda", number_json(rep.worst_lambda)},
                  {"worst_at", {{"s", number_json(rep.worst_s * traj.tau)},
                                {"t", number_json(rep.worst_t * traj.tau)},
                                {"observer_id", rep.observer_ids[rep.worst_observer]}}},
                  {"slope_squared_initial", number_json(c)},
                  {"residual_bound", number_json(bound)}};
  run.require(rep.worst_lambda_star <= bound * run.tol_scale() + 1e-12,
              "worst EVI residual exceeds slope^2 sqrt(tau)");
  if (traj.steps() >= 1) {
    const ErrorBudget b = error_budget(traj, kappa, lambda, 0.0, let);
    summary["error_budget"] = {{"kappa", number_json(kappa)},
                               {"norm", number_json(b.norm)},
                               {"norm_zero_delta2", number_json(b.norm_zero)},
                               {"bound", number_json(b.bound)},
                               {"within_bound", b.within_bound}};
  }
  run.write("residuals.csv", csv.str());
  run.write_json("summary.json", summary);
}

struct TauRun {
  MMTrajectory traj;
  double gap = 0.0;
  double seconds = 0.0;
};

void verb_pde_compare(Run& run) {
  const json j = load_config(run.cfg(), true);
  const std::string ctx = "pde-compare";
  check_fields(j, {"metric", "entropy", "mu0", "taus", "T", "pde", "solver"}, ctx);
  const Metric m = get_metric(j, ctx);
  const Entropy e = entropy_from_json(require_field(j, "entropy", ctx));
  const DiscreteMeasure mu0 = measure_from_json(require_field(j, "mu0", ctx));
  const std::vector<double> taus = get_doubles(j, "taus", ctx);
  PdeConfig pc;
  pc.T = get_double(j, "T", ctx);
  if (j.contains("pde")) {
    const json& p = j.at("pde");
    check_fields(p, {"alpha", "beta", "safety", "dt"}, ctx + ".pde");
    pc.alpha = get_double_or(p, "alpha", pc.alpha, ctx);
    pc.beta = get_double_or(p, "beta", pc.beta, ctx);
    pc.safety = get_double_or(p, "safety", pc.safety, ctx);
    pc.dt = get_double_or(p, "dt", pc.dt, ctx);
  }
  std::vector<int> steps;
  for (double t : taus) {
    const double r = pc.T / t;
    if (!(t > 0.0) || std::abs(r - std::round(r)) > 1e-9 * r) throw ConfigError("each tau must divide T");
    steps.push_back(static_cast<int>(std::lround(r)));
  }
  const MMOptions opt = solver_options(j, run);
  const PdeTrajectory pde = m == Metric::HK ? solve_reaction_diffusion_hk(mu0, e, pc) : solve_shk_pde(mu0, e, pc);
  run.info("pde-compare: reference " + std::to_string(pde.steps) + " steps, dt " + format_number(pde.dt));
  const auto runs = parallel_map<TauRun>(static_cast<int>(taus.size()), run.cfg().jobs, [&](int i) {
    const auto t0 = std::chrono::steady_clock::now();
    TauRun r;
    r.traj = run_mm(m, mu0, e, taus[i], steps[i], opt);
    r.gap = compare_mm_to_pde(r.traj, pde, pc.T);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  });
  CsvTable csv({"tau", "L1_gap", "runtime"});
  json gaps = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    csv.add_row({format_number(taus[i]), format_number(runs[i].gap), format_number(runs[i].seconds)});
    gaps.push_back(number_json(runs[i].gap));
    run.info("tau " + format_number(taus[i]) + ": L1 gap " + format_number(runs[i].gap));
    if (i > 0 && !(runs[i].gap < runs[i - 1].gap)) monotone = false;
  }
  json verdict = {{"metric", metric_name(m)},
                  {"T", number_json(pc.T)},
                  {"taus", numbers_json_vec(taus)},
                  {"gaps", gaps},
                  {"monotone_decay", monotone},
                  {"pde_steps", pde.steps},
                  {"pde_dt", number_json(pde.dt)},
                  {"pde_halvings", pde.halvings}};
  run.require(monotone, "L1 gap does not decrease monotonically in tau");
  run.write("pde_compare.csv", csv.str());
  run.write_json("verdict.json", verdict);
}

json point_json(const Point& p) {
  json a = json::array();
  for (int i = 0; i < p.size(); ++i) a.push_back(number_json(p[i]));
  return a;
}

json transfer_json(const TransferReport& r) {
  return {{"p", number_json(r.p)},
          {"min_q_minus_one", number_json(r.min_q)},
          {"min_first", number_json(r.min_first)},
          {"min_second", number_json(r.min_second)},
          {"witness_t", number_json(r.witness_t)},
          {"witness_delta", number_json(r.witness_delta)},
          {"holds", r.holds}};
}

void verb_geometry_probe(Run& run) {
  const json j = load_config(run.cfg(), false);
  const std::string ctx = "geometry-probe";
  check_fields(j, {"space", "check", "count", "seed", "tol", "p_values", "grid"}, ctx);
  const std::string space = run.cfg().space ? *run.cfg().space : j.value("space", std::string("euclid"));
  const std::string check = run.cfg().check ? *run.cfg().check : j.value("check", std::string("lac"));
  const double tol = get_double_or(j, "tol", 1e-6, ctx) * run.tol_scale();
  json out = {{"space", space}, {"check", check}};
  if (check == "appendix") {
    std::vector<double> ps = j.contains("p_values") ? get_doubles(j, "p_values", ctx) : std::vector<double>{0.5, 0.6, 0.75, 1.0};
    const int grid = j.value("grid", 200);
    json reps = json::array();
    for (double p : ps) {
      const TransferReport r = check_transfer_estimates(p, grid, grid, 1e-9 * run.tol_scale());
      reps.push_back(transfer_json(r));
      run.require(r.holds, "transfer estimate fails for p = " + format_number(p));
    }
    out["reports"] = reps;
  } else {
    if (check != "lac" && check != "cs" && check != "kappa" && check != "midpoint")
      throw ConfigError("unknown geometry check '" + check + "'");
    std::unique_ptr<MetricSpaceProbe> probe;
    try {
      probe = make_probe(space);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    const int count = j.value("count", 500);
    const std::uint64_t seed = run.cfg().seed ? *run.cfg().seed : j.value("seed", std::uint64_t{1});
    const GeometrySweep s = run_geometry_sweep(*probe, check, count, seed, tol);
    json pts = json::array();
    for (const auto& p : s.worst_points) pts.push_back(point_json(p));
    out["seed"] = seed;
    out["samples"] = s.samples;
    out["skipped"] = s.skipped;
    out["worst_residual"] = number_json(s.worst);
    out["worst_points"] = pts;
    out["holds"] = s.holds;
    run.require(s.holds, check + " check fails on " + space);
  }
  run.write_json("geometry.json", out);
}

void verb_appendix_check(Run& run) {
  const json j = load_config(run.cfg(), false);
  const std::string ctx = "appendix-check";
  check_fields(j, {"p", "grid"}, ctx);
  std::optional<double> p = run.cfg().p;
  if (!p && j.contains("p")) p = get_double(j, "p", ctx);
  if (!p) throw ConfigError("appendix-check needs --p");
  if (!(*p > 0.0)) throw ConfigError("p must be positive");
  const int grid = j.value("grid", 200);
  const TransferReport r = check_transfer_estimates(*p, grid, grid, 1e-9 * run.tol_scale());
  run.require(r.holds, "Q_p < 1 at t = " + format_number(r.witness_t) + ", delta = " + format_number(r.witness_delta));
  run.write_json("appendix.json", transfer_json(r));
}

void verb_convergence_study(Run& run) {
  const json j = load_config(run.cfg(), true);
  const std::string ctx = "convergence-study";
  check_fields(j, {"metric", "entropy", "mu0", "taus", "T", "solver"}, ctx);
  const Metric m = get_metric(j, ctx);
  const Entropy e = entropy_from_json(require_field(j, "entropy", ctx));
  const DiscreteMeasure mu0 = measure_from_json(require_field(j, "mu0", ctx));
  const std::vector<double> taus = get_doubles(j, "taus", ctx);
  const double T = get_double(j, "T", ctx);
  ConvergenceStudy st;
  try {
    st = convergence_study(mu0, e, m, taus, T, solver_options(j, run));
  } catch (const InvalidArgument& ex) {
    throw ConfigError(ex.what());
  }
  CsvTable csv({"tau", "sup_gap", "evi_worst_residual"});
  json rows = json::array();
  for (const auto& r : st.rows) {
    csv.add_row({format_number(r.tau), format_number(r.sup_gap), format_number(r.evi_worst_residual)});
    rows.push_back({{"tau", number_json(r.tau)},
                    {"steps", r.steps},
                    {"sup_gap", number_json(r.sup_gap)},
                    {"evi_worst_residual_lambda_star", number_json(r.evi_worst_residual)},
                    {"evi_worst_residual_lambda", number_json(r.evi_worst_residual_lambda)}});
  }
  run.require(st.gaps_decreasing, "sup gaps do not decrease under halving");
  run.write("convergence.csv", csv.str());
  run.write_json("summary.json", {{"metric", metric_name(m)}, {"T", number_json(T)}, {"rows", rows},
                                  {"gaps_decreasing", st.gaps_decreasing}});
}

void verb_verify_manifest(Run& run) {
  const ManifestCheck c = verify_manifest(run.cfg().out_dir);
  for (const auto& p : c.problems) run.require(false, p);
}

}  // namespace

const std::vector<std::string>& experiment_verbs() {
  static const std::vector<std::string> v{"distance",       "mm-run",         "evi-check",
                                          "pde-compare",    "geometry-probe", "appendix-check",
                                          "convergence-study", "verify-manifest"};
  return v;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogFn& log) {
  ExperimentResult res;
  Run run(cfg, log);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (!(cfg.tol_scale > 0.0)) throw ConfigError("--tol-scale must be positive");
    if (cfg.jobs < 1) throw ConfigError("--jobs must be at least 1");
    if (cfg.verb == "distance") verb_distance(run);
    else if (cfg.verb == "mm-run") verb_mm_run(run);
    else if (cfg.verb == "evi-check") verb_evi_check(run);
    else if (cfg.verb == "pde-compare") verb_pde_compare(run);
    else if (cfg.verb == "geometry-probe") verb_geometry_probe(run);
    else if (cfg.verb == "appendix-check") verb_appendix_check(run);
    else if (cfg.verb == "convergence-study") verb_convergence_study(run);
    else if (cfg.verb == "verify-manifest") verb_verify_manifest(run);
    else throw ConfigError("unknown verb '" + cfg.verb + "'");
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const json::exception& e) {
    res.exit_code = kExitConfig;
    res.message = std::string("config: ") + e.what();
  } catch (const SolverFailure& e) {
    res.exit_code = kExitSolver;
    res.message = e.what();
  } catch (const InvalidArgument& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = kExitSolver;
    res.message = e.what();
  }
  if (res.exit_code == kExitOk && cfg.verb != "verify-manifest") {
    std::string cfg_text = cfg.config_path ? read_file(*cfg.config_path) : std::string();
    std::ostringstream flags;
    flags << cfg.verb << '|' << (cfg.seed ? std::to_string(*cfg.seed) : "-") << '|'
          << format_number(cfg.tol_scale) << '|' << (cfg.trajectory ? cfg.trajectory->string() : "-") << '|'
          << (cfg.observers ? cfg.observers->string() : "-") << '|'
          << (cfg.lambda ? format_number(*cfg.lambda) : "-") << '|' << cfg.space.value_or("-") << '|'
          << cfg.check.value_or("-") << '|' << (cfg.p ? format_number(*cfg.p) : "-");
    json manifest = {
        {"tool", "hkflow"},
        {"version", kVersion},
        {"verb", cfg.verb},
        {"config", cfg.config_path ? cfg.config_path->string() : ""},
        {"config_hash", hex64(fnv1a64(cfg_text + "\n" + flags.str()))},
        {"seed", cfg.seed ? json(*cfg.seed) : json("default")},
        {"tol_scale", number_json(cfg.tol_scale)},
        {"jobs", cfg.jobs},
        {"versions", {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"boost", BOOST_LIB_VERSION},
                      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
        {"wall_time_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
        {"failed_assertions", run.failures()},
        {"outputs", run.hashes()}};
    try {
      write_file_atomic(cfg.out_dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
      res.exit_code = kExitSolver;
      res.message = std::string("cannot write manifest: ") + e.what();
    }
  }
  res.files = run.files();
  res.failures = run.failures();
  if (res.exit_code == kExitOk && !res.failures.empty()) res.exit_code = kExitAssertion;
  return res;
}

}  // namespace hkflow
