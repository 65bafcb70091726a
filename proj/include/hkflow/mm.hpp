/// Minimizing-movement (JKO-type) steps for HK and SHK, trajectories, and discrete
/// density bounds; scalar Euler-Lagrange solver for spatially homogeneous data.
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hkflow/entropy.hpp"
#include "hkflow/hk.hpp"
#include "hkflow/measures.hpp"

namespace hkflow {

enum class Metric { HK, SHK };
Metric parse_metric(const std::string& s);
std::string metric_name(Metric m);

// Squared distance in the chosen metric.
double metric_distance_squared(Metric m, const DiscreteMeasure& a, const DiscreteMeasure& b,
                               const LetOptions& opt = {});

struct MMOptions {
  double tol_g = 1e-7;           // stationarity tolerance in log-density coordinates
  double density_floor = 1e-14;  // nodes below are left out of the stationarity test
  int restarts = 0;              // extra solves from perturbed starts
  std::uint64_t seed = 0;
  int max_fixed_point = 60;      // SHK outer iterations
  bool verify = true;            // independent distance solve for the stationarity test
  bool keep_plans = false;
  LetOptions let;
};

struct MMStepResult {
  DiscreteMeasure mu1;
  double objective = 0.0;    // d^2 / (2 tau) + E(mu1)
  double objective0 = 0.0;   // E(mu0), the value at mu1 = mu0
  double distance_sq = 0.0;  // d^2(mu0, mu1) in the step metric
  double stationarity = 0.0;
  double restart_spread = 0.0;
  int newton_steps = 0;
  int outer_iterations = 0;
  bool exact = false;
  bool converged = false;
  Eigen::MatrixXd plan;      // optimal LET plan mu0 -> mu1 (verification solve)
};

MMStepResult mm_step_hk(const DiscreteMeasure& mu0, const Entropy& e, double tau,
                        const MMOptions& opt = {});
MMStepResult mm_step_shk(const DiscreteMeasure& nu0, const Entropy& e, double tau,
                         const MMOptions& opt = {});
MMStepResult mm_step(Metric m, const DiscreteMeasure& mu0, const Entropy& e, double tau,
                     const MMOptions& opt = {});

struct MMTrajectory {
  Metric metric = Metric::HK;
  Entropy entropy;
  double tau = 0.0;
  std::vector<DiscreteMeasure> measures;  // x_0 .. x_n
  std::vector<double> times;
  std::vector<double> energies;
  std::vector<double> step_distance_sq;   // entry k: d^2(x_{k-1}, x_k); entry 0 is 0
  std::vector<double> stationarity;
  std::vector<double> objective;
  std::vector<Eigen::MatrixXd> plans;     // entry k-1: plan x_{k-1} -> x_k, if kept

  int steps() const { return static_cast<int>(measures.size()) - 1; }
};

// Throws SolverFailure when a step misses its stationarity tolerance.
MMTrajectory run_mm(Metric m, const DiscreteMeasure& mu0, const Entropy& e, double tau, int steps,
                    const MMOptions& opt = {});

struct BoundCheck {
  std::string name;
  bool applicable = false;
  bool holds = true;
  double worst_margin = 0.0;  // bound minus observed (>= -slack means pass)
  int worst_step = -1;
  std::string note;
};

struct HKBoundParams {
  std::optional<double> c_upp;
  std::optional<double> c_low;
  std::optional<double> e_star;
  std::optional<double> c_star;
  double slack = 1e-6;
};

std::vector<BoundCheck> check_density_bounds_hk(const MMTrajectory& traj,
                                                const HKBoundParams& params = {});
// Minimum nondecreasing and maximum nonincreasing along the trajectory.
std::vector<BoundCheck> check_density_bounds_shk(const MMTrajectory& traj, double slack = 1e-6);

struct MonotoneReport {
  double violating_fraction = 0.0;  // plan mass moving to a node with larger new density
  int worst_step = -1;
};
// Needs traj.plans.
MonotoneReport monotone_test_lemma_check(const MMTrajectory& traj, double tol = 1e-10);

// Euler-Lagrange 1 - sqrt(c0/c1) + 2 tau E'(c1) = 0 solved by bisection.
double scalar_mm_step(double c0, double tau, const Entropy& e);
std::vector<double> scalar_mm(double c0, double tau, const Entropy& e, int steps);

struct ScalarObservations {
  bool d1 = true, d2 = true, d3 = true, d4 = true;
  bool d1_applicable = false, d2_applicable = false, d3_applicable = false;
  double margin3 = 0.0, margin4 = 0.0;
};
// D1: c0 >= c_upp implies c1 <= c0 (c_upp: smallest c with E'(c) >= 0).
// D2: c0 <= c_low implies c1 >= c0 (c_low: largest c with E'(c) <= 0).
// D3: c1 <= max{a, c0 / (1 + 2 tau min{E'(a), 0})^2} when 2 tau E'(a) > -1.
// D4: c1 >= min{b, c0 / (1 + 2 tau max{E'(b), 0})^2}.
ScalarObservations check_scalar_observations(double c0, double c1, double tau, const Entropy& e,
                                             double a, double b, double tol = 1e-10);

}  // namespace hkflow
