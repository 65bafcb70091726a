/// Integrated EVI residuals, discrete error budgets, contraction checks and tau-refinement studies.
#pragma once

#include <string>
#include <vector>

#include "hkflow/entropy.hpp"
#include "hkflow/mm.hpp"

namespace hkflow {

struct Observer {
  std::string id;
  DiscreteMeasure mu;
};

// HK: mu0 scaled by 0.5, 1, 2. SHK: (1 - w) mu0 + w * uniform probability, w in {0.25, 0.5, 0.75}.
std::vector<Observer> default_observers(const DiscreteMeasure& mu0, Metric m);

// 2 min{lambda, 0} - 2.
double lambda_star(double lambda);

// Formal Onsager slope squared: sum w rho (alpha |grad E'|^2 + beta (E' - m)^2), with m = 0
// for HK and the rho-weighted mean of E' for SHK. Gradients are one-sided differences
// between neighbouring nodes with arithmetic-mean densities on edges.
double metric_slope_squared(const DiscreteMeasure& mu, const Entropy& e, Metric m,
                            double alpha = 1.0, double beta = 4.0);

struct EVIReport {
  Metric metric = Metric::HK;
  double dt = 0.0;
  double lambda = 0.0;
  double lambda_star = 0.0;
  std::string quadrature = "left-rectangle";
  std::vector<std::string> observer_ids;
  std::vector<double> energies;                 // phi(x_k)
  std::vector<double> observer_energies;        // phi(o)
  std::vector<std::vector<double>> dist_sq;     // [observer][k] = d^2(x_k, o)
  double worst_lambda_star = 0.0;
  double worst_lambda = 0.0;
  int worst_s = 0, worst_t = 0, worst_observer = 0;

  int samples() const { return static_cast<int>(energies.size()); }
  // 1/2 d^2(x_t, o) - 1/2 d^2(x_s, o) + dt sum_{s <= k < t} (phi(x_k) + l/2 d^2(x_k, o))
  // - (t - s) dt phi(o), with l = lambda_star or lambda; zero for s = t.
  double residual(int s, int t, int observer, bool use_lambda_star = true) const;
};

// Curve samples x_k at times k * dt, held constant on [k dt, (k + 1) dt).
EVIReport evi_residual_integrated(const std::vector<DiscreteMeasure>& curve, double dt,
                                  const std::vector<Observer>& observers, double lambda,
                                  const Entropy& e, Metric m, const LetOptions& let = {});

struct ErrorBudget {
  double tau = 0.0, kappa = 0.0, lambda = 0.0, lambda_star = 0.0;
  double slope0 = 0.0;                 // slope estimate at x_0
  std::vector<double> delta;           // Delta_n, n = 0 .. N-1, with the comparison surrogate
  std::vector<double> delta_zero;      // same with the Delta^2 term dropped
  std::vector<double> surrogate;       // clamped 2 d01^2 + 2 d12^2 - d02^2 at n (n >= 1)
  std::vector<double> skip_dist_sq;    // d^2(x_{n-1}, x_{n+1}), n >= 1
  std::vector<double> cumulative;      // sum_{m < n} tau e^{2 lambda* t_m} Delta_m, n = 0 .. N
  double norm = 0.0;                   // weighted L1 norm over [0, T]
  double norm_zero = 0.0;
  double bound = 0.0;                  // tau (4 + tau kappa) slope0^2
  bool within_bound = false;
};

// slope0 <= 0 selects the surrogate d(x_0, x_1) / tau.
ErrorBudget error_budget(const MMTrajectory& traj, double kappa, double lambda,
                         double slope0 = 0.0, const LetOptions& let = {});

struct ContractionRow {
  double t = 0.0;
  double distance = 0.0;
  double lhs = 0.0;     // e^{lambda* t} d(x^a(t), x^b(t))
  double rhs = 0.0;     // d(0) + (2 * budget on [0, t])^{1/2}
  bool holds = true;
};

struct ContractionReport {
  std::vector<ContractionRow> rows;
  double worst_margin = 0.0;  // min rhs - lhs
  bool holds = true;
};

ContractionReport contraction_check(const MMTrajectory& a, const MMTrajectory& b, double lambda,
                                    const ErrorBudget& budget_a, const ErrorBudget& budget_b,
                                    const LetOptions& let = {});

struct ConvergenceRow {
  double tau = 0.0;
  int steps = 0;
  double sup_gap = 0.0;            // sup over coarse grid times of d(x^tau, x^{next tau})
  double evi_worst_residual = 0.0; // lambda* column, default observers
  double evi_worst_residual_lambda = 0.0;
  double seconds = 0.0;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;  // last row has sup_gap = NaN
  std::vector<MMTrajectory> trajectories;
  bool gaps_decreasing = false;
};

// Each tau must be an integer multiple of the next and divide T.
ConvergenceStudy convergence_study(const DiscreteMeasure& mu0, const Entropy& e, Metric m,
                                   const std::vector<double>& taus, double T,
                                   const MMOptions& opt = {});

}  // namespace hkflow
