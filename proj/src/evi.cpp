#include "hkflow/evi.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "hkflow/error.hpp"

namespace hkflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// 1-D trapezoid weight of index k on an axis with n nodes and spacing h.
double axis_weight(int k, int n, double h) { return (k == 0 || k == n - 1) ? 0.5 * h : h; }

}  // namespace

std::vector<Observer> default_observers(const DiscreteMeasure& mu0, Metric m) {
  std::vector<Observer> obs;
  if (m == Metric::HK) {
    for (double f : {0.5, 1.0, 2.0}) {
      std::ostringstream id;
      id << "scale_" << f;
      obs.push_back({id.str(), scale_measure(mu0, f)});
    }
    return obs;
  }
  const DiscreteMeasure u = normalize(DiscreteMeasure::uniform(mu0.domain(), 1.0));
  for (double w : {0.25, 0.5, 0.75}) {
    std::ostringstream id;
    id << "blend_" << w;
    obs.push_back({id.str(), DiscreteMeasure(mu0.domain(),
                                             (1.0 - w) * mu0.density() + w * u.density())});
  }
  return obs;
}

double lambda_star(double lambda) { return 2.0 * std::min(lambda, 0.0) - 2.0; }

double metric_slope_squared(const DiscreteMeasure& mu, const Entropy& e, Metric m, double alpha,
                            double beta) {
  const GridDomain& dom = *mu.domain();
  const Eigen::VectorXd& w = dom.weights();
  const Eigen::VectorXd& rho = mu.density();
  const int n = dom.size();
  Eigen::VectorXd ep(n);
  for (int i = 0; i < n; ++i) ep[i] = rho[i] > 0.0 ? e.d1(rho[i]) : 0.0;
  double mean = 0.0;
  if (m == Metric::SHK) {
    const double mass = rho.dot(w);
    if (mass > 0.0) mean = rho.cwiseProduct(ep).dot(w) / mass;
  }
  double react = 0.0;
  for (int i = 0; i < n; ++i)
    if (rho[i] > 0.0) react += w[i] * rho[i] * (ep[i] - mean) * (ep[i] - mean);
  double transport = 0.0;
  const auto& nodes = dom.nodes();
  const int n1 = dom.dim() > 1 ? nodes[1] : 1;
  for (int axis = 0; axis < dom.dim(); ++axis) {
    const double h = dom.spacing(axis);
    for (int i1 = 0; i1 < n1; ++i1)
      for (int i0 = 0; i0 < nodes[0]; ++i0) {
        const int k = axis == 0 ? i0 : i1;
        if (k + 1 >= nodes[axis]) continue;
        const int i = dom.index(i0, i1);
        const int j = axis == 0 ? dom.index(i0 + 1, i1) : dom.index(i0, i1 + 1);
        const double redge = 0.5 * (rho[i] + rho[j]);
        if (redge == 0.0) continue;
        double cell = h;
        if (dom.dim() > 1) {
          const int other = 1 - axis;
          const int ko = other == 0 ? i0 : i1;
          cell *= axis_weight(ko, nodes[other], dom.spacing(other));
        }
        const double g = (ep[j] - ep[i]) / h;
        transport += cell * redge * g * g;
      }
  }
  return alpha * transport + beta * react;
}

double EVIReport::residual(int s, int t, int observer, bool use_lambda_star) const {
  const int n = samples();
  if (s < 0 || t < s || t >= n || observer < 0 ||
      observer >= static_cast<int>(observer_ids.size()))
    throw InvalidArgument("residual index out of range");
  if (s == t) return 0.0;
  const double l = use_lambda_star ? lambda_star : lambda;
  const auto& d = dist_sq[observer];
  double integral = 0.0;
  for (int k = s; k < t; ++k) integral += energies[k] + 0.5 * l * d[k];
  return 0.5 * d[t] - 0.5 * d[s] + dt * integral - (t - s) * dt * observer_energies[observer];
}

EVIReport evi_residual_integrated(const std::vector<DiscreteMeasure>& curve, double dt,
                                  const std::vector<Observer>& observers, double lambda,
                                  const Entropy& e, Metric m, const LetOptions& let) {
  if (curve.empty()) throw InvalidArgument("EVI residual needs at least one curve sample");
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (observers.empty()) throw InvalidArgument("EVI residual needs at least one observer");
  EVIReport rep;
  rep.metric = m;
  rep.dt = dt;
  rep.lambda = lambda;
  rep.lambda_star = lambda_star(lambda);
  const int n = static_cast<int>(curve.size());
  for (int k = 0; k < n; ++k) {
    const double v = e.functional(curve[k]);
    if (!std::isfinite(v))
      throw InvalidArgument("infinite energy at curve sample " + std::to_string(k));
    rep.energies.push_back(v);
  }
  for (const auto& o : observers) {
    const double v = e.functional(o.mu);
    if (!std::isfinite(v)) throw InvalidArgument("observer " + o.id + " has infinite energy");
    rep.observer_ids.push_back(o.id);
    rep.observer_energies.push_back(v);
    std::vector<double> d(n);
    for (int k = 0; k < n; ++k) d[k] = metric_distance_squared(m, curve[k], o.mu, let);
    rep.dist_sq.push_back(std::move(d));
  }
  rep.worst_lambda_star = rep.worst_lambda = n > 1 ? -kInf : 0.0;
  for (int o = 0; o < static_cast<int>(observers.size()); ++o)
    for (int s = 0; s < n; ++s)
      for (int t = s + 1; t < n; ++t) {
        const double r = rep.residual(s, t, o, true);
        if (r > rep.worst_lambda_star) {
          rep.worst_lambda_star = r;
          rep.worst_s = s;
          rep.worst_t = t;
          rep.worst_observer = o;
        }
        rep.worst_lambda = std::max(rep.worst_lambda, rep.residual(s, t, o, false));
      }
  return rep;
}

ErrorBudget error_budget(const MMTrajectory& traj, double kappa, double lambda, double slope0,
                         const LetOptions& let) {
  const int N = traj.steps();
  if (N < 1) throw InvalidArgument("error budget needs at least one step");
  const double tau = traj.tau;
  if (!(1.0 + lambda * tau > 0.0)) throw InvalidArgument("error budget needs 1 + lambda tau > 0");
  ErrorBudget b;
  b.tau = tau;
  b.kappa = kappa;
  b.lambda = lambda;
  b.lambda_star = lambda_star(lambda);
  const auto& d2 = traj.step_distance_sq;  // d2[k] = d^2(x_{k-1}, x_k)
  b.slope0 = slope0 > 0.0 ? slope0 : std::sqrt(d2[1]) / tau;
  const double s2 = b.slope0 * b.slope0;
  b.delta.resize(N);
  b.delta_zero.resize(N);
  b.surrogate.assign(N, 0.0);
  b.skip_dist_sq.assign(N, 0.0);
  b.delta[0] = b.delta_zero[0] = (1.0 - 2.0 * lambda) * d2[1] + (1.0 + 1.0 / (1.0 + lambda * tau)) * s2;
  for (int n = 1; n < N; ++n) {
    b.skip_dist_sq[n] =
        metric_distance_squared(traj.metric, traj.measures[n - 1], traj.measures[n + 1], let);
    b.surrogate[n] = std::max(0.0, 2.0 * d2[n] + 2.0 * d2[n + 1] - b.skip_dist_sq[n]);
    b.delta_zero[n] = std::max(0.0, 1.0 - 2.0 * lambda + kappa / tau) * d2[n + 1];
    b.delta[n] = b.delta_zero[n] + b.surrogate[n] / (tau * tau);
  }
  b.cumulative.assign(N + 1, 0.0);
  double zero = 0.0;
  for (int n = 0; n < N; ++n) {
    const double wgt = tau * std::exp(2.0 * b.lambda_star * n * tau);
    b.cumulative[n + 1] = b.cumulative[n] + wgt * b.delta[n];
    zero += wgt * b.delta_zero[n];
  }
  b.norm = b.cumulative[N];
  b.norm_zero = zero;
  b.bound = tau * (4.0 + tau * kappa) * s2;
  b.within_bound = b.norm <= b.bound + 1e-8 * (1.0 + b.bound);
  return b;
}

ContractionReport contraction_check(const MMTrajectory& a, const MMTrajectory& b, double lambda,
                                    const ErrorBudget& budget_a, const ErrorBudget& budget_b,
                                    const LetOptions& let) {
  if (a.steps() != b.steps() || std::abs(a.tau - b.tau) > 1e-15 * std::max(1.0, a.tau))
    throw InvalidArgument("contraction check needs trajectories on the same time grid");
  if (a.metric != b.metric) throw InvalidArgument("contraction check needs one metric");
  const int N = a.steps();
  if (static_cast<int>(budget_a.cumulative.size()) != N + 1 ||
      static_cast<int>(budget_b.cumulative.size()) != N + 1)
    throw InvalidArgument("error budgets do not match the trajectories");
  const double ls = lambda_star(lambda);
  ContractionReport rep;
  rep.worst_margin = kInf;
  double d0 = 0.0;
  for (int k = 0; k <= N; ++k) {
    ContractionRow row;
    row.t = k * a.tau;
    row.distance = std::sqrt(
        std::max(0.0, metric_distance_squared(a.metric, a.measures[k], b.measures[k], let)));
    if (k == 0) d0 = row.distance;
    row.lhs = std::exp(ls * row.t) * row.distance;
    row.rhs = d0 + std::sqrt(2.0 * (budget_a.cumulative[k] + budget_b.cumulative[k]));
    row.holds = row.lhs <= row.rhs + 1e-8;
    rep.worst_margin = std::min(rep.worst_margin, row.rhs - row.lhs);
    rep.holds = rep.holds && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

ConvergenceStudy convergence_study(const DiscreteMeasure& mu0, const Entropy& e, Metric m,
                                   const std::vector<double>& taus, double T,
                                   const MMOptions& opt) {
  if (taus.empty()) throw InvalidArgument("convergence study needs at least one tau");
  if (!(T > 0.0)) throw InvalidArgument("end time must be positive");
  std::vector<int> steps;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw InvalidArgument("tau values must be positive");
    const double r = T / taus[i];
    if (std::abs(r - std::round(r)) > 1e-9 * r) throw InvalidArgument("tau must divide T");
    steps.push_back(static_cast<int>(std::lround(r)));
    if (i > 0) {
      const double q = taus[i - 1] / taus[i];
      if (q < 1.5 || std::abs(q - std::round(q)) > 1e-9 * q)
        throw InvalidArgument("each tau must be an integer multiple (>= 2) of the next");
    }
  }
  ConvergenceStudy st;
  const auto obs = default_observers(mu0, m);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    MMTrajectory traj = run_mm(m, mu0, e, taus[i], steps[i], opt);
    EVIReport evi = evi_residual_integrated(traj.measures, taus[i], obs, e.lambda(), e, m, opt.let);
    ConvergenceRow row;
    row.tau = taus[i];
    row.steps = steps[i];
    row.sup_gap = kNaN;
    row.evi_worst_residual = evi.worst_lambda_star;
    row.evi_worst_residual_lambda = evi.worst_lambda;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.rows.push_back(row);
    st.trajectories.push_back(std::move(traj));
  }
  for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
    const int r = static_cast<int>(std::lround(taus[i] / taus[i + 1]));
    double gap = 0.0;
    for (int k = 0; k <= steps[i]; ++k) {
      const double d2 = metric_distance_squared(m, st.trajectories[i].measures[k],
                                                st.trajectories[i + 1].measures[k * r], opt.let);
      gap = std::max(gap, std::sqrt(std::max(0.0, d2)));
    }
    st.rows[i].sup_gap = gap;
  }
  st.gaps_decreasing = true;
  for (std::size_t i = 1; i + 1 < taus.size(); ++i) {
    const double g0 = st.rows[i - 1].sup_gap, g1 = st.rows[i].sup_gap;
    if (!(g1 < g0 || (g0 <= 1e-12 && g1 <= 1e-12))) st.gaps_decreasing = false;
  }
  return st;
}

}  // namespace hkflow
