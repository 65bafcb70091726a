#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <vector>

#include "hkflow/error.hpp"
#include "hkflow/pde.hpp"

namespace hkflow {

namespace odeint = boost::numeric::odeint;

OdePath solve_scalar_ode(double c0, const Entropy& e, double T, double rtol) {
  if (!(c0 >= 0.0) || !(T >= 0.0)) throw InvalidArgument("scalar ODE needs c0 >= 0 and T >= 0");
  OdePath path;
  if (c0 == 0.0 || T == 0.0) {
    path.t = {0.0, T};
    path.c = {c0, c0};
    return path;
  }
  using State = std::vector<double>;
  State x{c0};
  auto rhs = [&](const State& s, State& ds, double) {
    ds[0] = s[0] > 0.0 ? -4.0 * s[0] * e.d1(s[0]) : 0.0;
  };
  auto obs = [&](const State& s, double t) {
    if (!std::isfinite(s[0]) || s[0] > 1e150) throw SolverFailure("scalar ODE blew up");
    path.t.push_back(t);
    path.c.push_back(s[0]);
  };
  auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-14, rtol);
  odeint::integrate_adaptive(stepper, rhs, x, 0.0, T, T / 64.0, obs);
  return path;
}

PdeTrajectory solve_spherical_hellinger_ode(const DiscreteMeasure& c0, const Entropy& e, double T,
                                            double rtol) {
  if (std::abs(total_mass(c0) - 1.0) > 1e-8) throw InvalidArgument("spherical ODE needs unit mass");
  if (!(T >= 0.0)) throw InvalidArgument("final time must be nonnegative");
  const auto& w = c0.domain()->weights();
  const int n = c0.size();
  using State = std::vector<double>;
  State x(c0.density().data(), c0.density().data() + n);
  auto rhs = [&](const State& s, State& ds, double) {
    double m = 0.0, acc = 0.0;
    for (int i = 0; i < n; ++i) {
      m += w[i] * s[i];
      if (s[i] > 0.0) acc += w[i] * s[i] * e.d1(s[i]);
    }
    const double mean = acc / m;
    for (int i = 0; i < n; ++i) ds[i] = s[i] > 0.0 ? -4.0 * s[i] * (e.d1(s[i]) - mean) : 0.0;
  };
  PdeTrajectory tr;
  tr.mass_initial = total_mass(c0);
  auto obs = [&](const State& s, double t) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(s[i])) throw SolverFailure("spherical ODE became non-finite");
      v[i] = std::max(s[i], 0.0);
    }
    tr.times.push_back(t);
    tr.states.emplace_back(c0.domain(), v);
    ++tr.steps;
  };
  if (T == 0.0) {
    obs(x, 0.0);
  } else {
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-14, rtol);
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, T, T / 64.0, obs);
  }
  tr.steps -= 1;
  tr.mass_final = total_mass(tr.states.back());
  return tr;
}

}  // namespace hkflow
