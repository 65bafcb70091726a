#include "hkflow/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hkflow/error.hpp"

namespace hkflow {

namespace {

// rho E'(rho), with the limit 0 at rho = 0.
double rho_d1(const Entropy& e, double r) { return r > 0.0 ? r * e.d1(r) : 0.0; }
double rho_d2(const Entropy& e, double r) { return r > 0.0 ? r * e.d2(r) : 0.0; }

class Stepper {
 public:
  Stepper(const GridDomain& dom, const Entropy& e, const PdeConfig& cfg, bool shk)
      : dom_(dom), e_(e), cfg_(cfg), shk_(shk) {
    const int d = dom.dim();
    for (int k = 0; k < d; ++k) {
      const int nk = dom.nodes()[k];
      cell_[k].resize(nk);
      for (int i = 0; i < nk; ++i)
        cell_[k][i] = (i == 0 || i == nk - 1) ? 0.5 * dom.spacing(k) : dom.spacing(k);
    }
  }

  Eigen::VectorXd rhs(const Eigen::VectorXd& r) const {
    const int n = dom_.size();
    const int n0 = dom_.nodes()[0];
    const int n1 = dom_.dim() == 2 ? dom_.nodes()[1] : 1;
    Eigen::VectorXd mob(n), out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) mob[i] = rho_d2(e_, std::max(r[i], 0.0));
    if (cfg_.alpha != 0.0) {
      for (int j = 0; j < n1; ++j)
        for (int i = 0; i + 1 < n0; ++i) {
          const int a = dom_.index(i, j), b = dom_.index(i + 1, j);
          const double flux =
              cfg_.alpha * 0.5 * (mob[a] + mob[b]) * (r[b] - r[a]) / dom_.spacing(0);
          out[a] += flux / cell_[0][i];
          out[b] -= flux / cell_[0][i + 1];
        }
      if (dom_.dim() == 2)
        for (int j = 0; j + 1 < n1; ++j)
          for (int i = 0; i < n0; ++i) {
            const int a = dom_.index(i, j), b = dom_.index(i, j + 1);
            const double flux =
                cfg_.alpha * 0.5 * (mob[a] + mob[b]) * (r[b] - r[a]) / dom_.spacing(1);
            out[a] += flux / cell_[1][j];
            out[b] -= flux / cell_[1][j + 1];
          }
    }
    double mean = 0.0;
    if (shk_) {
      const auto& w = dom_.weights();
      double m = 0.0, s = 0.0;
      for (int i = 0; i < n; ++i) {
        m += w[i] * r[i];
        s += w[i] * rho_d1(e_, std::max(r[i], 0.0));
      }
      mean = s / m;
    }
    for (int i = 0; i < n; ++i) {
      const double ri = std::max(r[i], 0.0);
      out[i] -= cfg_.beta * (rho_d1(e_, ri) - (shk_ ? ri * mean : 0.0));
    }
    return out;
  }

  double stable_dt(const Eigen::VectorXd& r) const {
    double mob = 0.0, react = 0.0;
    for (int i = 0; i < r.size(); ++i) {
      const double ri = std::max(r[i], 0.0);
      mob = std::max(mob, rho_d2(e_, ri));
      if (ri > 0.0) react = std::max(react, std::abs(e_.d1(ri) + ri * e_.d2(ri)));
    }
    double hmin2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < dom_.dim(); ++k) hmin2 = std::min(hmin2, dom_.spacing(k) * dom_.spacing(k));
    double dt = std::numeric_limits<double>::infinity();
    if (cfg_.alpha > 0.0 && mob > 0.0) dt = hmin2 / (2.0 * dom_.dim() * cfg_.alpha * mob);
    if (cfg_.beta > 0.0 && react > 0.0) dt = std::min(dt, 1.0 / (cfg_.beta * react * (shk_ ? 2.0 : 1.0)));
    return cfg_.safety * dt;
  }

 private:
  const GridDomain& dom_;
  const Entropy& e_;
  const PdeConfig& cfg_;
  bool shk_;
  std::vector<double> cell_[2];
};

PdeTrajectory integrate(const DiscreteMeasure& rho0, const Entropy& e, const PdeConfig& cfg,
                        bool shk) {
  if (!(cfg.T >= 0.0)) throw InvalidArgument("final time must be nonnegative");
  if (!(cfg.safety > 0.0 && cfg.safety <= 1.0)) throw InvalidArgument("safety must be in (0, 1]");
  if (cfg.alpha < 0.0 || cfg.beta < 0.0) throw InvalidArgument("alpha and beta must be nonnegative");
  const GridDomain& dom = *rho0.domain();
  Stepper st(dom, e, cfg, shk);
  std::vector<double> marks = cfg.record_times;
  marks.push_back(0.0);
  marks.push_back(cfg.T);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  for (double m : marks)
    if (m < 0.0 || m > cfg.T) throw InvalidArgument("record time outside [0, T]");
  PdeTrajectory tr;
  Eigen::VectorXd r = rho0.density();
  const auto& w = dom.weights();
  tr.mass_initial = r.dot(w);
  double dt = cfg.dt > 0.0 ? cfg.dt : st.stable_dt(r);
  if (!std::isfinite(dt)) dt = cfg.T > 0.0 ? cfg.T / 16.0 : 1.0;
  double t = 0.0;
  std::size_t next = 0;
  while (next < marks.size()) {
    if (marks[next] - t <= 1e-14 * std::max(1.0, cfg.T)) {
      tr.times.push_back(marks[next]);
      tr.states.emplace_back(rho0.domain(), r);
      ++next;
      continue;
    }
    const double bound = st.stable_dt(r);
    int local = 0;
    while (dt > bound && local < 8) {
      dt *= 0.5;
      ++local;
      ++tr.halvings;
    }
    if (dt > bound) {
      std::ostringstream os;
      os << "explicit step unstable at t = " << t << ": dt " << dt << " > bound " << bound;
      throw SolverFailure(os.str());
    }
    const double h = std::min(dt, marks[next] - t);
    // Heun (SSP-RK2).
    const Eigen::VectorXd k1 = st.rhs(r);
    const Eigen::VectorXd mid = r + h * k1;
    const Eigen::VectorXd k2 = st.rhs(mid);
    r += 0.5 * h * (k1 + k2);
    for (int i = 0; i < r.size(); ++i)
      if (r[i] < 0.0) {
        tr.clipped_mass += -r[i] * w[i];
        r[i] = 0.0;
      }
    if (!r.allFinite()) throw SolverFailure("PDE state became non-finite");
    t += h;
    ++tr.steps;
    if (std::abs(t - marks[next]) <= 1e-14 * std::max(1.0, cfg.T)) t = marks[next];
  }
  tr.dt = dt;
  tr.mass_final = r.dot(w);
  return tr;
}

}  // namespace

const DiscreteMeasure& PdeTrajectory::at(double t, double tol) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= tol * std::max(1.0, std::abs(t))) return states[k];
  throw InvalidArgument("time not recorded in the trajectory");
}

PdeTrajectory solve_reaction_diffusion_hk(const DiscreteMeasure& rho0, const Entropy& e,
                                          const PdeConfig& cfg) {
  return integrate(rho0, e, cfg, false);
}

PdeTrajectory solve_shk_pde(const DiscreteMeasure& rho0, const Entropy& e, const PdeConfig& cfg) {
  if (std::abs(total_mass(rho0) - 1.0) > 1e-8) throw InvalidArgument("SHK PDE needs unit mass");
  return integrate(rho0, e, cfg, true);
}

double compare_mm_to_pde(const MMTrajectory& mm, const PdeTrajectory& pde, double T) {
  const long n = std::lround(T / mm.tau);
  if (n < 0 || n > mm.steps() || std::abs(n * mm.tau - T) > 1e-9 * std::max(1.0, T))
    throw InvalidArgument("T is not a grid time of the MM trajectory");
  const DiscreteMeasure& a = mm.measures[n];
  const DiscreteMeasure& b = pde.at(T);
  require_same_domain(a, b);
  return (a.density() - b.density()).cwiseAbs().dot(a.domain()->weights());
}

}  // namespace hkflow
