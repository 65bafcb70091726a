#include "hkflow/mm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "hkflow/error.hpp"
#include "let_dual.hpp"

namespace hkflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// psi_j(g, lam) = -s w_j E*((e^{-g} - 1)/s - lam); xi adds -s lam and isolated targets.
class EntropyTarget : public detail::TargetModel {
 public:
  EntropyTarget(const Entropy& e, Eigen::VectorXd w, double s, bool lam, double iso_weight)
      : e_(e), w_(std::move(w)), s_(s), lam_(lam), iso_(iso_weight) {}

  bool has_lambda() const override { return lam_; }

  bool eval(int j, double g, double lam, detail::TargetEval& out) const override {
    const double eg = std::exp(-g);
    if (!std::isfinite(eg)) return false;
    const double v = (eg - 1.0) / s_ - lam;
    if (!(v < e_.conj_sup())) return false;
    const double c = e_.conj_d1(v), cs = e_.conj(v), c2 = e_.conj_d2(v);
    if (!std::isfinite(c) || !std::isfinite(cs) || !std::isfinite(c2)) return false;
    const double w = w_[j];
    out.v = -s_ * w * cs;
    out.dg = w * c * eg;
    out.dgg = -w * (c2 * eg * eg / s_ + c * eg);
    out.dl = s_ * w * c;
    out.dll = -s_ * w * c2;
    out.dgl = -w * c2 * eg;
    return true;
  }

  bool eval_xi(double lam, double& v, double& dl, double& dll) const override {
    v = -s_ * lam;
    dl = -s_;
    dll = 0.0;
    if (iso_ > 0.0) {
      const double u = -1.0 / s_ - lam;
      if (!(u < e_.conj_sup())) return false;
      const double c = e_.conj_d1(u), cs = e_.conj(u), c2 = e_.conj_d2(u);
      if (!std::isfinite(cs) || !std::isfinite(c2)) return false;
      v += -s_ * iso_ * cs;
      dl += s_ * iso_ * c;
      dll += -s_ * iso_ * c2;
    }
    return true;
  }

 private:
  const Entropy& e_;
  Eigen::VectorXd w_;
  double s_;
  bool lam_;
  double iso_;
};

struct CoreResult {
  Eigen::VectorXd rho;
  Eigen::MatrixXd plan;
  int newton = 0;
  bool exact = false;
  bool converged = false;
};

// One HK-type step with s = 2 tau; optional unit-mass constraint.
CoreResult mm_core(const DiscreteMeasure& mu0, const Entropy& e, double s, bool mass_constraint,
                   double perturb, std::uint64_t seed) {
  const auto& dom = *mu0.domain();
  const int n = dom.size();
  const Eigen::VectorXd a = mu0.masses();
  const Eigen::VectorXd& w = dom.weights();
  std::vector<int> src, tgt, iso;
  std::vector<int> pos0(n, -1), pos1(n, -1);
  for (int i = 0; i < n; ++i)
    if (a[i] > 0.0) {
      pos0[i] = static_cast<int>(src.size());
      src.push_back(i);
    }
  detail::DualProblem p;
  std::vector<char> linked(n, 0);
  for (int j = 0; j < n; ++j)
    for (int i : src)
      if (dom.distance(i, j) < std::numbers::pi / 2.0) {
        linked[j] = 1;
        break;
      }
  double iso_weight = 0.0;
  for (int j = 0; j < n; ++j) {
    if (linked[j]) {
      pos1[j] = static_cast<int>(tgt.size());
      tgt.push_back(j);
    } else {
      iso.push_back(j);
      iso_weight += w[j];
    }
  }
  CoreResult out;
  out.rho = Eigen::VectorXd::Zero(n);
  out.plan = Eigen::MatrixXd::Zero(n, n);
  const double inv = -1.0 / s;
  if (!(e.conj_sup() > inv))
    throw InvalidArgument("MM step unbounded below: E' stays below -1/(2 tau)");
  if (src.empty()) {
    if (mass_constraint) throw InvalidArgument("SHK step needs a probability measure");
    for (int j = 0; j < n; ++j) out.rho[j] = e.conj_d1(inv);
    out.exact = out.converged = true;
    return out;
  }
  p.a.resize(src.size());
  for (std::size_t k = 0; k < src.size(); ++k) p.a[k] = a[src[k]];
  p.ng = static_cast<int>(tgt.size());
  for (int i : src)
    for (int j : tgt) {
      const double d = dom.distance(i, j);
      if (d < std::numbers::pi / 2.0) {
        p.ei.push_back(pos0[i]);
        p.ej.push_back(pos1[j]);
        p.ec.push_back(let_cost_function(d));
      }
    }
  Eigen::VectorXd wt(tgt.size());
  for (std::size_t k = 0; k < tgt.size(); ++k) wt[k] = w[tgt[k]];
  EntropyTarget target(e, wt, s, mass_constraint, iso_weight);
  p.target = &target;

  // Start near "stay put": E'(rho0) inside the conjugate domain.
  const double mean = a.sum() / w.sum();
  const double hi = std::isfinite(e.conj_sup()) ? e.conj_sup() - 0.05 * (e.conj_sup() - inv) : kInf;
  const double lo = inv + 0.1 / s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-perturb, perturb);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.nvar());
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    const double r = mu0.density(tgt[k]) > 0.0 ? mu0.density(tgt[k]) : mean;
    double u = std::clamp(e.d1(r), lo, hi);
    if (perturb > 0.0) u = std::clamp(u + jitter(rng) * (hi < kInf ? hi - lo : 1.0 / s), lo, hi);
    x[p.nf() + k] = -std::log1p(s * u);
  }
  detail::make_feasible(p, x, 1.0);
  detail::BarrierOptions bo;
  bo.gap_target = 1e-11 * std::max(1.0, p.a.sum());
  detail::DualSolution sol = detail::solve_dual(p, x, bo, p.a.maxCoeff());
  out.newton = sol.newton_steps;
  out.exact = sol.exact;
  out.converged = sol.exact || sol.converged;
  const double lam = mass_constraint ? sol.x[p.nf() + p.ng] : 0.0;
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    const double u = std::expm1(-sol.x[p.nf() + k]) / s;
    out.rho[tgt[k]] = e.conj_d1(u - lam);
  }
  for (int j : iso) out.rho[j] = e.conj_d1(inv - lam);
  for (int k = 0; k < p.nedge(); ++k) out.plan(src[p.ei[k]], tgt[p.ej[k]]) = sol.plan[k];
  if (!out.rho.allFinite()) throw SolverFailure("MM dual solve produced a non-finite density");
  return out;
}

double phi_prime(double h) {
  if (h <= 1e-12) return 1.0 + h / 6.0;
  const double th = std::acos(std::max(-1.0, 1.0 - h / 2.0));
  return th / std::sin(th);
}

// Gradient of the step objective in log-density coordinates.
double stationarity(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const Entropy& e,
                    double tau, bool shk, const MMOptions& opt, MMStepResult& res) {
  const LetResult lr = hk_distance_squared(mu0, mu1, opt.let);
  const double h = lr.value;
  const double scale = shk ? phi_prime(h) : 1.0;
  const auto& w = mu1.domain()->weights();
  const int n = mu1.size();
  Eigen::VectorXd G = Eigen::VectorXd::Zero(n), m = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const double r = mu1.density(j);
    if (r <= opt.density_floor) continue;
    const double sigma = std::isfinite(lr.g[j]) ? std::exp(-lr.g[j]) : 0.0;
    m[j] = w[j] * r;
    G[j] = m[j] * ((1.0 - sigma) * scale / (2.0 * tau) + e.d1(r));
  }
  if (shk && m.squaredNorm() > 0.0) G -= (G.dot(m) / m.squaredNorm()) * m;
  res.plan = lr.plan;
  res.distance_sq = shk ? std::pow(shk_from_hk(std::sqrt(std::max(0.0, h))), 2) : h;
  return G.cwiseAbs().maxCoeff();
}

void finish(MMStepResult& res, const DiscreteMeasure& mu0, const Entropy& e, double tau, bool shk,
            const MMOptions& opt, const Eigen::MatrixXd& core_plan) {
  res.objective0 = e.functional(mu0);
  if (opt.verify) {
    res.stationarity = stationarity(mu0, res.mu1, e, tau, shk, opt, res);
  } else {
    const double h = let_cost(core_plan, mu0, res.mu1);
    res.distance_sq = shk ? std::pow(shk_from_hk(std::sqrt(std::max(0.0, h))), 2) : h;
    res.plan = core_plan;
  }
  res.objective = res.distance_sq / (2.0 * tau) + e.functional(res.mu1);
  res.converged = res.converged && (!opt.verify || res.stationarity <= opt.tol_g);
  if (!opt.keep_plans) res.plan.resize(0, 0);
}

}  // namespace

Metric parse_metric(const std::string& s) {
  if (s == "hk" || s == "HK") return Metric::HK;
  if (s == "shk" || s == "SHK") return Metric::SHK;
  throw InvalidArgument("unknown metric '" + s + "' (hk, shk)");
}

std::string metric_name(Metric m) { return m == Metric::HK ? "hk" : "shk"; }

double metric_distance_squared(Metric m, const DiscreteMeasure& a, const DiscreteMeasure& b,
                               const LetOptions& opt) {
  if (m == Metric::HK) return hk_distance_squared(a, b, opt).value;
  return std::pow(shk_distance(a, b, opt), 2);
}

MMStepResult mm_step_hk(const DiscreteMeasure& mu0, const Entropy& e, double tau,
                        const MMOptions& opt) {
  if (!(tau > 0.0)) throw InvalidArgument("step size must be positive");
  MMStepResult res;
  if (e.is_affine()) {
    const double k = 1.0 + 2.0 * tau * e.param(2);
    if (!(k > 0.0)) throw InvalidArgument("MM step unbounded below: E' <= -1/(2 tau)");
    res.mu1 = scale_measure(mu0, 1.0 / (k * k));
    res.exact = res.converged = true;
    finish(res, mu0, e, tau, false, opt, Eigen::MatrixXd::Zero(mu0.size(), mu0.size()));
    return res;
  }
  CoreResult core = mm_core(mu0, e, 2.0 * tau, false, 0.0, opt.seed);
  res.mu1 = DiscreteMeasure(mu0.domain(), core.rho);
  res.newton_steps = core.newton;
  res.exact = core.exact;
  res.converged = core.converged;
  res.outer_iterations = 1;
  finish(res, mu0, e, tau, false, opt, core.plan);
  for (int r = 1; r <= opt.restarts; ++r) {
    CoreResult alt = mm_core(mu0, e, 2.0 * tau, false, 0.5, opt.seed + r);
    DiscreteMeasure m1(mu0.domain(), alt.rho);
    const double obj = let_cost(alt.plan, mu0, m1) / (2.0 * tau) + e.functional(m1);
    res.restart_spread = std::max(res.restart_spread, std::abs(obj - res.objective));
  }
  return res;
}

MMStepResult mm_step_shk(const DiscreteMeasure& nu0, const Entropy& e, double tau,
                         const MMOptions& opt) {
  if (!(tau > 0.0)) throw InvalidArgument("step size must be positive");
  if (std::abs(total_mass(nu0) - 1.0) > 1e-8) throw InvalidArgument("SHK step needs unit mass");
  MMStepResult res;
  if (e.is_affine()) {
    res.mu1 = nu0;
    res.exact = res.converged = true;
    finish(res, nu0, e, tau, true, opt, Eigen::MatrixXd::Zero(nu0.size(), nu0.size()));
    return res;
  }
  auto solve = [&](double perturb, std::uint64_t seed, MMStepResult& out, Eigen::MatrixXd& plan) {
    double tau_eff = tau;
    CoreResult core;
    int it = 0;
    for (; it < opt.max_fixed_point; ++it) {
      core = mm_core(nu0, e, 2.0 * tau_eff, true, perturb, seed);
      Eigen::VectorXd rho = core.rho / core.rho.dot(nu0.domain()->weights());
      const double h = let_cost(core.plan, nu0, DiscreteMeasure(nu0.domain(), rho));
      const double next = tau / phi_prime(h);
      out.newton_steps += core.newton;
      if (std::abs(next - tau_eff) <= 1e-14 * tau) {
        tau_eff = next;
        ++it;
        break;
      }
      tau_eff = next;
    }
    out.outer_iterations = it;
    Eigen::VectorXd rho = core.rho / core.rho.dot(nu0.domain()->weights());
    out.mu1 = DiscreteMeasure(nu0.domain(), rho);
    out.exact = core.exact;
    out.converged = core.converged && it < opt.max_fixed_point + 1;
    plan = core.plan;
  };
  Eigen::MatrixXd plan;
  solve(0.0, opt.seed, res, plan);
  finish(res, nu0, e, tau, true, opt, plan);
  for (int r = 1; r <= opt.restarts; ++r) {
    MMStepResult alt;
    Eigen::MatrixXd ap;
    solve(0.5, opt.seed + r, alt, ap);
    const double h = let_cost(ap, nu0, alt.mu1);
    const double obj = std::pow(shk_from_hk(std::sqrt(std::max(0.0, h))), 2) / (2.0 * tau) +
                       e.functional(alt.mu1);
    res.restart_spread = std::max(res.restart_spread, std::abs(obj - res.objective));
  }
  return res;
}

MMStepResult mm_step(Metric m, const DiscreteMeasure& mu0, const Entropy& e, double tau,
                     const MMOptions& opt) {
  return m == Metric::HK ? mm_step_hk(mu0, e, tau, opt) : mm_step_shk(mu0, e, tau, opt);
}

MMTrajectory run_mm(Metric m, const DiscreteMeasure& mu0, const Entropy& e, double tau, int steps,
                    const MMOptions& opt) {
  if (steps < 0) throw InvalidArgument("step count must be nonnegative");
  MMTrajectory tr;
  tr.metric = m;
  tr.entropy = e;
  tr.tau = tau;
  tr.measures.push_back(mu0);
  tr.times.push_back(0.0);
  tr.energies.push_back(e.functional(mu0));
  tr.step_distance_sq.push_back(0.0);
  tr.stationarity.push_back(0.0);
  tr.objective.push_back(tr.energies.back());
  MMOptions o = opt;
  o.keep_plans = opt.keep_plans;
  for (int k = 1; k <= steps; ++k) {
    MMStepResult r = mm_step(m, tr.measures.back(), e, tau, o);
    if (!r.converged) {
      std::ostringstream os;
      os << "MM step " << k << " did not converge: stationarity " << r.stationarity << " (tol "
         << opt.tol_g << "), exact " << r.exact << ", newton steps " << r.newton_steps;
      throw SolverFailure(os.str());
    }
    tr.measures.push_back(r.mu1);
    tr.times.push_back(k * tau);
    tr.energies.push_back(e.functional(r.mu1));
    tr.step_distance_sq.push_back(r.distance_sq);
    tr.stationarity.push_back(r.stationarity);
    tr.objective.push_back(r.objective);
    if (opt.keep_plans) tr.plans.push_back(r.plan);
  }
  return tr;
}

namespace {

BoundCheck make_check(const std::string& name) {
  BoundCheck c;
  c.name = name;
  c.worst_margin = kInf;
  return c;
}

void record(BoundCheck& c, double margin, int step, double slack) {
  c.applicable = true;
  if (margin < c.worst_margin) {
    c.worst_margin = margin;
    c.worst_step = step;
  }
  c.holds = c.worst_margin >= -slack;
}

}  // namespace

std::vector<BoundCheck> check_density_bounds_hk(const MMTrajectory& tr, const HKBoundParams& prm) {
  const Entropy& e = tr.entropy;
  const double tau = tr.tau;
  const double slack = prm.slack;
  std::vector<BoundCheck> out;
  const int n = tr.steps();
  const double max0 = tr.measures[0].max_density(), min0 = tr.measures[0].min_density();

  BoundCheck up = make_check("single_step_upper");
  for (int k = 1; k <= n; ++k) {
    const double prev = tr.measures[k - 1].max_density();
    double cu;
    if (prm.c_upp) {
      cu = *prm.c_upp;
    } else if (auto r = e.derivative_root()) {
      cu = *r;
    } else if (e.d1_at_zero() >= 0.0) {
      cu = 0.0;
    } else {
      cu = prev;
    }
    const double ep = cu > 0.0 ? e.d1(cu) : e.d1_at_zero();
    if (!(ep * tau > -0.5)) continue;
    const double den = 1.0 + 2.0 * tau * std::min(ep, 0.0);
    record(up, std::max(cu, prev / (den * den)) - tr.measures[k].max_density(), k, slack);
  }
  if (!up.applicable) up.note = "needs E'(c_upp) tau > -1/2";
  out.push_back(up);

  const std::optional<double> cl = prm.c_low ? prm.c_low : e.c_low_max();
  BoundCheck lo = make_check("single_step_lower");
  BoundCheck ilo = make_check("iterated_lower");
  if (cl) {
    for (int k = 1; k <= n; ++k) {
      const double mk = tr.measures[k].min_density();
      record(lo, mk - std::min(*cl, tr.measures[k - 1].min_density()), k, slack);
      record(ilo, mk - std::min(*cl, min0), k, slack);
    }
  } else {
    lo.note = ilo.note = "no c_low > 0 with E'(c_low) <= 0";
  }
  out.push_back(lo);

  BoundCheck iup = make_check("iterated_upper");
  const double sbar = e.d1(max0);
  if (tau * sbar >= -0.25) {
    for (int k = 1; k <= n; ++k) {
      const double bound = max0 * std::exp(8.0 * std::max(-sbar, 0.0) * k * tau);
      record(iup, bound - tr.measures[k].max_density(), k, slack);
    }
  } else {
    iup.note = "needs tau inf_{c >= max rho0} E'(c) >= -1/4";
  }
  out.push_back(iup);
  out.push_back(ilo);

  BoundCheck quad = make_check("quadratic_upper");
  if (prm.e_star && prm.c_star) {
    const double es = *prm.e_star, cs = *prm.c_star;
    bool hyp = es >= 0.0 && cs > 0.0;
    for (int k = 0; hyp && k <= 200; ++k) {
      const double c = cs * std::pow(1e6, k / 200.0);
      if (e.d1(c) < -es / std::sqrt(c) - 1e-12) hyp = false;
    }
    if (hyp) {
      const double base = std::sqrt(std::max({max0, cs, 4.0 * tau * tau * es * es}));
      for (int k = 1; k <= n; ++k) {
        const double b = base + 4.0 * es * k * tau;
        record(quad, b * b - tr.measures[k].max_density(), k, slack);
      }
    } else {
      quad.note = "E'(c) >= -e*/sqrt(c) fails for c >= c*";
    }
  } else {
    quad.note = "needs e_star and c_star";
  }
  out.push_back(quad);

  BoundCheck band = make_check("root_band");
  if (auto r = e.derivative_root()) {
    for (int k = 1; k <= n; ++k) {
      const double m1 = tr.measures[k].min_density() - std::min(*r, min0);
      const double m2 = std::max(*r, max0) - tr.measures[k].max_density();
      record(band, std::min(m1, m2), k, slack);
    }
  } else {
    band.note = "E' has no root";
  }
  out.push_back(band);
  return out;
}

std::vector<BoundCheck> check_density_bounds_shk(const MMTrajectory& tr, double slack) {
  BoundCheck lo = make_check("shk_min_nondecreasing"), up = make_check("shk_max_nonincreasing");
  for (int k = 1; k <= tr.steps(); ++k) {
    record(lo, tr.measures[k].min_density() - tr.measures[k - 1].min_density(), k, slack);
    record(up, tr.measures[k - 1].max_density() - tr.measures[k].max_density(), k, slack);
  }
  return {lo, up};
}

MonotoneReport monotone_test_lemma_check(const MMTrajectory& tr, double tol) {
  if (static_cast<int>(tr.plans.size()) != tr.steps())
    throw InvalidArgument("trajectory has no recorded plans");
  MonotoneReport rep;
  for (int k = 0; k < tr.steps(); ++k) {
    const Eigen::MatrixXd& H = tr.plans[k];
    const DiscreteMeasure& m1 = tr.measures[k + 1];
    double bad = 0.0, total = 0.0;
    for (int i = 0; i < H.rows(); ++i)
      for (int j = 0; j < H.cols(); ++j) {
        const double h = H(i, j);
        if (h <= 0.0) continue;
        total += h;
        if (i != j && m1.density(j) > m1.density(i) + tol) bad += h;
      }
    const double frac = total > 0.0 ? bad / total : 0.0;
    if (frac > rep.violating_fraction || rep.worst_step < 0) {
      rep.violating_fraction = std::max(rep.violating_fraction, frac);
      rep.worst_step = k + 1;
    }
  }
  return rep;
}

double scalar_mm_step(double c0, double tau, const Entropy& e) {
  if (!(c0 >= 0.0) || !(tau > 0.0)) throw InvalidArgument("scalar MM needs c0 >= 0, tau > 0");
  auto F = [&](double c1) { return 1.0 - std::sqrt(c0 / c1) + 2.0 * tau * e.d1(c1); };
  double lo, hi;
  const double start = c0 > 0.0 ? c0 : 1.0;
  if (F(start) < 0.0) {
    lo = start;
    hi = 2.0 * start;
    int k = 0;
    while (F(hi) < 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++k > 2000 || !std::isfinite(hi))
        throw SolverFailure("scalar MM: objective unbounded below");
    }
  } else {
    hi = start;
    lo = 0.5 * start;
    while (F(lo) >= 0.0) {
      hi = lo;
      lo *= 0.5;
      if (lo < 1e-300) return 0.0;
    }
  }
  for (int it = 0; it < 400 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = F(mid);
    if (fm == 0.0) return mid;
    (fm < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> scalar_mm(double c0, double tau, const Entropy& e, int steps) {
  std::vector<double> c{c0};
  for (int k = 0; k < steps; ++k) c.push_back(scalar_mm_step(c.back(), tau, e));
  return c;
}

ScalarObservations check_scalar_observations(double c0, double c1, double tau, const Entropy& e,
                                             double a, double b, double tol) {
  ScalarObservations o;
  const auto root = e.derivative_root();
  std::optional<double> cupp, clow;
  if (root) {
    cupp = clow = *root;
  } else if (e.d1_at_zero() >= 0.0) {
    cupp = 0.0;
  } else if (e.recession_slope() <= 0.0) {
    clow = kInf;
  }
  const double rel = tol * std::max(1.0, c0);
  if (cupp && c0 >= *cupp) {
    o.d1_applicable = true;
    o.d1 = c1 <= c0 + rel;
  }
  if (clow && c0 <= *clow) {
    o.d2_applicable = true;
    o.d2 = c1 >= c0 - rel;
  }
  const double ea = a > 0.0 ? e.d1(a) : e.d1_at_zero();
  if (2.0 * tau * ea > -1.0) {
    o.d3_applicable = true;
    const double den = 1.0 + 2.0 * tau * std::min(ea, 0.0);
    o.margin3 = std::max(a, c0 / (den * den)) - c1;
    o.d3 = o.margin3 >= -rel;
  }
  const double eb = b > 0.0 ? e.d1(b) : std::max(e.d1_at_zero(), 0.0);
  const double den = 1.0 + 2.0 * tau * std::max(eb, 0.0);
  o.margin4 = c1 - std::min(b, c0 / (den * den));
  o.d4 = o.margin4 >= -rel;
  return o;
}

}  // namespace hkflow
