#include "hkflow/hk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hkflow/error.hpp"
#include "let_dual.hpp"

namespace hkflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfPi = std::numbers::pi / 2.0;

struct Reduced {
  std::vector<int> src, tgt;          // grid indices of variables
  std::vector<int> iso_src, iso_tgt;  // positive mass but no finite edge
  detail::DualProblem prob;
  Eigen::VectorXd b;
  double iso_mass = 0.0;
};

Reduced reduce(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  const auto& dom = *mu0.domain();
  const Eigen::VectorXd a = mu0.masses(), b = mu1.masses();
  const int n = dom.size();
  std::vector<int> s0, s1;
  for (int i = 0; i < n; ++i) {
    if (a[i] > 0.0) s0.push_back(i);
    if (b[i] > 0.0) s1.push_back(i);
  }
  std::vector<char> has0(n, 0), has1(n, 0);
  for (int i : s0)
    for (int j : s1)
      if (dom.distance(i, j) < kHalfPi) has0[i] = has1[j] = 1;
  Reduced r;
  std::vector<int> pos0(n, -1), pos1(n, -1);
  for (int i : s0) {
    if (has0[i]) {
      pos0[i] = static_cast<int>(r.src.size());
      r.src.push_back(i);
    } else {
      r.iso_src.push_back(i);
      r.iso_mass += a[i];
    }
  }
  for (int j : s1) {
    if (has1[j]) {
      pos1[j] = static_cast<int>(r.tgt.size());
      r.tgt.push_back(j);
    } else {
      r.iso_tgt.push_back(j);
      r.iso_mass += b[j];
    }
  }
  r.prob.a.resize(r.src.size());
  for (std::size_t k = 0; k < r.src.size(); ++k) r.prob.a[k] = a[r.src[k]];
  r.b.resize(r.tgt.size());
  for (std::size_t k = 0; k < r.tgt.size(); ++k) r.b[k] = b[r.tgt[k]];
  r.prob.ng = static_cast<int>(r.tgt.size());
  for (int i : r.src)
    for (int j : r.tgt) {
      const double d = dom.distance(i, j);
      if (d < kHalfPi) {
        r.prob.ei.push_back(pos0[i]);
        r.prob.ej.push_back(pos1[j]);
        r.prob.ec.push_back(let_cost_function(d));
      }
    }
  return r;
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// Regularized dual D_eps with reference a (x) b, minimized in negated form.
struct Entropic {
  const detail::DualProblem& p;
  const Eigen::VectorXd& b;
  double eps;

  int nf() const { return p.nf(); }
  int nv() const { return p.nf() + p.ng; }

  // Plan entry for edge e.
  double h(const Eigen::VectorXd& x, int e) const {
    const int i = p.ei[e], j = p.ej[e];
    return p.a[i] * b[j] * std::exp((x[i] + x[nf() + j] - p.ec[e]) / eps);
  }

  bool value(const Eigen::VectorXd& x, double& v) const {
    v = 0.0;
    for (int i = 0; i < nf(); ++i) v += p.a[i] * (1.0 - std::exp(-x[i]));
    for (int j = 0; j < p.ng; ++j) v += b[j] * (1.0 - std::exp(-x[nf() + j]));
    for (int e = 0; e < p.nedge(); ++e) v -= eps * (h(x, e) - p.a[p.ei[e]] * b[p.ej[e]]);
    v = -v;
    return std::isfinite(v);
  }

  // Marginal residual and gradient of the negated dual.
  double gradient(const Eigen::VectorXd& x, Eigen::VectorXd& gr, Eigen::MatrixXd* hs) const {
    gr.setZero(nv());
    if (hs) hs->setZero(nv(), nv());
    for (int i = 0; i < nf(); ++i) {
      const double e = p.a[i] * std::exp(-x[i]);
      gr[i] = -e;
      if (hs) (*hs)(i, i) += e;
    }
    for (int j = 0; j < p.ng; ++j) {
      const double e = b[j] * std::exp(-x[nf() + j]);
      gr[nf() + j] = -e;
      if (hs) (*hs)(nf() + j, nf() + j) += e;
    }
    for (int e = 0; e < p.nedge(); ++e) {
      const int i = p.ei[e], j = nf() + p.ej[e];
      const double hv = h(x, e);
      gr[i] += hv;
      gr[j] += hv;
      if (hs) {
        const double w = hv / eps;
        (*hs)(i, i) += w;
        (*hs)(j, j) += w;
        (*hs)(i, j) += w;
        (*hs)(j, i) += w;
      }
    }
    return gr.cwiseAbs().sum();
  }

  void sweep(Eigen::VectorXd& x) const {
    const double k = eps / (1.0 + eps);
    std::vector<std::vector<double>> terms(nf());
    for (int e = 0; e < p.nedge(); ++e)
      terms[p.ei[e]].push_back(std::log(b[p.ej[e]]) + (x[nf() + p.ej[e]] - p.ec[e]) / eps);
    for (int i = 0; i < nf(); ++i) x[i] = -k * log_sum_exp(terms[i]);
    std::vector<std::vector<double>> tt(p.ng);
    for (int e = 0; e < p.nedge(); ++e)
      tt[p.ej[e]].push_back(std::log(p.a[p.ei[e]]) + (x[p.ei[e]] - p.ec[e]) / eps);
    for (int j = 0; j < p.ng; ++j) x[nf() + j] = -k * log_sum_exp(tt[j]);
  }
};

Eigen::VectorXd spd_solve(Eigen::MatrixXd H, const Eigen::VectorXd& rhs) {
  const double dmax = std::max(1e-300, H.diagonal().cwiseAbs().maxCoeff());
  double shift = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
    const double next = shift == 0.0 ? 1e-14 * dmax : shift * 100.0;
    H.diagonal().array() += next - shift;
    shift = next;
  }
  return Eigen::VectorXd::Zero(rhs.size());
}

Eigen::MatrixXd expand_plan(const Reduced& r, const Eigen::VectorXd& pe, int n) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < r.prob.nedge(); ++e) H(r.src[r.prob.ei[e]], r.tgt[r.prob.ej[e]]) = pe[e];
  return H;
}

}  // namespace

double let_cost_function(double d) {
  if (d < 0.0) throw InvalidArgument("negative distance");
  if (d >= kHalfPi) return kInf;
  return -2.0 * std::log(std::cos(d));
}

double entropy_f(double r) {
  if (r < 0.0) return kInf;
  if (r == 0.0) return 1.0;
  return r * std::log(r) - r + 1.0;
}

double let_cost(const Eigen::MatrixXd& plan, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  require_same_domain(mu0, mu1);
  const auto& dom = *mu0.domain();
  const int n = dom.size();
  if (plan.rows() != n || plan.cols() != n) throw InvalidArgument("plan shape mismatch");
  const Eigen::VectorXd a = mu0.masses(), b = mu1.masses();
  double cost = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double h = plan(i, j);
      if (h < 0.0) return kInf;
      if (h > 0.0) cost += h * let_cost_function(dom.distance(i, j));
    }
  const Eigen::VectorXd e0 = plan.rowwise().sum(), e1 = plan.colwise().sum().transpose();
  for (int i = 0; i < n; ++i) {
    if (a[i] > 0.0)
      cost += a[i] * entropy_f(e0[i] / a[i]);
    else if (e0[i] > 0.0)
      return kInf;
    if (b[i] > 0.0)
      cost += b[i] * entropy_f(e1[i] / b[i]);
    else if (e1[i] > 0.0)
      return kInf;
  }
  return cost;
}

LetResult hk_distance_squared(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                              const LetOptions& opt) {
  require_same_domain(mu0, mu1);
  for (double e : opt.eps_schedule)
    if (!(e > 0.0)) throw InvalidArgument("regularization values must be positive");
  const int n = mu0.size();
  if (mu0.density() == mu1.density()) {
    LetResult res;
    const Eigen::VectorXd m = mu0.masses();
    res.plan = m.asDiagonal();
    res.f = res.g = (m.array() > 0.0).select(Eigen::VectorXd::Zero(n), kInf);
    res.converged = res.exact = true;
    return res;
  }
  Reduced r = reduce(mu0, mu1);
  detail::MassTarget target(r.b);
  r.prob.target = &target;
  LetResult res;
  res.f = Eigen::VectorXd::Constant(n, kInf);
  res.g = Eigen::VectorXd::Constant(n, kInf);
  if (r.prob.nedge() == 0) {
    res.plan = Eigen::MatrixXd::Zero(n, n);
    res.value = res.dual_value = r.iso_mass;
    res.converged = res.exact = true;
    return res;
  }
  const int nv = r.prob.nvar();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv);
  Eigen::VectorXd gr;
  Eigen::MatrixXd hs;
  bool stages_ok = true;
  double last_eps = 1.0;
  for (double eps : opt.eps_schedule) {
    Entropic ent{r.prob, r.b, eps};
    EpsStage st;
    st.eps = eps;
    double resid = ent.gradient(x, gr, nullptr);
    for (; st.sweeps < opt.max_sweeps && resid > opt.tol; ++st.sweeps) {
      ent.sweep(x);
      resid = ent.gradient(x, gr, nullptr);
      if (st.sweeps >= 20 && resid > 1e-3) break;  // slow regime; hand over to Newton
    }
    for (; st.newton < opt.max_newton && resid > opt.tol; ++st.newton) {
      resid = ent.gradient(x, gr, &hs);
      Eigen::VectorXd dx = spd_solve(hs, -gr);
      double v0;
      ent.value(x, v0);
      const double slope = gr.dot(dx);
      double alpha = 1.0;
      bool moved = false;
      while (alpha > 1e-12) {
        Eigen::VectorXd xn = x + alpha * dx;
        double v1;
        if (ent.value(xn, v1) && v1 <= v0 + 0.25 * alpha * slope + 1e-15 * std::abs(v0)) {
          x = std::move(xn);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      resid = ent.gradient(x, gr, nullptr);
      if (!moved) break;
    }
    st.residual = resid;
    st.converged = resid <= opt.tol;
    Eigen::VectorXd pe(r.prob.nedge());
    for (int e = 0; e < r.prob.nedge(); ++e) pe[e] = ent.h(x, e);
    st.value = let_cost(expand_plan(r, pe, n), mu0, mu1);
    stages_ok = stages_ok && st.converged;
    res.path.push_back(st);
    last_eps = eps;
  }
  Eigen::VectorXd plan_e(r.prob.nedge());
  if (opt.refine) {
    Eigen::VectorXd x0 = x;
    detail::make_feasible(r.prob, x0, last_eps);
    detail::BarrierOptions bo;
    bo.gap_target = opt.gap_tol;
    const double mass = r.prob.a.sum() + r.b.sum();
    bo.t0 = r.prob.nedge() / std::max(last_eps * mass, 1e-300);
    detail::DualSolution sol =
        detail::solve_dual(r.prob, x0, bo, std::max(r.prob.a.maxCoeff(), r.b.maxCoeff()));
    x = sol.x;
    plan_e = sol.plan;
    res.exact = sol.exact;
    res.converged = sol.converged || sol.exact;
  } else {
    Entropic ent{r.prob, r.b, last_eps};
    for (int e = 0; e < r.prob.nedge(); ++e) plan_e[e] = ent.h(x, e);
    res.converged = stages_ok;
  }
  res.plan = expand_plan(r, plan_e, n);
  res.value = let_cost(res.plan, mu0, mu1);
  Eigen::VectorXd xf = x;
  detail::make_feasible(r.prob, xf, 0.0);
  res.dual_value = detail::dual_value(r.prob, xf) + r.iso_mass;
  res.gap = res.value - res.dual_value;
  for (std::size_t k = 0; k < r.src.size(); ++k) res.f[r.src[k]] = xf[k];
  for (std::size_t k = 0; k < r.tgt.size(); ++k) res.g[r.tgt[k]] = xf[r.prob.nf() + k];
  const Eigen::VectorXd e0 = res.plan.rowwise().sum(), e1 = res.plan.colwise().sum().transpose();
  const Eigen::VectorXd a = mu0.masses(), b = mu1.masses();
  for (int i = 0; i < n; ++i) {
    if (a[i] > 0.0) res.residual0 += std::abs((std::isfinite(res.f[i]) ? a[i] * std::exp(-res.f[i]) : 0.0) - e0[i]);
    if (b[i] > 0.0) res.residual1 += std::abs((std::isfinite(res.g[i]) ? b[i] * std::exp(-res.g[i]) : 0.0) - e1[i]);
  }
  if (!std::isfinite(res.value)) throw SolverFailure("LET solve produced an infinite cost");
  return res;
}

double hk_distance(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const LetOptions& opt) {
  return std::sqrt(std::max(0.0, hk_distance_squared(mu0, mu1, opt).value));
}

ExactLetResult hk_exact_small(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  using LD = long double;
  using MatL = Eigen::Matrix<LD, Eigen::Dynamic, Eigen::Dynamic>;
  using VecL = Eigen::Matrix<LD, Eigen::Dynamic, 1>;
  require_same_domain(mu0, mu1);
  const auto& dom = *mu0.domain();
  const int n = dom.size();
  const Eigen::VectorXd a = mu0.masses(), b = mu1.masses();
  int support = 0;
  for (int i = 0; i < n; ++i)
    if (a[i] > 0.0 || b[i] > 0.0) ++support;
  if (support > kExactMaxSupport)
    throw SupportTooLarge("exact LET oracle supports at most " + std::to_string(kExactMaxSupport) +
                          " nodes, got " + std::to_string(support));
  std::vector<int> ei, ej;
  std::vector<LD> c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a[i] > 0.0 && b[j] > 0.0 && dom.distance(i, j) < kHalfPi) {
        ei.push_back(i);
        ej.push_back(j);
        c.push_back(-2.0L * std::log(std::cos(static_cast<LD>(dom.distance(i, j)))));
      }
  const int m = static_cast<int>(c.size());
  ExactLetResult res;
  res.plan = Eigen::MatrixXd::Zero(n, n);
  LD total = 0.0L;
  for (int i = 0; i < n; ++i) total += static_cast<LD>(a[i]) + static_cast<LD>(b[i]);
  if (m == 0) {
    res.value = res.dual_value = static_cast<double>(total);
    return res;
  }
  auto marg = [&](const VecL& H, VecL& e0, VecL& e1) {
    e0 = VecL::Zero(n);
    e1 = VecL::Zero(n);
    for (int e = 0; e < m; ++e) {
      e0[ei[e]] += H[e];
      e1[ej[e]] += H[e];
    }
  };
  auto primal = [&](const VecL& H) {
    VecL e0, e1;
    marg(H, e0, e1);
    LD v = 0.0L;
    for (int i = 0; i < n; ++i) {
      auto term = [](LD mass, LD eta) {
        if (mass <= 0.0L) return 0.0L;
        if (eta <= 0.0L) return mass;
        const LD r = eta / mass;
        return mass * (r * std::log(r) - r + 1.0L);
      };
      v += term(a[i], e0[i]) + term(b[i], e1[i]);
    }
    for (int e = 0; e < m; ++e) v += c[e] * H[e];
    return v;
  };
  VecL H(m);
  for (int e = 0; e < m; ++e) H[e] = std::min<LD>(a[ei[e]], b[ej[e]]) / (2.0L * m);
  LD t = 1.0L;
  VecL e0, e1, gr(m);
  MatL hs(m, m);
  for (int stage = 0; stage < 80; ++stage) {
    for (int it = 0; it < 200; ++it) {
      marg(H, e0, e1);
      for (int e = 0; e < m; ++e)
        gr[e] = t * (std::log(e0[ei[e]] / a[ei[e]]) + std::log(e1[ej[e]] / b[ej[e]]) + c[e]) -
                1.0L / H[e];
      for (int e = 0; e < m; ++e)
        for (int k = 0; k < m; ++k) {
          LD v = 0.0L;
          if (ei[e] == ei[k]) v += t / e0[ei[e]];
          if (ej[e] == ej[k]) v += t / e1[ej[e]];
          if (e == k) v += 1.0L / (H[e] * H[e]);
          hs(e, k) = v;
        }
      VecL dx = hs.ldlt().solve(-gr);
      const LD dec = -gr.dot(dx);
      if (dec < 1e-24L) break;
      // Stay in the positive orthant, then backtrack on the barrier objective.
      LD alpha = 1.0L;
      for (int e = 0; e < m; ++e)
        if (dx[e] < 0.0L) alpha = std::min(alpha, -0.99L * H[e] / dx[e]);
      auto bobj = [&](const VecL& h) {
        LD v = t * primal(h);
        for (int e = 0; e < m; ++e) v -= std::log(h[e]);
        return v;
      };
      const LD f0 = bobj(H);
      while (alpha > 1e-18L) {
        VecL hn = H + alpha * dx;
        if (bobj(hn) <= f0 - 0.25L * alpha * dec) {
          H = hn;
          break;
        }
        alpha *= 0.5L;
      }
      if (alpha <= 1e-18L) break;
    }
    if (m / t < 1e-14L) break;
    t *= 10.0L;
  }
  marg(H, e0, e1);
  const LD P = primal(H);
  // Dual point f = -log(eta0 / a), g = -log(eta1 / b) is feasible on every edge at the center.
  LD D = 0.0L;
  for (int i = 0; i < n; ++i) {
    if (a[i] > 0.0) D += static_cast<LD>(a[i]) - e0[i];
    if (b[i] > 0.0) D += static_cast<LD>(b[i]) - e1[i];
  }
  LD kkt = 0.0L;
  for (int e = 0; e < m; ++e) {
    const LD s = std::log(e0[ei[e]] / a[ei[e]]) + std::log(e1[ej[e]] / b[ej[e]]) + c[e];
    kkt = std::max(kkt, std::max(std::abs(H[e] * s), -s));
    res.plan(ei[e], ej[e]) = static_cast<double>(H[e]);
  }
  res.value = static_cast<double>(P);
  res.dual_value = static_cast<double>(D);
  res.gap = static_cast<double>(P - D);
  res.kkt_residual = static_cast<double>(kkt);
  if (!(res.gap < 1e-10) || !(kkt < 1e-10L))
    throw SolverFailure("exact LET oracle did not certify optimality (gap " +
                        std::to_string(res.gap) + ")");
  return res;
}

double shk_from_hk(double hk) { return 2.0 * std::asin(std::min(1.0, std::max(0.0, hk) / 2.0)); }

double shk_distance(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1, const LetOptions& opt) {
  require_same_domain(nu0, nu1);
  if (std::abs(total_mass(nu0) - 1.0) > 1e-8 || std::abs(total_mass(nu1) - 1.0) > 1e-8)
    throw InvalidArgument("SHK needs probability measures");
  return shk_from_hk(hk_distance(nu0, nu1, opt));
}

double hk_mass_lower_bound(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  const double d = std::sqrt(total_mass(mu0)) - std::sqrt(total_mass(mu1));
  return d * d;
}

double hk_two_dirac(double a, double b, double d) {
  if (a < 0.0 || b < 0.0 || d < 0.0) throw InvalidArgument("two-Dirac inputs must be nonnegative");
  return a + b - 2.0 * std::sqrt(a * b) * std::cos(std::min(d, kHalfPi));
}

DilationResult dilation_cost(const Eigen::VectorXd& q, const std::vector<int>& map,
                             const DiscreteMeasure& mu0) {
  const auto& dom = *mu0.domain();
  const int n = dom.size();
  if (q.size() != n || static_cast<int>(map.size()) != n) throw InvalidArgument("dilation size mismatch");
  const Eigen::VectorXd a = mu0.masses();
  std::vector<int> hit(n, -1);
  Eigen::VectorXd img = Eigen::VectorXd::Zero(n);
  double cost = 0.0;
  for (int i = 0; i < n; ++i) {
    if (a[i] <= 0.0) continue;
    const int j = map[i];
    if (j < 0 || j >= n) throw InvalidArgument("map target outside the grid");
    if (!(q[i] >= 0.0)) throw InvalidArgument("growth factor must be nonnegative");
    if (hit[j] >= 0) throw InvalidArgument("map is not injective on the support");
    hit[j] = i;
    const double d = std::min(dom.distance(i, j), kHalfPi);
    cost += a[i] * (1.0 + q[i] * q[i] - 2.0 * q[i] * std::cos(d));
    img[j] += q[i] * q[i] * a[i] / dom.weights()[j];
  }
  return {cost, DiscreteMeasure(mu0.domain(), img)};
}

double check_scaling_identity(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, double t0,
                              double t1, const LetOptions& opt) {
  if (!(t0 >= 0.0) || !(t1 >= 0.0)) throw InvalidArgument("scaling factors must be nonnegative");
  const double base = hk_distance_squared(mu0, mu1, opt).value;
  const double scaled =
      hk_distance_squared(scale_measure(mu0, t0 * t0), scale_measure(mu1, t1 * t1), opt).value;
  const double rhs = t0 * t1 * base + (t0 * t0 - t0 * t1) * total_mass(mu0) +
                     (t1 * t1 - t0 * t1) * total_mass(mu1);
  return std::abs(scaled - rhs);
}

double cone_distance(const ConePoint& p0, const ConePoint& p1) {
  if (p0.r < 0.0 || p1.r < 0.0) throw InvalidArgument("cone radius must be nonnegative");
  if (p0.x.size() != p1.x.size()) throw InvalidArgument("cone base dimension mismatch");
  const double d = std::min((p0.x - p1.x).norm(), std::numbers::pi);
  const double s = std::sin(0.5 * d);
  const double dr = p0.r - p1.r;
  return std::sqrt(dr * dr + 4.0 * p0.r * p1.r * s * s);
}

std::vector<WeightedConePoint> cone_lift(const DiscreteMeasure& mu) {
  std::vector<WeightedConePoint> out;
  const auto& dom = *mu.domain();
  for (int i = 0; i < mu.size(); ++i) {
    if (mu.density(i) <= 0.0) continue;
    out.push_back({{dom.coords().row(i).transpose(), std::sqrt(mu.density(i))}, dom.weights()[i]});
  }
  return out;
}

DiscreteMeasure cone_project(const std::vector<WeightedConePoint>& pts, const DomainPtr& domain) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(domain->size());
  for (const auto& p : pts) {
    if (p.weight < 0.0 || p.point.r < 0.0) throw InvalidArgument("negative cone weight or radius");
    const int k = domain->find_node(p.point.x);
    if (k < 0) throw InvalidArgument("cone point base is not a grid node");
    rho[k] += p.weight * p.point.r * p.point.r / domain->weights()[k];
  }
  return DiscreteMeasure(domain, rho);
}

}  // namespace hkflow
