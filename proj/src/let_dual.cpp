#include "let_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hkflow::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Value of D and optionally its derivatives. False outside the domain.
bool dual_parts(const DualProblem& p, const Eigen::VectorXd& x, double& val, Eigen::VectorXd* grad,
                Eigen::MatrixXd* hess) {
  const int nf = p.nf(), ng = p.ng;
  const bool lam_on = p.target->has_lambda();
  const double lam = lam_on ? x[nf + ng] : 0.0;
  val = 0.0;
  if (grad) grad->setZero(p.nvar());
  if (hess) hess->setZero(p.nvar(), p.nvar());
  for (int i = 0; i < nf; ++i) {
    const double e = std::exp(-x[i]);
    if (!std::isfinite(e)) return false;
    val += p.a[i] * (1.0 - e);
    if (grad) (*grad)[i] = p.a[i] * e;
    if (hess) (*hess)(i, i) = -p.a[i] * e;
  }
  TargetEval te;
  for (int j = 0; j < ng; ++j) {
    if (!p.target->eval(j, x[nf + j], lam, te)) return false;
    val += te.v;
    if (grad) {
      (*grad)[nf + j] = te.dg;
      if (lam_on) (*grad)[nf + ng] += te.dl;
    }
    if (hess) {
      (*hess)(nf + j, nf + j) = te.dgg;
      if (lam_on) {
        (*hess)(nf + j, nf + ng) = (*hess)(nf + ng, nf + j) = te.dgl;
        (*hess)(nf + ng, nf + ng) += te.dll;
      }
    }
  }
  if (lam_on) {
    double v, dl, dll;
    if (!p.target->eval_xi(lam, v, dl, dll)) return false;
    val += v;
    if (grad) (*grad)[nf + ng] += dl;
    if (hess) (*hess)(nf + ng, nf + ng) += dll;
  }
  return std::isfinite(val);
}

// Barrier objective -t D - sum log s.
bool barrier_eval(const DualProblem& p, const Eigen::VectorXd& x, double t, double& phi,
                  Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
  const int nf = p.nf();
  double logsum = 0.0;
  Eigen::VectorXd s(p.nedge());
  for (int e = 0; e < p.nedge(); ++e) {
    s[e] = (p.ec[e] - x[p.ei[e]]) - x[nf + p.ej[e]];
    if (!(s[e] > 0.0)) return false;
    logsum += std::log(s[e]);
  }
  double d;
  if (!dual_parts(p, x, d, grad, hess)) return false;
  phi = -t * d - logsum;
  if (grad) *grad *= -t;
  if (hess) *hess *= -t;
  if (grad || hess) {
    for (int e = 0; e < p.nedge(); ++e) {
      const int i = p.ei[e], j = nf + p.ej[e];
      const double inv = 1.0 / s[e];
      if (grad) {
        (*grad)[i] += inv;
        (*grad)[j] += inv;
      }
      if (hess) {
        const double w = inv * inv;
        (*hess)(i, i) += w;
        (*hess)(j, j) += w;
        (*hess)(i, j) += w;
        (*hess)(j, i) += w;
      }
    }
  }
  return std::isfinite(phi);
}

Eigen::VectorXd solve_spd(Eigen::MatrixXd H, const Eigen::VectorXd& rhs) {
  double shift = 0.0;
  const double dmax = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd dx = llt.solve(rhs);
      if (dx.allFinite()) return dx;
    }
    const double next = shift == 0.0 ? 1e-14 * dmax : shift * 100.0;
    H.diagonal().array() += next - shift;
    shift = next;
  }
  return Eigen::VectorXd::Zero(rhs.size());
}

}  // namespace

bool MassTarget::eval(int j, double g, double lam, TargetEval& out) const {
  (void)lam;
  const double e = std::exp(-g);
  if (!std::isfinite(e)) return false;
  out.v = b_[j] * (1.0 - e);
  out.dg = b_[j] * e;
  out.dgg = -b_[j] * e;
  out.dl = out.dll = out.dgl = 0.0;
  return true;
}

double dual_value(const DualProblem& p, const Eigen::VectorXd& x) {
  double v;
  if (!dual_parts(p, x, v, nullptr, nullptr)) return -kInf;
  return v;
}

Eigen::VectorXd edge_slacks(const DualProblem& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd s(p.nedge());
  for (int e = 0; e < p.nedge(); ++e) s[e] = (p.ec[e] - x[p.ei[e]]) - x[p.nf() + p.ej[e]];
  return s;
}

void make_feasible(const DualProblem& p, Eigen::VectorXd& x, double margin) {
  Eigen::VectorXd fmax = Eigen::VectorXd::Constant(p.nf(), kInf);
  for (int e = 0; e < p.nedge(); ++e)
    fmax[p.ei[e]] = std::min(fmax[p.ei[e]], p.ec[e] - x[p.nf() + p.ej[e]] - margin);
  for (int i = 0; i < p.nf(); ++i) x[i] = std::min(x[i], fmax[i]);
}

DualSolution barrier_solve(const DualProblem& p, const Eigen::VectorXd& x0,
                           const BarrierOptions& opt) {
  DualSolution sol;
  sol.x = x0;
  const int m = std::max(1, p.nedge());
  double scale = p.a.sum();
  double t = opt.t0 > 0.0 ? opt.t0 : m / std::max(scale, 1e-12);
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  bool ok = true;
  while (true) {
    for (int it = 0; it < opt.max_newton; ++it) {
      double phi;
      if (!barrier_eval(p, sol.x, t, phi, &grad, &hess)) {
        ok = false;
        break;
      }
      Eigen::VectorXd dx = solve_spd(hess, -grad);
      const double slope = grad.dot(dx);
      ++sol.newton_steps;
      if (-slope * 0.5 < opt.newton_tol) break;
      double alpha = 1.0;
      const double slack = 1e-13 * (std::abs(phi) + 1.0);
      bool moved = false;
      while (alpha > 1e-14) {
        Eigen::VectorXd xn = sol.x + alpha * dx;
        double phin;
        if (barrier_eval(p, xn, t, phin, nullptr, nullptr) &&
            phin <= phi + 0.25 * alpha * slope + slack) {
          sol.x = std::move(xn);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    if (!ok) break;
    if (m / t <= opt.gap_target) {
      sol.converged = true;
      break;
    }
    t *= opt.mu;
  }
  sol.t = t;
  Eigen::VectorXd s = edge_slacks(p, sol.x);
  sol.plan.resize(p.nedge());
  for (int e = 0; e < p.nedge(); ++e) sol.plan[e] = 1.0 / (t * s[e]);
  sol.dual_value = dual_value(p, sol.x);
  return sol;
}

bool crossover(const DualProblem& p, DualSolution& sol, double mass_scale) {
  const int nv = p.nvar(), nf = p.nf();
  const double ms = std::max(mass_scale, 1e-300);
  std::vector<char> active(p.nedge(), 0);
  {
    Eigen::VectorXd s = edge_slacks(p, sol.x);
    for (int e = 0; e < p.nedge(); ++e) active[e] = sol.plan[e] / ms > s[e];
  }
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  for (int round = 0; round < 40; ++round) {
    std::vector<int> A;
    for (int e = 0; e < p.nedge(); ++e)
      if (active[e]) A.push_back(e);
    const int na = static_cast<int>(A.size());
    Eigen::VectorXd x = sol.x;
    Eigen::VectorXd y(na);
    for (int k = 0; k < na; ++k) y[k] = sol.plan[A[k]];
    auto residual = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& yy, Eigen::VectorXd& r,
                        bool derivs) {
      double v;
      if (!dual_parts(p, xx, v, &grad, derivs ? &hess : nullptr)) return false;
      r.resize(nv + na);
      r.head(nv) = grad;
      for (int k = 0; k < na; ++k) {
        const int e = A[k];
        r[p.ei[e]] -= yy[k];
        r[nf + p.ej[e]] -= yy[k];
        r[nv + k] = xx[p.ei[e]] + xx[nf + p.ej[e]] - p.ec[e];
      }
      return true;
    };
    auto rnorm = [&](const Eigen::VectorXd& r) {
      return r.head(nv).cwiseAbs().maxCoeff() / ms + (na ? r.tail(na).cwiseAbs().maxCoeff() : 0.0);
    };
    Eigen::VectorXd r;
    if (!residual(x, y, r, true)) return false;
    double rn = rnorm(r);
    bool good = false;
    for (int it = 0; it < 60; ++it) {
      if (rn < 1e-13) {
        good = true;
        break;
      }
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + na, nv + na);
      K.topLeftCorner(nv, nv) = hess;
      for (int k = 0; k < na; ++k) {
        const int e = A[k];
        const int i = p.ei[e], j = nf + p.ej[e];
        K(i, nv + k) = -1.0;
        K(j, nv + k) = -1.0;
        K(nv + k, i) = 1.0;
        K(nv + k, j) = 1.0;
      }
      Eigen::VectorXd d = Eigen::PartialPivLU<Eigen::MatrixXd>(K).solve(-r);
      if (!d.allFinite() || (K * d + r).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + r.cwiseAbs().maxCoeff()))
        d = Eigen::FullPivLU<Eigen::MatrixXd>(K).solve(-r);
      if (!d.allFinite()) return false;
      double alpha = 1.0;
      bool moved = false;
      while (alpha > 1e-6) {
        Eigen::VectorXd xn = x + alpha * d.head(nv);
        Eigen::VectorXd yn = y + alpha * d.tail(na);
        Eigen::VectorXd rn_vec;
        if (residual(xn, yn, rn_vec, false)) {
          const double nn = rnorm(rn_vec);
          if (nn < rn * (1.0 - 1e-4 * alpha) || nn < 1e-13) {
            x = std::move(xn);
            y = std::move(yn);
            moved = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      if (!moved) {
        good = rn < 1e-10;
        break;
      }
      if (!residual(x, y, r, true)) return false;
      rn = rnorm(r);
    }
    if (!good && rn < 1e-10) good = true;
    if (!good) return false;
    // Sign checks: plan on A nonnegative, slack off A nonnegative.
    Eigen::VectorXd s = edge_slacks(p, x);
    bool changed = false;
    const double ytol = 1e-13 * ms, stol = 1e-12;
    for (int k = 0; k < na; ++k)
      if (y[k] < -ytol) {
        active[A[k]] = 0;
        changed = true;
      }
    for (int e = 0; e < p.nedge(); ++e)
      if (!active[e] && s[e] < -stol) {
        active[e] = 1;
        changed = true;
      }
    if (!changed) {
      sol.x = x;
      sol.plan.setZero(p.nedge());
      for (int k = 0; k < na; ++k) sol.plan[A[k]] = std::max(y[k], 0.0);
      sol.dual_value = dual_value(p, x);
      sol.exact = true;
      return true;
    }
  }
  return false;
}

DualSolution solve_dual(const DualProblem& p, const Eigen::VectorXd& x0, BarrierOptions opt,
                        double mass_scale) {
  const double deep = opt.gap_target;
  opt.gap_target = std::max(deep, 1e-7 * std::max(p.a.sum(), 1e-300));
  DualSolution sol = barrier_solve(p, x0, opt);
  if (sol.converged) {
    DualSolution trial = sol;
    if (crossover(p, trial, mass_scale)) return trial;
  }
  if (opt.gap_target > deep) {
    BarrierOptions o2 = opt;
    o2.gap_target = deep;
    o2.t0 = sol.t * opt.mu;
    const int steps = sol.newton_steps;
    DualSolution s2 = barrier_solve(p, sol.x, o2);
    s2.newton_steps += steps;
    DualSolution trial = s2;
    if (s2.converged && crossover(p, trial, mass_scale)) return trial;
    return s2;
  }
  return sol;
}

}  // namespace hkflow::detail
