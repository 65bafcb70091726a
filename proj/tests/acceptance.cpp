// Acceptance suite: one line per criterion. Usage: acceptance [--only N]
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hkflow/evi.hpp"
#include "hkflow/experiment.hpp"
#include "hkflow/geometry.hpp"
#include "hkflow/hk.hpp"
#include "hkflow/io.hpp"
#include "hkflow/mm.hpp"
#include "hkflow/pde.hpp"
#include "oracles.hpp"

using namespace hkflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::string fmt(double v) { return format_number(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DiscreteMeasure random_sparse(const DomainPtr& d, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> node(0, d->size() - 1);
  std::uniform_real_distribution<double> dens(0.2, 3.0);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(d->size());
  for (int i = 0; i < k; ++i) rho[node(rng)] = dens(rng);
  if (rho.maxCoeff() == 0.0) rho[0] = 1.0;
  return DiscreteMeasure(d, rho);
}

DiscreteMeasure cosine_measure(int n, double base, double amp) {
  auto d = GridDomain::interval(0.0, 1.0, n);
  Eigen::VectorXd rho(n);
  for (int i = 0; i < n; ++i) rho[i] = base + amp * std::cos(oracle::kPi * d->coords()(i, 0));
  return DiscreteMeasure(d, rho);
}

double l1_gap(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return (a.density() - b.density()).cwiseAbs().dot(a.domain()->weights());
}

// E = alpha c^m + gamma c
struct PowerEntropy {
  double alpha, m, gamma;
  double d1(double c) const { return alpha * m * std::pow(c, m - 1.0) + gamma; }
};

Outcome c1_oracle_agreement() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> support(1, 4);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    auto dom = GridDomain::interval(0.0, 2.0, 9);
    const auto a = random_sparse(dom, support(rng), rng), b = random_sparse(dom, support(rng), rng);
    const double v = hk_distance_squared(a, b).value;
    const double x = hk_exact_small(a, b).value;
    worst = std::max(worst, std::abs(v - x) / (1.0 + x));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0, "worst relative gap " + fmt(worst) + ", " + fmt(secs) + " s"};
}

Outcome c2_closed_forms() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> mass(0.05, 4.0), dist(0.01, 3.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double a = mass(rng), b = mass(rng), d = dist(rng);
    auto dom = GridDomain::interval(0.0, d, 2);
    Eigen::VectorXd r0(2), r1(2);
    r0 << a / dom->weights()[0], 0.0;
    r1 << 0.0, b / dom->weights()[1];
    const double v = hk_distance_squared(DiscreteMeasure(dom, r0), DiscreteMeasure(dom, r1)).value;
    worst = std::max(worst, std::abs(v - oracle::two_dirac(a, b, d)));
  }
  double zero_gap = 0.0, self = 0.0;
  for (int k = 0; k < 20; ++k) {
    auto dom = GridDomain::interval(0.0, 1.0, 10);
    const auto mu = random_sparse(dom, 5, rng);
    zero_gap = std::max(zero_gap, std::abs(hk_distance_squared(DiscreteMeasure::zero(dom), mu).value - total_mass(mu)));
    self = std::max(self, hk_distance_squared(mu, mu).value);
    const auto nu = cosine_measure(10, 1.0, 0.4);
    self = std::max(self, hk_distance_squared(nu, nu).value);
  }
  return {worst <= 1e-5 && zero_gap <= 1e-8 && self <= 1e-8,
          "two-Dirac " + fmt(worst) + ", zero " + fmt(zero_gap) + ", self " + fmt(self)};
}

Outcome c3_scaling() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> t(0.1, 2.5);
  double worst = 0.0;
  for (int k = 0; k < 25; ++k) {
    auto dom = GridDomain::interval(0.0, 1.5, 8);
    const auto a = random_sparse(dom, 3, rng), b = random_sparse(dom, 3, rng);
    const double t0 = t(rng), t1 = t(rng);
    const double base = hk_distance_squared(a, b).value;
    const double lhs = hk_distance_squared(scale_measure(a, t0 * t0), scale_measure(b, t1 * t1)).value;
    const double rhs = t0 * t1 * base + (t0 * t0 - t0 * t1) * total_mass(a) + (t1 * t1 - t0 * t1) * total_mass(b);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return {worst <= 1e-6, "worst relative residual " + fmt(worst)};
}

Outcome c4_metric_axioms() {
  std::mt19937_64 rng(404);
  double tri_hk = -1e300, tri_shk = -1e300, lower = -1e300;
  for (int k = 0; k < 100; ++k) {
    auto dom = GridDomain::interval(0.0, 2.0, 8);
    const auto a = random_sparse(dom, 3, rng), b = random_sparse(dom, 3, rng), c = random_sparse(dom, 3, rng);
    const double ab = hk_distance(a, b), bc = hk_distance(b, c), ac = hk_distance(a, c);
    tri_hk = std::max(tri_hk, ac - ab - bc);
    const auto na = normalize(a), nb = normalize(b), nc = normalize(c);
    tri_shk = std::max(tri_shk, shk_distance(na, nc) - shk_distance(na, nb) - shk_distance(nb, nc));
    const double ma = total_mass(a), mb = total_mass(b);
    const double lb = (std::sqrt(ma) - std::sqrt(mb)) * (std::sqrt(ma) - std::sqrt(mb));
    lower = std::max(lower, lb - ab * ab);
  }
  return {tri_hk <= 1e-6 && tri_shk <= 1e-6 && lower <= 1e-9,
          "triangle excess HK " + fmt(tri_hk) + ", SHK " + fmt(tri_shk) + ", lower-bound excess " + fmt(lower)};
}

Outcome c5_shk_maximum_principle() {
  const auto mu0 = normalize(cosine_measure(32, 1.0, 0.5));
  const auto tr = run_mm(Metric::SHK, mu0, Entropy::neg_power(0.5, 1.0), 0.01, 20);
  double worst = -1e300, mass = 0.0;
  for (int k = 1; k <= tr.steps(); ++k) {
    worst = std::max(worst, tr.measures[k].max_density() - tr.measures[k - 1].max_density());
    worst = std::max(worst, tr.measures[k - 1].min_density() - tr.measures[k].min_density());
    mass = std::max(mass, std::abs(total_mass(tr.measures[k]) - 1.0));
  }
  return {worst <= 1e-6 && mass <= 1e-8, "worst range growth " + fmt(worst) + ", mass drift " + fmt(mass)};
}

Outcome c6_hk_density_bounds() {
  auto d = GridDomain::interval(0.0, 1.0, 32);
  Eigen::VectorXd rho(32);
  for (int i = 0; i < 32; ++i) rho[i] = 0.5 + 0.1 * std::cos(oracle::kPi * d->coords()(i, 0));
  const PowerEntropy pe{1.0, 2.0, -1.0};
  const double tau = 0.01;
  const auto tr = run_mm(Metric::HK, DiscreteMeasure(d, rho), Entropy::power_mass(1.0, 2.0, -1.0), tau, 30);
  // E' = 2c - 1: c_upp = c_low = 1/2; E'(c) >= 0 for c >= c_* = 1/2, so e_* = 0.
  const double c_root = 0.5, c_star = 0.5, e_star = 0.0;
  const double max0 = tr.measures[0].max_density(), min0 = tr.measures[0].min_density();
  const double sbar = pe.d1(max0);
  double low = 1e300, single = 1e300, iter = 1e300, quad = 1e300;
  for (int k = 1; k <= tr.steps(); ++k) {
    const double mk = tr.measures[k].max_density();
    low = std::min(low, tr.measures[k].min_density() - std::min(0.4, c_root));
    const double den = 1.0 + 2.0 * tau * std::min(pe.d1(c_root), 0.0);
    single = std::min(single, std::max(c_root, tr.measures[k - 1].max_density() / (den * den)) - mk);
    iter = std::min(iter, max0 * std::exp(8.0 * std::max(-sbar, 0.0) * k * tau) - mk);
    const double q = std::sqrt(std::max({max0, c_star, 4.0 * tau * tau * e_star * e_star})) + 4.0 * e_star * k * tau;
    quad = std::min(quad, q * q - mk);
  }
  HKBoundParams p;
  p.e_star = e_star;
  p.c_star = c_star;
  bool lib = true;
  for (const auto& b : check_density_bounds_hk(tr, p))
    if (b.applicable && !b.holds) lib = false;
  const bool ok = low >= -1e-6 && single >= -1e-6 && iter >= -1e-6 && quad >= -1e-6 && lib && min0 >= 0.4 - 1e-12;
  return {ok, "margins lower " + fmt(low) + ", single-step upper " + fmt(single) + ", iterated " + fmt(iter) +
                  ", quadratic " + fmt(quad) + (lib ? "" : ", library check failed")};
}

Outcome c7_scalar_consistency() {
  auto d = GridDomain::interval(0.0, 1.0, 32);
  const PowerEntropy pe{1.0, 2.0, 0.0};
  const Entropy e = Entropy::power_mass(1.0, 2.0, 0.0);
  const double tau = 0.05;
  const auto tr = run_mm(Metric::HK, DiscreteMeasure::uniform(d, 1.0), e, tau, 10);
  double worst = 0.0, c = 1.0;
  for (int k = 1; k <= 10; ++k) {
    c = oracle::scalar_step(c, tau, [&](double x) { return pe.d1(x); });
    const auto& r = tr.measures[k].density();
    worst = std::max(worst, (r.array() - c).abs().maxCoeff() / c);
  }
  const auto ts = run_mm(Metric::SHK, DiscreteMeasure::uniform(d, 1.0), e, tau, 10);
  double shk = 0.0;
  for (int k = 1; k <= 10; ++k) shk = std::max(shk, (ts.measures[k].density().array() - 1.0).abs().maxCoeff());
  return {worst <= 1e-4 && shk <= 1e-4, "HK worst relative " + fmt(worst) + ", SHK worst " + fmt(shk)};
}

Outcome c8_scalar_observations() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int failures = 0, d3_used = 0;
  double worst_el = 0.0;
  for (int k = 0; k < 200; ++k) {
    const PowerEntropy pe{0.2 + 2.0 * u01(rng), 1.2 + 2.0 * u01(rng), -3.0 + 4.0 * u01(rng)};
    const Entropy e = Entropy::power_mass(pe.alpha, pe.m, pe.gamma);
    const double c0 = std::exp(-3.0 + 5.0 * u01(rng)), tau = std::exp(-6.0 + 5.0 * u01(rng));
    const double a = std::exp(-3.0 + 5.0 * u01(rng)), b = std::exp(-3.0 + 5.0 * u01(rng));
    const double c1 = scalar_mm_step(c0, tau, e);
    const double ref = oracle::scalar_step(c0, tau, [&](double x) { return pe.d1(x); });
    worst_el = std::max(worst_el, std::abs(c1 - ref) / ref);
    const double tol = 1e-9 * std::max(1.0, c0);
    // c_upp = c_low = root of E' (gamma < 0), else E' >= 0 everywhere
    const double root = pe.gamma < 0.0 ? std::pow(-pe.gamma / (pe.alpha * pe.m), 1.0 / (pe.m - 1.0)) : 0.0;
    bool ok = true;
    if (c0 >= root) ok = ok && c1 <= c0 + tol;                  // D1
    if (pe.gamma < 0.0 && c0 <= root) ok = ok && c1 >= c0 - tol;  // D2
    if (2.0 * tau * pe.d1(a) > -1.0) {                           // D3
      ++d3_used;
      const double den = 1.0 + 2.0 * tau * std::min(pe.d1(a), 0.0);
      ok = ok && c1 <= std::max(a, c0 / (den * den)) + tol;
    }
    const double den4 = 1.0 + 2.0 * tau * std::max(pe.d1(b), 0.0);  // D4
    ok = ok && c1 >= std::min(b, c0 / (den4 * den4)) - tol;
    if (!ok) ++failures;
  }
  return {failures == 0 && worst_el <= 1e-9,
          std::to_string(failures) + " violations, D3 applicable in " + std::to_string(d3_used) +
              " cases, Euler-Lagrange gap " + fmt(worst_el)};
}

Outcome c9_mm_to_pde() {
  const std::vector<double> taus{0.02, 0.01, 0.005, 0.0025};
  const double T = 0.1;
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  std::ostringstream os;
  bool ok = true;
  for (Metric m : {Metric::HK, Metric::SHK}) {
    const auto t0 = std::chrono::steady_clock::now();
    DiscreteMeasure mu0 = cosine_measure(64, 0.5, 0.3);
    if (m == Metric::SHK) mu0 = normalize(mu0);
    PdeConfig pc;
    pc.T = T;
    const auto pde = m == Metric::HK ? solve_reaction_diffusion_hk(mu0, e, pc) : solve_shk_pde(mu0, e, pc);
    os << metric_name(m) << " gaps";
    double prev = 1e300;
    for (double tau : taus) {
      const auto tr = run_mm(m, mu0, e, tau, static_cast<int>(std::lround(T / tau)));
      const double gap = l1_gap(tr.measures.back(), pde.at(T));
      os << " " << fmt(gap);
      if (!(gap < prev)) ok = false;
      prev = gap;
    }
    const double secs = seconds_since(t0);
    if (secs >= 300.0) ok = false;
    os << " (" << fmt(secs) << " s); ";
  }
  return {ok, os.str()};
}

Outcome c10_evi_residuals() {
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  const auto mu0 = cosine_measure(32, 0.5, 0.3);
  const std::vector<double> taus{0.02, 0.01, 0.005, 0.0025};
  const auto st = convergence_study(mu0, e, Metric::HK, taus, 0.1);
  const double C = metric_slope_squared(mu0, e, Metric::HK);
  std::ostringstream os;
  bool ok = true;
  os << "C " << fmt(C) << "; residuals";
  for (std::size_t i = 0; i < st.rows.size(); ++i) {
    const double r = st.rows[i].evi_worst_residual;
    os << " " << fmt(r);
    if (r > C * std::sqrt(taus[i])) ok = false;
  }
  os << "; ratios";
  for (std::size_t i = 0; i + 1 < st.rows.size(); ++i) {
    const double r0 = st.rows[i].evi_worst_residual, r1 = st.rows[i + 1].evi_worst_residual;
    const bool good = r1 <= 0.0 ? r0 >= r1 : r0 >= 1.2 * r1;
    os << " " << (r1 > 0.0 ? fmt(r0 / r1) : std::string("n/a"));
    if (!good) ok = false;
  }
  // constant curve at the minimizer rho = 1/2
  const auto star = DiscreteMeasure::uniform(mu0.domain(), 0.5);
  const std::vector<DiscreteMeasure> curve(11, star);
  const auto rep = evi_residual_integrated(curve, 0.01, default_observers(mu0, Metric::HK), e.lambda(), e, Metric::HK);
  os << "; minimizer " << fmt(rep.worst_lambda_star);
  if (rep.worst_lambda_star > 1e-8) ok = false;
  return {ok, os.str()};
}

Outcome c11_contraction() {
  const Entropy e = Entropy::neg_power(0.5, 1.0);
  const auto a0 = normalize(cosine_measure(24, 1.0, 0.3));
  const auto b0 = normalize(cosine_measure(24, 1.0, -0.2));
  const double tau = 0.01;
  const auto a = run_mm(Metric::SHK, a0, e, tau, 10), b = run_mm(Metric::SHK, b0, e, tau, 10);
  const double lambda = e.lambda();
  const auto ba = error_budget(a, 0.0, lambda), bb = error_budget(b, 0.0, lambda);
  const auto rep = contraction_check(a, b, lambda, ba, bb);
  const auto same = contraction_check(a, a, lambda, ba, ba);
  double same_lhs = 0.0;
  bool same_ok = true;
  for (const auto& r : same.rows) {
    same_lhs = std::max(same_lhs, r.lhs);
    if (!(r.lhs == 0.0 && r.rhs >= 0.0)) same_ok = false;
  }
  return {rep.holds && same_ok && rep.rows.size() == 11,
          "worst margin " + fmt(rep.worst_margin) + ", identical-input lhs " + fmt(same_lhs)};
}

Outcome c12_geometry() {
  EuclideanProbe euc(2, 1.0);
  std::mt19937_64 rng(1212);
  double angle_err = 0.0, inner_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Point x = euc.sample(rng), y = euc.sample(rng), z = euc.sample(rng);
    const Geodesic g1 = make_geodesic(euc, x, y), g2 = make_geodesic(euc, x, z);
    const double dot = (y - x).dot(z - x);
    const double ang = std::acos(std::clamp(dot / ((y - x).norm() * (z - x).norm()), -1.0, 1.0));
    inner_err = std::max(inner_err, std::abs(up_inner_product(g1, g2) - dot));
    angle_err = std::max(angle_err, std::abs(comparison_angle(euc, x, y, z) - ang));
    angle_err = std::max(angle_err, std::abs(upper_angle(g1, g2).upper - ang));
  }
  const auto cone = make_probe("cone");
  const auto cs = run_geometry_sweep(*cone, "cs", 500, 12, 1e-6);
  bool lac = true;
  std::string lac_worst;
  for (const char* s : {"euclid", "cone", "hk2"}) {
    const auto sw = run_geometry_sweep(*make_probe(s), "lac", 200, 12, 1e-6);
    lac = lac && sw.holds;
    lac_worst += std::string(" ") + s + " " + fmt(sw.worst);
  }
  bool mid = true;
  for (const char* s : {"euclid", "cone", "hk2"}) mid = mid && run_geometry_sweep(*make_probe(s), "midpoint", 100, 12, 1e-8).holds;
  const bool ok = angle_err <= 1e-9 && inner_err <= 1e-9 && cs.holds && lac && mid;
  return {ok, "Euclid angle " + fmt(angle_err) + ", inner " + fmt(inner_err) + "; cone cs worst " + fmt(cs.worst) +
                  "; LAC" + lac_worst + "; midpoint " + (mid ? "ok" : "fails")};
}

Outcome c13_appendix() {
  std::ostringstream os;
  bool ok = true;
  for (double p : {0.5, 0.6, 0.75, 1.0}) {
    const auto r = check_transfer_estimates(p, 200, 200, 1e-9);
    ok = ok && r.holds && r.min_q >= -1e-9;
    os << "p " << p << ": min Q-1 " << fmt(r.min_q) << "; ";
  }
  const auto w = check_transfer_estimates(0.4, 200, 200, 1e-9);
  ok = ok && !w.holds && w.witness_delta > 3.0 && q_p(0.4, w.witness_t, w.witness_delta) < 1.0;
  os << "p 0.4 witness t " << fmt(w.witness_t) << ", delta " << fmt(w.witness_delta) << "; ";
  double ident = 0.0;
  for (double delta : {0.2, 1.0, 2.0, 3.0}) {
    ident = std::max({ident, std::abs(reparam_beta(0.0, delta)), std::abs(reparam_beta(1.0, delta) - 1.0),
                      std::abs(reparam_r(0.0, delta) - 1.0), std::abs(reparam_r(1.0, delta) - 1.0)});
    for (double t : {0.1, 0.3, 0.45})
      ident = std::max({ident, std::abs(reparam_beta(1 - t, delta) - 1 + reparam_beta(t, delta)),
                        std::abs(reparam_r(1 - t, delta) - reparam_r(t, delta))});
  }
  ok = ok && ident <= 1e-14;
  os << "identities " << fmt(ident);
  return {ok, os.str()};
}

Outcome c14_pde_oracles() {
  const auto mu0 = cosine_measure(32, 0.5, 0.3);
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  PdeConfig diff;
  diff.T = 0.05;
  diff.beta = 0.0;
  const auto pd = solve_reaction_diffusion_hk(mu0, e, diff);
  const double m_diff = std::abs(total_mass(pd.at(0.05)) - total_mass(mu0));
  PdeConfig sc;
  sc.T = 0.05;
  const auto ps = solve_shk_pde(normalize(mu0), e, sc);
  double m_shk = 0.0;
  for (const auto& s : ps.states) m_shk = std::max(m_shk, std::abs(total_mass(s) - 1.0));
  const auto sh = solve_spherical_hellinger_ode(normalize(mu0), e, 0.2);
  double mono = -1e300;
  for (std::size_t k = 1; k < sh.states.size(); ++k) {
    mono = std::max(mono, sh.states[k].max_density() - sh.states[k - 1].max_density());
    mono = std::max(mono, sh.states[k - 1].min_density() - sh.states[k].min_density());
  }
  double closed = 0.0;
  for (double c0 : {0.3, 1.0, 2.5}) {
    const auto path = solve_scalar_ode(c0, Entropy::power_mass(1.0, 2.0, 0.0), 0.5, 1e-12);
    for (std::size_t k = 0; k < path.t.size(); ++k)
      closed = std::max(closed, std::abs(path.c[k] - oracle::quadratic_flow(c0, path.t[k])));
  }
  const bool ok = m_diff <= 1e-10 && m_shk <= 1e-10 && mono <= 1e-12 && closed <= 1e-8;
  return {ok, "mass drift diffusion " + fmt(m_diff) + ", SHK " + fmt(m_shk) + "; monotonicity excess " + fmt(mono) +
                  "; closed form " + fmt(closed)};
}

std::string tree_digest(const fs::path& dir, std::size_t& files) {
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  files = paths.size();
  std::string all;
  for (const auto& p : paths) {
    std::string body = read_file(p);
    if (p.filename() == "pde_compare.csv") {  // drop the runtime column
      std::istringstream in(body);
      std::string line, kept;
      while (std::getline(in, line)) kept += line.substr(0, line.rfind(',')) + "\n";
      body = kept;
    }
    all += fs::relative(p, dir).string() + "\n" + body;
  }
  return all;
}

Outcome c15_determinism() {
  const fs::path root = fs::temp_directory_path() / "hkflow_acceptance_determinism";
  fs::remove_all(root);
  const fs::path cfgs = HKFLOW_SOURCE_DIR "/configs";
  struct Job {
    std::string verb, config;
  };
  const std::vector<Job> jobs{{"distance", "two_dirac.json"},
                              {"mm-run", "mm_hk_quadratic.json"},
                              {"mm-run", "mm_shk_sqrt.json"}};
  std::string digest[2];
  std::size_t files = 0;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path base = root / ("run" + std::to_string(rep));
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      ExperimentConfig c;
      c.verb = jobs[j].verb;
      c.config_path = cfgs / jobs[j].config;
      c.out_dir = base / ("job" + std::to_string(j));
      c.seed = 7;
      if (run_experiment(c).exit_code != kExitOk) return {false, jobs[j].verb + " " + jobs[j].config + " failed"};
    }
    ExperimentConfig ev;
    ev.verb = "evi-check";
    ev.trajectory = base / "job1" / "trajectory.json";
    ev.out_dir = base / "evi";
    run_experiment(ev);
    ExperimentConfig geo;
    geo.verb = "geometry-probe";
    geo.space = "cone";
    geo.check = "cs";
    geo.seed = 7;
    geo.out_dir = base / "geo";
    run_experiment(geo);
    digest[rep] = tree_digest(base, files);
  }
  const bool same = digest[0] == digest[1] && files >= 8;
  return {same, std::to_string(files) + " output files compared, " + (same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  const std::vector<Criterion> all{
      {1, "distance solver agrees with the exact small-support solver", c1_oracle_agreement},
      {2, "two-Dirac, zero-measure and self-distance closed forms", c2_closed_forms},
      {3, "scaling identity", c3_scaling},
      {4, "triangle inequality and mass lower bound", c4_metric_axioms},
      {5, "SHK discrete maximum principle", c5_shk_maximum_principle},
      {6, "HK density bounds", c6_hk_density_bounds},
      {7, "uniform data follows the scalar recursion", c7_scalar_consistency},
      {8, "scalar observations D1-D4", c8_scalar_observations},
      {9, "MM gap to the PDE decreases with tau", c9_mm_to_pde},
      {10, "integrated EVI residuals", c10_evi_residuals},
      {11, "budgeted contraction of two SHK runs", c11_contraction},
      {12, "geometry suite", c12_geometry},
      {13, "transfer estimates and reparametrization", c13_appendix},
      {14, "PDE oracles", c14_pde_oracles},
      {15, "deterministic outputs", c15_determinism},
  };
  int failed = 0, ran = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    std::printf("[%s] criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
