#include "hkflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hkflow/error.hpp"

namespace hkflow {

namespace {
constexpr double kPi = std::numbers::pi;

double stable_cone(double r0, double r1, double angle) {
  const double s = std::sin(0.5 * angle);
  const double dr = r0 - r1;
  return std::sqrt(dr * dr + 4.0 * r0 * r1 * s * s);
}
}  // namespace

Point EuclideanProbe::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(-radius_, radius_);
  Point p(dim_);
  for (int k = 0; k < dim_; ++k) p[k] = u(rng);
  return p;
}

ConeSegmentProbe::ConeSegmentProbe(double length, double rmax) : length_(length), rmax_(rmax) {
  if (!(length > 0.0 && length <= kPi)) throw InvalidArgument("cone base length must be in (0, pi]");
  if (!(rmax > 0.0)) throw InvalidArgument("cone radius bound must be positive");
}

double ConeSegmentProbe::distance(const Point& a, const Point& b) const {
  return stable_cone(a[1], b[1], std::min(std::abs(a[0] - b[0]), kPi));
}

Point ConeSegmentProbe::geodesic_point(const Point& a, const Point& b, double t) const {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const double px = (1.0 - t) * a[1] * std::cos(a[0]) + t * b[1] * std::cos(b[0]);
  const double py = (1.0 - t) * a[1] * std::sin(a[0]) + t * b[1] * std::sin(b[0]);
  const double r = std::hypot(px, py);
  Point p(2);
  p[0] = r > 0.0 ? std::atan2(py, px) : (t < 0.5 ? a[0] : b[0]);
  p[1] = r;
  return p;
}

Point ConeSegmentProbe::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> ux(0.0, length_), ur(0.0, rmax_);
  Point p(2);
  p[0] = ux(rng);
  p[1] = ur(rng);
  return p;
}

TwoDiracHKProbe::TwoDiracHKProbe(double length, double mmax)
    : ConeSegmentProbe(length, std::sqrt(mmax)) {
  if (!(length < kPi / 2.0))
    throw InvalidArgument("two-Dirac probe needs a base segment shorter than pi/2");
}

double TwoDiracHKProbe::distance(const Point& a, const Point& b) const {
  return stable_cone(a[1], b[1], std::min(std::abs(a[0] - b[0]), kPi / 2.0));
}

std::unique_ptr<MetricSpaceProbe> make_probe(const std::string& name) {
  if (name == "euclid") return std::make_unique<EuclideanProbe>();
  if (name == "cone") return std::make_unique<ConeSegmentProbe>();
  if (name == "hk2") return std::make_unique<TwoDiracHKProbe>();
  throw InvalidArgument("unknown probe space '" + name + "' (euclid, cone, hk2)");
}

Geodesic make_geodesic(const MetricSpaceProbe& space, const Point& a, const Point& b) {
  return Geodesic{&space, a, b, 0.0, 1.0};
}

GeodesicSample sample_geodesic(const Geodesic& g, int n) {
  if (n < 2) throw InvalidArgument("geodesic sample needs >= 2 points");
  GeodesicSample s;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    s.t.push_back(t);
    s.points.push_back(g.at(t));
  }
  return s;
}

double comparison_angle(const MetricSpaceProbe& space, const Point& x, const Point& y,
                        const Point& z) {
  const double a = space.distance(x, y), b = space.distance(x, z), c = space.distance(y, z);
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("comparison angle at a degenerate vertex");
  // Half-angle form avoids cancellation near 0 and pi.
  const double num = std::max(0.0, (c - (a - b)) * (c + (a - b)));
  const double den = std::max(0.0, ((a + b) - c) * ((a + b) + c));
  return 2.0 * std::atan2(std::sqrt(num), std::sqrt(den));
}

AngleEstimate upper_angle(const Geodesic& g1, const Geodesic& g2, int kmin, int kmax) {
  if (g1.space != g2.space || !g1.space) throw InvalidArgument("geodesics live in different spaces");
  if (kmax - kmin < 3) throw InvalidArgument("angle schedule needs at least four levels");
  const Point x = g1.start();
  if (g1.space->distance(x, g2.start()) > 1e-12)
    throw InvalidArgument("geodesics do not share a starting point");
  if (!(g1.length() > 0.0) || !(g2.length() > 0.0))
    throw InvalidArgument("upper angle of a constant geodesic");
  AngleEstimate est;
  for (int k = kmin; k <= kmax; ++k) {
    const double s = std::ldexp(1.0, -k);
    est.diagonal.push_back(comparison_angle(*g1.space, x, g1.at(s), g2.at(s)));
  }
  est.upper = -1.0;
  est.lower = 10.0;
  for (int k = kmax - 3; k <= kmax; ++k)
    for (int l = kmax - 3; l <= kmax; ++l) {
      const double th =
          comparison_angle(*g1.space, x, g1.at(std::ldexp(1.0, -k)), g2.at(std::ldexp(1.0, -l)));
      est.upper = std::max(est.upper, th);
      est.lower = std::min(est.lower, th);
    }
  return est;
}

double up_inner_product(const Geodesic& g1, const Geodesic& g2) {
  return g1.length() * g2.length() * std::cos(upper_angle(g1, g2).upper);
}

DeltaSquared delta_squared(const Geodesic& g1, const Geodesic& g2, double tol) {
  const double a = g1.length(), b = g2.length();
  DeltaSquared d;
  d.raw = a * a + b * b + 2.0 * up_inner_product(g1, g2);
  if (d.raw < -tol) throw SolverFailure("negative Delta^2 beyond tolerance");
  d.value = std::max(0.0, d.raw);
  return d;
}

LacReport check_lac(const Geodesic& g1, const Geodesic& g2, const Geodesic& g3, double tol) {
  LacReport r;
  r.angle_sum = upper_angle(g1, g2).upper + upper_angle(g2, g3).upper + upper_angle(g1, g3).upper;
  r.holds = r.angle_sum <= 2.0 * kPi + tol;
  return r;
}

double check_cauchy_schwarz_type(const MetricSpaceProbe& space, const Point& x, const Point& y,
                                 const Point& z, const Point& o) {
  const Geodesic gy = make_geodesic(space, x, y), gz = make_geodesic(space, x, z),
                 go = make_geodesic(space, x, o);
  const double delta = std::sqrt(delta_squared(gy, gz).value);
  return up_inner_product(gy, go) + up_inner_product(go, gz) + space.distance(x, o) * delta;
}

ConcavityReport check_kappa_concavity(const std::vector<double>& t, const std::vector<double>& f,
                                      double kappa) {
  if (t.size() != f.size() || t.size() < 2) throw InvalidArgument("concavity samples mismatch");
  if (t.front() != 0.0 || t.back() != 1.0) throw InvalidArgument("concavity grid must span [0, 1]");
  ConcavityReport r;
  r.worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double s = t[k];
    const double v = (1.0 - s) * f.front() + s * f.back() - f[k] - 0.5 * kappa * s * (1.0 - s);
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.at_t = s;
    }
  }
  return r;
}

GeometrySweep run_geometry_sweep(const MetricSpaceProbe& space, const std::string& check, int count,
                                 std::uint64_t seed, double tol) {
  if (check != "lac" && check != "cs" && check != "kappa" && check != "midpoint")
    throw InvalidArgument("unknown geometry check '" + check + "'");
  std::mt19937_64 rng(seed);
  GeometrySweep sw;
  sw.check = check;
  sw.worst = std::numeric_limits<double>::infinity();
  const double dmin = 1e-3;
  while (sw.samples < count) {
    std::vector<Point> p;
    for (int k = 0; k < 4; ++k) p.push_back(space.sample(rng));
    bool degenerate = false;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j)
        if (space.distance(p[i], p[j]) < dmin) degenerate = true;
    if (degenerate) {
      ++sw.skipped;
      continue;
    }
    double margin = 0.0;
    if (check == "lac") {
      const auto r = check_lac(make_geodesic(space, p[0], p[1]), make_geodesic(space, p[0], p[2]),
                               make_geodesic(space, p[0], p[3]), tol);
      margin = 2.0 * kPi - r.angle_sum;
    } else if (check == "cs") {
      margin = check_cauchy_schwarz_type(space, p[0], p[1], p[2], p[3]);
    } else if (check == "kappa") {
      const Geodesic g = make_geodesic(space, p[0], p[1]);
      std::vector<double> ts, fs;
      for (int k = 0; k <= 32; ++k) {
        ts.push_back(k / 32.0);
        const double d = space.distance(g.at(k / 32.0), p[2]);
        fs.push_back(0.5 * d * d);
      }
      const double kappa = std::pow(space.distance(p[0], p[1]), 2);
      margin = -check_kappa_concavity(ts, fs, kappa).worst_violation;
    } else {
      Geodesic left{&space, p[0], p[1], 0.5, 0.0}, right{&space, p[0], p[1], 0.5, 1.0};
      margin = -std::abs(delta_squared(left, right, 1.0).raw);
    }
    ++sw.samples;
    if (margin < sw.worst) {
      sw.worst = margin;
      sw.worst_points = p;
    }
  }
  sw.holds = sw.worst >= -tol;
  return sw;
}

double reparam_beta(double t, double delta) {
  if (!(delta > 0.0 && delta < kPi)) throw InvalidArgument("delta must lie in (0, pi)");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("t must lie in [0, 1]");
  const double a = std::sin(t * delta), b = std::sin((1.0 - t) * delta);
  return a / (a + b);
}

double reparam_r(double t, double delta) {
  if (!(delta > 0.0 && delta < kPi)) throw InvalidArgument("delta must lie in (0, pi)");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("t must lie in [0, 1]");
  return std::sin(delta) / (std::sin(t * delta) + std::sin((1.0 - t) * delta));
}

double q_p(double p, double t, double delta) {
  if (!(delta > 0.0 && delta < kPi)) throw InvalidArgument("delta must lie in (0, pi)");
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("t must lie in [0, 1]");
  const double sd = std::sin(delta);
  if (t == 0.0) return delta / sd;
  const double s = std::sin(t * delta) + std::sin((1.0 - t) * delta);
  return std::sin(t * delta) / (t * std::pow(sd, p)) * std::pow(s, p - 1.0);
}

TransferReport check_transfer_estimates(double p, int nt, int nd, double tol) {
  if (nt < 1 || nd < 1) throw InvalidArgument("transfer grid must be nonempty");
  TransferReport r;
  r.p = p;
  r.min_first = r.min_second = r.min_q = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= nd; ++k) {
    const double delta = kPi * k / (nd + 1);
    for (int i = 1; i <= nt; ++i) {
      const double t = static_cast<double>(i) / (nt + 1);
      const double beta = reparam_beta(t, delta);
      const double rp = std::pow(reparam_r(t, delta), p);
      r.min_first = std::min(r.min_first, (1.0 - beta) / rp - (1.0 - t));
      r.min_second = std::min(r.min_second, beta / rp - t);
      const double q = q_p(p, t, delta) - 1.0;
      if (q < r.min_q) {
        r.min_q = q;
        r.witness_t = t;
        r.witness_delta = delta;
      }
    }
  }
  r.holds = r.min_first >= -tol && r.min_second >= -tol;
  return r;
}

}  // namespace hkflow
