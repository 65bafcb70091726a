/// Angles, inner products and curvature probes on small geodesic spaces, plus the
/// sin-reparametrization functions used for cone transfer estimates.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace hkflow {

using Point = Eigen::VectorXd;

class MetricSpaceProbe {
 public:
  virtual ~MetricSpaceProbe() = default;
  virtual std::string name() const = 0;
  virtual double distance(const Point& a, const Point& b) const = 0;
  // Constant-speed geodesic from a to b evaluated at t in [0, 1].
  virtual Point geodesic_point(const Point& a, const Point& b, double t) const = 0;
  virtual Point sample(std::mt19937_64& rng) const = 0;
};

class EuclideanProbe : public MetricSpaceProbe {
 public:
  explicit EuclideanProbe(int dim = 2, double radius = 1.0) : dim_(dim), radius_(radius) {}
  std::string name() const override { return "euclid"; }
  double distance(const Point& a, const Point& b) const override { return (a - b).norm(); }
  Point geodesic_point(const Point& a, const Point& b, double t) const override {
    return (1.0 - t) * a + t * b;
  }
  Point sample(std::mt19937_64& rng) const override;

 private:
  int dim_;
  double radius_;
};

// Cone over the segment [0, length], length <= pi; points are (x, r).
// The map (x, r) -> r (cos x, sin x) is an isometry onto a convex planar sector.
class ConeSegmentProbe : public MetricSpaceProbe {
 public:
  explicit ConeSegmentProbe(double length = 3.0, double rmax = 1.0);
  std::string name() const override { return "cone"; }
  double distance(const Point& a, const Point& b) const override;
  Point geodesic_point(const Point& a, const Point& b, double t) const override;
  Point sample(std::mt19937_64& rng) const override;
  double length() const { return length_; }

 protected:
  double length_, rmax_;
};

// Single Diracs m delta_x on a segment of length < pi/2 under HK; points are (x, sqrt(m)).
// Distances come from the two-Dirac closed form, geodesics from the cone.
class TwoDiracHKProbe : public ConeSegmentProbe {
 public:
  explicit TwoDiracHKProbe(double length = 1.5, double mmax = 1.0);
  std::string name() const override { return "hk2"; }
  double distance(const Point& a, const Point& b) const override;
};

std::unique_ptr<MetricSpaceProbe> make_probe(const std::string& name);

struct Geodesic {
  const MetricSpaceProbe* space = nullptr;
  Point from, to;
  double t0 = 0.0, t1 = 1.0;  // sub-arc of the geodesic from -> to

  Point at(double s) const { return space->geodesic_point(from, to, t0 + s * (t1 - t0)); }
  Point start() const { return at(0.0); }
  Point end() const { return at(1.0); }
  double length() const { return std::abs(t1 - t0) * space->distance(from, to); }
};

Geodesic make_geodesic(const MetricSpaceProbe& space, const Point& a, const Point& b);

struct GeodesicSample {
  std::vector<double> t;
  std::vector<Point> points;
};
GeodesicSample sample_geodesic(const Geodesic& g, int n);

// Angle at x of the comparison triangle (x, y, z) in the plane.
double comparison_angle(const MetricSpaceProbe& space, const Point& x, const Point& y,
                        const Point& z);

struct AngleEstimate {
  double upper = 0.0;  // max over the last four levels of the schedule
  double lower = 0.0;  // min over the same window
  std::vector<double> diagonal;  // angle at s = t = 2^-k, k = kmin..kmax
};
AngleEstimate upper_angle(const Geodesic& g1, const Geodesic& g2, int kmin = 3, int kmax = 14);

// d(x,y) d(x,z) cos(upper angle).
double up_inner_product(const Geodesic& g1, const Geodesic& g2);

struct DeltaSquared {
  double value = 0.0;  // clamped at 0
  double raw = 0.0;
};
// d^2(x,y) + d^2(x,z) + 2 <g_xy, g_xz>_up.
DeltaSquared delta_squared(const Geodesic& g1, const Geodesic& g2, double tol = 1e-6);

struct LacReport {
  double angle_sum = 0.0;
  bool holds = true;
};
// Sum of pairwise upper angles of three geodesics from a common point <= 2 pi.
LacReport check_lac(const Geodesic& g1, const Geodesic& g2, const Geodesic& g3, double tol = 1e-6);

// <g_xy, g_xo> + <g_xo, g_xz> + d(x,o) Delta(g_xy, g_xz); should be >= 0.
double check_cauchy_schwarz_type(const MetricSpaceProbe& space, const Point& x, const Point& y,
                                 const Point& z, const Point& o);

struct ConcavityReport {
  double worst_violation = 0.0;  // max of (1-t) f(0) + t f(1) - f(t) - kappa t (1-t) / 2
  double at_t = 0.0;
};
// f sampled on an increasing grid from 0 to 1.
ConcavityReport check_kappa_concavity(const std::vector<double>& t, const std::vector<double>& f,
                                      double kappa);

struct GeometrySweep {
  std::string check;
  int samples = 0;
  int skipped = 0;  // degenerate configurations
  double worst = 0.0;
  std::vector<Point> worst_points;
  bool holds = true;
};
// check: "lac", "cs", "kappa" or "midpoint".
GeometrySweep run_geometry_sweep(const MetricSpaceProbe& space, const std::string& check, int count,
                                 std::uint64_t seed, double tol = 1e-6);

double reparam_beta(double t, double delta);
double reparam_r(double t, double delta);
double q_p(double p, double t, double delta);

struct TransferReport {
  double p = 0.0;
  double min_first = 0.0;   // min of (1 - beta)/r^p - (1 - t)
  double min_second = 0.0;  // min of beta/r^p - t
  double min_q = 0.0;       // min of Q_p - 1
  double witness_t = 0.0, witness_delta = 0.0;
  bool holds = true;
};
// Open grid t = i/(nt+1), delta = pi k/(nd+1).
TransferReport check_transfer_estimates(double p, int nt = 200, int nd = 200, double tol = 1e-9);

}  // namespace hkflow
