/// Hellinger-Kantorovich and spherical HK distances via the logarithmic entropy-transport problem.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hkflow/measures.hpp"

namespace hkflow {

// l(d) = -2 log cos d for d < pi/2, +inf otherwise.
double let_cost_function(double d);
// F(r) = r log r - r + 1.
double entropy_f(double r);

struct LetOptions {
  std::vector<double> eps_schedule{1e-1, 1e-2, 1e-3, 1e-4};
  double tol = 1e-9;        // marginal residual target per regularized stage
  int max_sweeps = 200;     // scaling sweeps per stage before Newton polishing
  int max_newton = 100;
  bool refine = true;       // solve the unregularized dual after the entropic path
  double gap_tol = 1e-10;   // barrier duality gap if the active-set step fails
};

struct EpsStage {
  double eps = 0.0;
  int sweeps = 0;
  int newton = 0;
  double residual = 0.0;
  double value = 0.0;  // LET cost of the regularized plan
  bool converged = false;
};

struct LetResult {
  double value = 0.0;       // LET cost of the returned plan (= HK^2)
  double dual_value = 0.0;  // value of a feasible dual point (lower bound)
  double gap = 0.0;
  Eigen::MatrixXd plan;     // n x n over grid nodes
  Eigen::VectorXd f, g;     // dual potentials; +inf where the node carries no plan
  std::vector<EpsStage> path;
  double residual0 = 0.0;   // |a e^{-f} - H 1|_1 on supp mu0
  double residual1 = 0.0;
  bool converged = false;
  bool exact = false;       // optimal active set certified
};

// Sum_i a_i F(eta0_i / a_i) + Sum_j b_j F(eta1_j / b_j) + Sum c_ij H_ij; +inf if the
// plan charges an infinite-cost pair or a node without mass.
double let_cost(const Eigen::MatrixXd& plan, const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

LetResult hk_distance_squared(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                              const LetOptions& opt = {});
double hk_distance(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                   const LetOptions& opt = {});

struct ExactLetResult {
  double value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  Eigen::MatrixXd plan;
  double kkt_residual = 0.0;
};

// Independent high-precision solver for supports with at most 8 nodes in total.
ExactLetResult hk_exact_small(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);
constexpr int kExactMaxSupport = 8;

// SHK = 2 arcsin(HK / 2) for probability measures.
double shk_from_hk(double hk);
double shk_distance(const DiscreteMeasure& nu0, const DiscreteMeasure& nu1,
                    const LetOptions& opt = {});

// (sqrt m0 - sqrt m1)^2 <= HK^2.
double hk_mass_lower_bound(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);
// HK^2(a delta_x, b delta_y) with |x - y| = d.
double hk_two_dirac(double a, double b, double d);

// Transport-growth pair: map T (node -> node, injective on supp mu0) and growth q.
struct DilationResult {
  double cost = 0.0;
  DiscreteMeasure image;  // T_# (q^2 mu0)
};
DilationResult dilation_cost(const Eigen::VectorXd& q, const std::vector<int>& map,
                             const DiscreteMeasure& mu0);

// |HK^2(t0^2 mu0, t1^2 mu1) - [t0 t1 HK^2 + (t0^2 - t0 t1) m0 + (t1^2 - t0 t1) m1]|.
double check_scaling_identity(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, double t0,
                              double t1, const LetOptions& opt = {});

// Cone over the grid: [x, r].
struct ConePoint {
  Eigen::VectorXd x;
  double r = 0.0;
};
struct WeightedConePoint {
  ConePoint point;
  double weight = 0.0;
};
// sqrt(r0^2 + r1^2 - 2 r0 r1 cos(min(d, pi))), evaluated without cancellation.
double cone_distance(const ConePoint& p0, const ConePoint& p1);
// One cone point per node with positive density: r = sqrt(rho_i), weight w_i.
std::vector<WeightedConePoint> cone_lift(const DiscreteMeasure& mu);
// Sum of weight r^2 delta_x; base points must be grid nodes.
DiscreteMeasure cone_project(const std::vector<WeightedConePoint>& pts, const DomainPtr& domain);

}  // namespace hkflow
