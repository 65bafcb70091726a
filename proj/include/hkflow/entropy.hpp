/// Convex entropy densities E: [0, inf) -> R and their Legendre conjugates.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hkflow/measures.hpp"

namespace hkflow {

enum class EntropyFamily { PowerMass, NegPower, CustomTable, Capped };

class Entropy {
 public:
  // E = 0.
  Entropy() = default;
  // E(c) = alpha c^m + gamma c, alpha >= 0, m > 1. alpha = 0 gives an affine E.
  static Entropy power_mass(double alpha, double m, double gamma);
  // E(c) = -beta c^q with 0 < q < 1, beta > 0.
  static Entropy neg_power(double q, double beta = 1.0);
  // Monotone cubic (Fritsch-Carlson) interpolation through (c_k, E_k); c_0 must be 0.
  // Linear continuation past the last sample. lambda is the declared modulus.
  static Entropy custom_table(std::vector<double> c, std::vector<double> e, double lambda = 0.0);
  // gamma c + eps (c log c + (1 - c) log(1 - c)) on [0, 1], +inf above 1: a smooth
  // stand-in for the limit functional gamma * mass restricted to rho <= 1.
  static Entropy capped(double gamma, double eps = 1e-3);

  // Assumption-B witness: requires E'(c) < 0.
  Entropy with_c_low(double c) const;
  std::optional<double> c_low() const { return c_low_; }

  EntropyFamily family() const { return family_; }
  std::string describe() const;

  double value(double c) const;
  double d1(double c) const;
  double d2(double c) const;
  // E'(0+), possibly -inf.
  double d1_at_zero() const;
  // lim E(c)/c as c -> inf, possibly +inf.
  double recession_slope() const;
  // Declared lambda with E' - lambda c nondecreasing in the sense used by the flows.
  double lambda() const { return lambda_; }
  // Root of E' if one exists.
  std::optional<double> derivative_root() const;
  // Largest admissible c_low: the root of E', or +inf when E' < 0 everywhere.
  std::optional<double> c_low_max() const;
  bool is_affine() const { return family_ == EntropyFamily::PowerMass && p0_ == 0.0; }

  // Legendre conjugate E*(u) = sup_{c >= 0} (u c - E(c)); +inf outside the domain.
  double conj(double u) const;
  // Maximizer c(u) = (E')^{-1}(u), 0 when u <= E'(0+).
  double conj_d1(double u) const;
  // 1 / E''(c(u)); 0 on the flat part u < E'(0+).
  double conj_d2(double u) const;
  // E* is finite exactly for u < conj_sup() (or <= for affine E).
  double conj_sup() const { return recession_slope(); }

  // Sum_i w_i E(rho_i).
  double functional(const DiscreteMeasure& mu) const;

  // Parameters, for serialization.
  double param(int k) const { return k == 0 ? p0_ : k == 1 ? p1_ : p2_; }
  const std::vector<double>& table_c() const { return tc_; }
  const std::vector<double>& table_e() const { return te_; }

 private:
  int segment(double c) const;

  EntropyFamily family_ = EntropyFamily::PowerMass;
  double p0_ = 0.0, p1_ = 2.0, p2_ = 0.0;  // alpha,m,gamma or beta,q
  double lambda_ = 0.0;
  std::optional<double> c_low_;
  std::vector<double> tc_, te_, ts_;  // table nodes, values, Hermite slopes
};

// Sum_i w_i E(rho_i) + E'_inf * singular_mass.
double eval_functional(const Entropy& e, const DiscreteMeasure& mu, double singular_mass = 0.0);
// gamma * mass if rho <= 1 (+1e-12) everywhere, +inf otherwise.
double eval_limit_functional(double gamma, const DiscreteMeasure& mu);
// Largest point of a 64-point log grid on [1e-6 c_max, c_max] with E'(c) < 0.
std::optional<double> find_c_low(const Entropy& e, double c_max = 1e3, int n = 64);

struct NEGrid {
  double lo = 0.1;
  double hi = 10.0;
  int n = 40;
  double tol = 1e-8;
  double step = 1e-3;  // relative finite-difference step
};

struct NEConditionReport {
  bool convex = true;
  bool monotone = true;
  double worst_eigenvalue = 0.0;     // of the scaled Hessian
  double worst_increase = 0.0;       // largest scaled rise of (d-1) N in rho
  double eig_at[2] = {0.0, 0.0};     // (rho, gamma) of worst eigenvalue
  double incr_at[2] = {0.0, 0.0};
  bool holds() const { return convex && monotone; }
};

// N(rho, g) = (rho/g)^d E(g^{2+d}/rho^d) - (lambda/2) g^2.
double n_function(const Entropy& e, double lambda, int d, double rho, double g);

// Convexity of N on (0,inf)^2 and monotonicity of (d-1)N in rho, on a log grid.
// The Hessian is scaled by diag(rho, g) on both sides, which keeps its inertia.
NEConditionReport check_ne_conditions(const Entropy& e, double lambda, int d,
                                      const NEGrid& grid = {});

}  // namespace hkflow
