/// Reference solvers for the limiting reaction-diffusion equations and the scalar
/// and spherical Hellinger ODEs.
#pragma once

#include <vector>

#include "hkflow/entropy.hpp"
#include "hkflow/measures.hpp"
#include "hkflow/mm.hpp"

namespace hkflow {

struct PdeConfig {
  double alpha = 1.0;  // diffusion weight
  double beta = 4.0;   // reaction weight
  double T = 0.1;
  double dt = 0.0;     // 0 = from the stability bound at t = 0
  double safety = 0.4;
  std::vector<double> record_times;  // always includes 0 and T
};

struct PdeTrajectory {
  std::vector<double> times;
  std::vector<DiscreteMeasure> states;
  double dt = 0.0;         // last step size used
  long steps = 0;
  int halvings = 0;
  double clipped_mass = 0.0;  // mass removed by clipping negatives
  double mass_initial = 0.0;
  double mass_final = 0.0;

  const DiscreteMeasure& at(double t, double tol = 1e-12) const;
};

// rho_t = alpha div(rho E''(rho) grad rho) - beta rho E'(rho), zero-flux boundary.
PdeTrajectory solve_reaction_diffusion_hk(const DiscreteMeasure& rho0, const Entropy& e,
                                          const PdeConfig& cfg);
// rho_t = alpha div(rho E''(rho) grad rho) - beta rho (E'(rho) - int rho E'(rho)), unit mass.
PdeTrajectory solve_shk_pde(const DiscreteMeasure& rho0, const Entropy& e, const PdeConfig& cfg);

struct OdePath {
  std::vector<double> t;
  std::vector<double> c;
};
// c' = -4 c E'(c) with adaptive Dormand-Prince steps.
OdePath solve_scalar_ode(double c0, const Entropy& e, double T, double rtol = 1e-9);
// c' = -4 c (E'(c) - int c E'(c)) per node, unit mass; every accepted step is recorded.
PdeTrajectory solve_spherical_hellinger_ode(const DiscreteMeasure& c0, const Entropy& e, double T,
                                            double rtol = 1e-9);

// sum_i w_i |rho_MM(T) - rho_PDE(T)|.
double compare_mm_to_pde(const MMTrajectory& mm, const PdeTrajectory& pde, double T);

}  // namespace hkflow
