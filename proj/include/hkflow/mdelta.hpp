/// Density classes: two-sided pointwise bounds and ball-averaged density ratios.
#pragma once

#include "hkflow/measures.hpp"

namespace hkflow {

// delta <= rho <= 1/delta at every node (slack 1e-12).
bool in_m_delta(const DiscreteMeasure& mu, double delta);

// Ball averages over closed balls of radius d1 (trapezoid weights restricted to the
// ball) must lie in [d2, 1/d2] at every node. Throws InvalidArgument if some ball
// holds no node besides its centre.
bool in_m_tilde(const DiscreteMeasure& mu, double d1, double d2);

// Ball average at every node.
Eigen::VectorXd ball_averages(const DiscreteMeasure& mu, double radius);

// volume / delta, the mass bound implied by membership in M_delta.
double m_delta_mass_bound(const GridDomain& domain, double delta);

}  // namespace hkflow
