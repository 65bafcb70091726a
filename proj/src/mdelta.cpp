#include "hkflow/mdelta.hpp"

#include "hkflow/error.hpp"

namespace hkflow {

namespace {
constexpr double kSlack = 1e-12;
}

bool in_m_delta(const DiscreteMeasure& mu, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  return mu.min_density() >= delta - kSlack && mu.max_density() <= 1.0 / delta + kSlack;
}

Eigen::VectorXd ball_averages(const DiscreteMeasure& mu, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("ball radius must be positive");
  const GridDomain& dom = *mu.domain();
  const int n = dom.size();
  const Eigen::VectorXd& w = dom.weights();
  const Eigen::VectorXd& rho = mu.density();
  Eigen::VectorXd avg(n);
  for (int i = 0; i < n; ++i) {
    double vol = 0.0, mass = 0.0;
    int count = 0;
    for (int j = 0; j < n; ++j) {
      if (dom.distance(i, j) > radius * (1.0 + 1e-12)) continue;
      vol += w[j];
      mass += w[j] * rho[j];
      ++count;
    }
    if (count < 2)
      throw InvalidArgument("ball of radius " + std::to_string(radius) +
                            " contains no grid node besides its centre");
    avg[i] = mass / vol;
  }
  return avg;
}

bool in_m_tilde(const DiscreteMeasure& mu, double d1, double d2) {
  if (!(d2 > 0.0 && d2 <= 1.0)) throw InvalidArgument("d2 must lie in (0, 1]");
  const Eigen::VectorXd avg = ball_averages(mu, d1);
  return avg.minCoeff() >= d2 - kSlack && avg.maxCoeff() <= 1.0 / d2 + kSlack;
}

double m_delta_mass_bound(const GridDomain& domain, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  return domain.volume() / delta;
}

}  // namespace hkflow
