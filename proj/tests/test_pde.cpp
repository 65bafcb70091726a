#include <doctest.h>

#include "hkflow/error.hpp"
#include "hkflow/pde.hpp"
#include "oracles.hpp"

using namespace hkflow;

namespace {

DiscreteMeasure cosine(int n, double base, double amp) {
  auto d = GridDomain::interval(0, 1, n);
  Eigen::VectorXd rho(n);
  for (int i = 0; i < n; ++i) rho[i] = base + amp * std::cos(oracle::kPi * d->coords()(i, 0));
  return DiscreteMeasure(d, rho);
}

}  // namespace

TEST_CASE("scalar ODE matches the closed form for E = c^2") {
  const OdePath p = solve_scalar_ode(1.0, Entropy::power_mass(1.0, 2.0, 0.0), 0.5);
  REQUIRE(p.t.size() > 2);
  for (std::size_t k = 0; k < p.t.size(); ++k)
    CHECK(p.c[k] == doctest::Approx(oracle::quadratic_flow(1.0, p.t[k])).epsilon(1e-8));
}

TEST_CASE("scalar ODE relaxes toward the root of E'") {
  const OdePath p = solve_scalar_ode(0.4, Entropy::power_mass(1.0, 2.0, -1.0), 1.0);
  for (std::size_t k = 1; k < p.c.size(); ++k) CHECK(p.c[k] >= p.c[k - 1]);
  CHECK(p.c.back() < 0.5);
  CHECK(p.c.back() > 0.49);
  const OdePath z = solve_scalar_ode(0.7, Entropy(), 1.0);
  CHECK(z.c.back() == 0.7);
}

TEST_CASE("HK PDE: E = 0 is stationary, uniform data follow the ODE") {
  const auto mu = cosine(32, 1.0, 0.3);
  PdeConfig cfg;
  cfg.T = 0.05;
  const auto z = solve_reaction_diffusion_hk(mu, Entropy(), cfg);
  CHECK((z.at(0.05).density() - mu.density()).norm() == 0.0);
  auto d = GridDomain::interval(0, 1, 16);
  const Entropy sq = Entropy::power_mass(1.0, 2.0, 0.0);
  const auto u = solve_reaction_diffusion_hk(DiscreteMeasure::uniform(d, 1.0), sq, cfg);
  const double c = oracle::quadratic_flow(1.0, 0.05);
  CHECK(u.at(0.05).density().maxCoeff() == doctest::Approx(c).epsilon(1e-6));
  CHECK(u.at(0.05).density().minCoeff() == doctest::Approx(c).epsilon(1e-6));
}

TEST_CASE("HK PDE: root of E' is stationary; beta = 0 conserves mass") {
  auto d = GridDomain::interval(0, 1, 16);
  PdeConfig cfg;
  cfg.T = 0.05;
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  const auto s = solve_reaction_diffusion_hk(DiscreteMeasure::uniform(d, 0.5), e, cfg);
  CHECK((s.at(0.05).density().array() - 0.5).abs().maxCoeff() < 1e-14);
  cfg.beta = 0.0;
  const auto mu = cosine(32, 1.0, 0.3);
  const auto r = solve_reaction_diffusion_hk(mu, e, cfg);
  CHECK(std::abs(r.mass_final - r.mass_initial) <= 1e-10);
  CHECK(r.at(0.05).max_density() < mu.max_density());
}

TEST_CASE("SHK PDE: unit mass, uniform stationary") {
  const auto mu = normalize(cosine(32, 1.0, 0.5));
  PdeConfig cfg;
  cfg.T = 0.05;
  const auto r = solve_shk_pde(mu, Entropy::power_mass(1.0, 2.0, -1.0), cfg);
  for (const auto& s : r.states) CHECK(std::abs(total_mass(s) - 1.0) <= 1e-10);
  auto d = GridDomain::interval(0, 1, 8);
  const auto u = solve_shk_pde(DiscreteMeasure::uniform(d, 1.0), Entropy::neg_power(0.5), cfg);
  CHECK((u.at(0.05).density().array() - 1.0).abs().maxCoeff() < 1e-13);
  CHECK_THROWS_AS(solve_shk_pde(scale_measure(mu, 2.0), Entropy(), cfg), InvalidArgument);
}

TEST_CASE("spherical Hellinger ODE: nested ranges and agreement with alpha = 0") {
  auto d = GridDomain::interval(0, 1, 20);
  Eigen::VectorXd rho(20);
  for (int i = 0; i < 20; ++i) rho[i] = i < 10 ? 0.5 : 1.5;
  const DiscreteMeasure mu(d, rho);
  const Entropy sq = Entropy::power_mass(1.0, 2.0, 0.0);
  const auto p = solve_spherical_hellinger_ode(normalize(mu), sq, 0.2);
  for (std::size_t k = 1; k < p.states.size(); ++k) {
    CHECK(p.states[k].min_density() >= p.states[k - 1].min_density() - 1e-12);
    CHECK(p.states[k].max_density() <= p.states[k - 1].max_density() + 1e-12);
  }
  PdeConfig cfg;
  cfg.T = 0.2;
  cfg.alpha = 0.0;
  cfg.dt = 1e-3;
  const auto q = solve_shk_pde(normalize(mu), sq, cfg);
  CHECK((q.at(0.2).density() - p.at(0.2).density()).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("compare_mm_to_pde checks the time grid") {
  auto d = GridDomain::interval(0, 1, 8);
  MMTrajectory tr;
  tr.tau = 0.1;
  tr.measures = {DiscreteMeasure::uniform(d, 1.0), DiscreteMeasure::uniform(d, 1.0)};
  PdeConfig cfg;
  cfg.T = 0.1;
  const auto p = solve_reaction_diffusion_hk(tr.measures[0], Entropy(), cfg);
  CHECK(compare_mm_to_pde(tr, p, 0.1) == 0.0);
  CHECK_THROWS_AS(compare_mm_to_pde(tr, p, 0.15), InvalidArgument);
}
