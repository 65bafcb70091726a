#include <doctest.h>

#include "hkflow/error.hpp"
#include "hkflow/mm.hpp"
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

TEST_CASE("E = 0 leaves the measure in place") {
  const auto mu = cosine(16, 1.0, 0.4);
  const auto r = mm_step_hk(mu, Entropy(), 0.1);
  CHECK((r.mu1.density() - mu.density()).lpNorm<Eigen::Infinity>() < 1e-12);
  const auto s = mm_step_shk(normalize(mu), Entropy(), 0.1);
  CHECK((s.mu1.density() - normalize(mu).density()).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("affine E: HK rescales, SHK stays put") {
  const auto mu = cosine(16, 1.0, 0.4);
  const Entropy aff = Entropy::power_mass(0.0, 2.0, 0.8);
  const auto r = mm_step_hk(mu, aff, 0.25);
  const double k = 1.0 + 2.0 * 0.25 * 0.8;
  CHECK((r.mu1.density() - mu.density() / (k * k)).norm() < 1e-12);
  const auto s = mm_step_shk(normalize(mu), aff, 0.25);
  CHECK((s.mu1.density() - normalize(mu).density()).norm() < 1e-12);
}

TEST_CASE("uniform data follows the scalar Euler-Lagrange equation") {
  auto d = GridDomain::interval(0, 1, 12);
  const Entropy sq = Entropy::power_mass(1.0, 2.0, 0.0);
  const auto r = mm_step_hk(DiscreteMeasure::uniform(d, 1.0), sq, 0.25);
  const double c1 = oracle::scalar_step(1.0, 0.25, [](double c) { return 2 * c; });
  // 1 + c = 1/sqrt(c)
  CHECK(1.0 + c1 == doctest::Approx(1.0 / std::sqrt(c1)).epsilon(1e-10));
  CHECK(r.mu1.density().minCoeff() == doctest::Approx(c1).epsilon(1e-9));
  CHECK(r.mu1.density().maxCoeff() == doctest::Approx(c1).epsilon(1e-9));
  CHECK(scalar_mm_step(1.0, 0.25, sq) == doctest::Approx(c1).epsilon(1e-12));
}

TEST_CASE("HK step is stationary and beats staying put") {
  const auto mu = cosine(24, 0.5, 0.1);
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  MMOptions opt;
  opt.restarts = 2;
  const auto r = mm_step_hk(mu, e, 0.01, opt);
  CHECK(r.converged);
  CHECK(r.stationarity <= 1e-7);
  CHECK(r.objective <= r.objective0);
  CHECK(r.restart_spread < 1e-5);
}

TEST_CASE("SHK step keeps unit mass and the range shrinks") {
  const auto mu = normalize(cosine(16, 1.0, 0.5));
  const Entropy e = Entropy::neg_power(0.5);
  const auto r = mm_step_shk(mu, e, 0.02);
  CHECK(r.converged);
  CHECK(total_mass(r.mu1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.mu1.min_density() >= mu.min_density() - 1e-9);
  CHECK(r.mu1.max_density() <= mu.max_density() + 1e-9);
}

TEST_CASE("SHK step of uniform data under -sqrt(c) is uniform") {
  auto d = GridDomain::interval(0, 1, 10);
  const auto r = mm_step_shk(DiscreteMeasure::uniform(d, 1.0), Entropy::neg_power(0.5), 0.05);
  CHECK(r.mu1.max_density() - r.mu1.min_density() < 1e-10);
  CHECK(total_mass(r.mu1) == doctest::Approx(1.0));
}

TEST_CASE("trajectory: energy decreases, stay-put domination, slope chain") {
  const auto mu = cosine(16, 0.5, 0.3);
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  MMOptions opt;
  opt.keep_plans = true;
  const auto tr = run_mm(Metric::HK, mu, e, 0.01, 8, opt);
  REQUIRE(tr.steps() == 8);
  for (int k = 1; k <= 8; ++k) {
    CHECK(tr.energies[k] < tr.energies[k - 1]);
    CHECK(tr.energies[k] + tr.step_distance_sq[k] / 0.02 <= tr.energies[k - 1] + 1e-12);
  }
  const double lam = std::min(e.lambda(), 0.0);
  for (int k = 2; k <= 8; ++k) {
    const double s0 = std::sqrt(tr.step_distance_sq[k - 1]) / 0.01, s1 = std::sqrt(tr.step_distance_sq[k]) / 0.01;
    CHECK((1 + lam * 0.01) * s1 <= s0 + 1e-6);
  }
  CHECK(monotone_test_lemma_check(tr).violating_fraction < 0.01);
  CHECK(run_mm(Metric::HK, mu, e, 0.01, 0).steps() == 0);
}

TEST_CASE("density bounds for E = c^2 - c") {
  auto d = GridDomain::interval(0, 1, 16);
  Eigen::VectorXd rho = Eigen::VectorXd::LinSpaced(16, 0.4, 0.6);
  const auto tr = run_mm(Metric::HK, DiscreteMeasure(d, rho), Entropy::power_mass(1.0, 2.0, -1.0), 0.02, 5);
  HKBoundParams p;
  p.c_low = 0.25;
  for (const auto& b : check_density_bounds_hk(tr, p))
    if (b.applicable) CHECK_MESSAGE(b.holds, b.name);
  for (const auto& m : tr.measures) CHECK(m.min_density() >= 0.25 - 1e-6);
}

TEST_CASE("scalar observations D1-D4") {
  const Entropy sq = Entropy::power_mass(1.0, 2.0, 0.0);
  const auto seq = scalar_mm(1.0, 0.25, sq, 5);
  for (std::size_t k = 1; k < seq.size(); ++k) CHECK(seq[k] <= seq[k - 1]);
  const Entropy e = Entropy::power_mass(1.0, 2.0, -1.0);
  const double c1 = scalar_mm_step(0.2, 0.1, e);
  CHECK(c1 >= 0.2);  // D2 with c_low = 1/2
  const auto o = check_scalar_observations(0.2, c1, 0.1, e, 0.3, 0.1);
  CHECK(o.d2_applicable);
  CHECK((o.d1 && o.d2 && o.d3 && o.d4));
  const auto z = scalar_mm(0.7, 0.1, Entropy(), 3);
  for (double c : z) CHECK(c == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("invalid step parameters") {
  const auto mu = cosine(8, 1.0, 0.2);
  CHECK_THROWS_AS(mm_step_hk(mu, Entropy(), 0.0), InvalidArgument);
  CHECK_THROWS_AS(mm_step_shk(scale_measure(mu, 2.0), Entropy(), 0.1), InvalidArgument);
  CHECK_THROWS_AS(parse_metric("w2"), InvalidArgument);
}
