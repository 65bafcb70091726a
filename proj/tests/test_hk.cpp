#include <doctest.h>

#include <random>

#include "hkflow/error.hpp"
#include "hkflow/hk.hpp"
#include "oracles.hpp"

using namespace hkflow;

namespace {

DiscreteMeasure dirac(const DomainPtr& d, int node, double mass) {
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(d->size());
  rho[node] = mass / d->weights()[node];
  return DiscreteMeasure(d, rho);
}

DiscreteMeasure random_sparse(const DomainPtr& d, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> node(0, d->size() - 1);
  std::uniform_real_distribution<double> dens(0.2, 3.0);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(d->size());
  for (int i = 0; i < k; ++i) rho[node(rng)] = dens(rng);
  return DiscreteMeasure(d, rho);
}

}  // namespace

TEST_CASE("LET cost function and entropy") {
  CHECK(let_cost_function(0.0) == 0.0);
  CHECK(let_cost_function(0.3) == doctest::Approx(-2 * std::log(std::cos(0.3))));
  CHECK(std::isinf(let_cost_function(oracle::kPi / 2)));
  CHECK(entropy_f(1.0) == 0.0);
  CHECK(entropy_f(0.0) == 1.0);
}

TEST_CASE("two Diracs match the closed form on both sides of pi/2") {
  for (double d : {0.1, 0.7, 1.4, 1.6, 2.5}) {
    auto dom = GridDomain::interval(0.0, d, 2);
    const auto r = hk_distance_squared(dirac(dom, 0, 1.3), dirac(dom, 1, 0.4));
    CHECK(r.value == doctest::Approx(oracle::two_dirac(1.3, 0.4, d)).epsilon(1e-9));
    CHECK(hk_two_dirac(1.3, 0.4, d) == doctest::Approx(oracle::two_dirac(1.3, 0.4, d)));
  }
}

TEST_CASE("uniform densities: pure Hellinger value") {
  auto dom = GridDomain::interval(0, 1, 16);
  const auto r = hk_distance_squared(DiscreteMeasure::uniform(dom, 0.7), DiscreteMeasure::uniform(dom, 1.9));
  CHECK(r.value == doctest::Approx(oracle::uniform_hk2(0.7, 1.9, 1.0)).epsilon(1e-10));
  CHECK(r.exact);
  CHECK(r.gap < 1e-10);
}

TEST_CASE("zero measure and identical inputs") {
  auto dom = GridDomain::interval(0, 1, 12);
  std::mt19937_64 rng(5);
  const auto mu = random_sparse(dom, 5, rng);
  CHECK(hk_distance_squared(DiscreteMeasure::zero(dom), mu).value == doctest::Approx(total_mass(mu)).epsilon(1e-12));
  CHECK(hk_distance_squared(mu, mu).value == 0.0);
}

TEST_CASE("main solver agrees with the small exact solver") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 10; ++k) {
    auto dom = GridDomain::interval(0.0, 2.0, 9);
    const auto a = random_sparse(dom, 3, rng), b = random_sparse(dom, 3, rng);
    const auto r = hk_distance_squared(a, b);
    const auto x = hk_exact_small(a, b);
    CHECK(r.value == doctest::Approx(x.value).epsilon(1e-8));
    CHECK(r.dual_value <= r.value + 1e-12);
  }
}

TEST_CASE("exact solver refuses large supports") {
  auto dom = GridDomain::interval(0, 1, 10);
  CHECK_THROWS_AS(hk_exact_small(DiscreteMeasure::uniform(dom, 1), DiscreteMeasure::uniform(dom, 1)), SupportTooLarge);
}

TEST_CASE("SHK relation and mass lower bound") {
  auto dom = GridDomain::interval(0, 1, 10);
  std::mt19937_64 rng(2);
  const auto a = normalize(random_sparse(dom, 4, rng)), b = normalize(random_sparse(dom, 4, rng));
  const double hk = std::sqrt(hk_distance_squared(a, b).value);
  CHECK(shk_distance(a, b) == doctest::Approx(2 * std::asin(hk / 2)));
  CHECK_THROWS_AS(shk_distance(a, scale_measure(b, 2.0)), InvalidArgument);
  const auto c = random_sparse(dom, 4, rng);
  CHECK(hk_distance_squared(a, c).value >= hk_mass_lower_bound(a, c) - 1e-12);
}

TEST_CASE("scaling identity on random instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> t(0.2, 2.0);
  for (int k = 0; k < 5; ++k) {
    auto dom = GridDomain::interval(0.0, 1.5, 8);
    const auto a = random_sparse(dom, 3, rng), b = random_sparse(dom, 3, rng);
    CHECK(check_scaling_identity(a, b, t(rng), t(rng)) < 1e-8);
  }
}

TEST_CASE("dilation couples bound HK^2 from above") {
  auto dom = GridDomain::interval(0, 1, 6);
  const auto mu0 = DiscreteMeasure(dom, Eigen::VectorXd::LinSpaced(6, 0.5, 1.5));
  Eigen::VectorXd q = Eigen::VectorXd::Constant(6, 1.1);
  std::vector<int> map{1, 2, 3, 4, 5, 0};
  const auto dc = dilation_cost(q, map, mu0);
  CHECK(dc.cost >= hk_distance_squared(mu0, dc.image).value - 1e-10);
  std::vector<int> bad{0, 0, 1, 2, 3, 4};
  CHECK_THROWS_AS(dilation_cost(q, bad, mu0), InvalidArgument);
}

TEST_CASE("cone distance, lift and projection") {
  ConePoint p{Eigen::VectorXd::Constant(1, 0.0), 1.2}, q{Eigen::VectorXd::Constant(1, 0.9), 0.7};
  CHECK(cone_distance(p, q) == doctest::Approx(oracle::cone(1.2, 0.7, 0.9)));
  q.x[0] = 4.0;
  CHECK(cone_distance(p, q) == doctest::Approx(1.9));
  auto dom = GridDomain::interval(0, 1, 7);
  std::mt19937_64 rng(1);
  const auto mu = random_sparse(dom, 4, rng);
  const auto back = cone_project(cone_lift(mu), dom);
  CHECK((back.density() - mu.density()).norm() < 1e-14);
}
