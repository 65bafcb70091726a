#include "hkflow/measures.hpp"

#include <cmath>
#include <string>

#include "hkflow/error.hpp"

namespace hkflow {

GridDomain::GridDomain(std::vector<double> lower, std::vector<double> upper, std::vector<int> nodes)
    : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes)) {
  const std::size_t d = nodes_.size();
  if (d < 1 || d > 2) throw InvalidArgument("grid dimension must be 1 or 2");
  if (lower_.size() != d || upper_.size() != d)
    throw InvalidArgument("grid bounds do not match dimension");
  for (std::size_t k = 0; k < d; ++k) {
    if (nodes_[k] < 2) throw InvalidArgument("grid needs at least 2 nodes per axis");
    if (!(upper_[k] > lower_[k]) || !std::isfinite(lower_[k]) || !std::isfinite(upper_[k]))
      throw InvalidArgument("grid bounds must satisfy lower < upper");
    spacing_.push_back((upper_[k] - lower_[k]) / (nodes_[k] - 1));
  }
  const int n0 = nodes_[0];
  const int n1 = d == 2 ? nodes_[1] : 1;
  weights_.resize(n0 * n1);
  coords_.resize(n0 * n1, static_cast<Eigen::Index>(d));
  auto w1 = [](int i, int n, double h) { return (i == 0 || i == n - 1) ? 0.5 * h : h; };
  for (int j = 0; j < n1; ++j) {
    for (int i = 0; i < n0; ++i) {
      const int idx = i + n0 * j;
      double w = w1(i, n0, spacing_[0]);
      coords_(idx, 0) = lower_[0] + i * spacing_[0];
      if (d == 2) {
        w *= w1(j, n1, spacing_[1]);
        coords_(idx, 1) = lower_[1] + j * spacing_[1];
      }
      weights_[idx] = w;
    }
  }
}

std::shared_ptr<const GridDomain> GridDomain::interval(double a, double b, int n) {
  return std::make_shared<const GridDomain>(std::vector<double>{a}, std::vector<double>{b},
                                            std::vector<int>{n});
}

std::shared_ptr<const GridDomain> GridDomain::box(double a0, double b0, int n0, double a1, double b1,
                                                  int n1) {
  return std::make_shared<const GridDomain>(std::vector<double>{a0, a1}, std::vector<double>{b0, b1},
                                            std::vector<int>{n0, n1});
}

double GridDomain::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) v *= upper_[k] - lower_[k];
  return v;
}

double GridDomain::distance(int i, int j) const {
  return (coords_.row(i) - coords_.row(j)).norm();
}

int GridDomain::find_node(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim()) return -1;
  int multi[2] = {0, 0};
  for (int k = 0; k < dim(); ++k) {
    const double s = (x[k] - lower_[k]) / spacing_[k];
    const long r = std::lround(s);
    if (r < 0 || r >= nodes_[k]) return -1;
    if (std::abs(lower_[k] + r * spacing_[k] - x[k]) > tol) return -1;
    multi[k] = static_cast<int>(r);
  }
  return index(multi[0], multi[1]);
}

bool GridDomain::operator==(const GridDomain& other) const {
  return nodes_ == other.nodes_ && lower_ == other.lower_ && upper_ == other.upper_;
}

DiscreteMeasure::DiscreteMeasure(DomainPtr domain, Eigen::VectorXd density)
    : domain_(std::move(domain)), density_(std::move(density)) {
  if (!domain_) throw InvalidArgument("measure needs a domain");
  if (density_.size() != domain_->size())
    throw InvalidArgument("density has " + std::to_string(density_.size()) + " entries, grid has " +
                          std::to_string(domain_->size()));
  for (Eigen::Index i = 0; i < density_.size(); ++i) {
    if (!std::isfinite(density_[i]) || density_[i] < 0.0)
      throw InvalidArgument("density must be finite and nonnegative");
  }
}

DiscreteMeasure DiscreteMeasure::uniform(DomainPtr domain, double value) {
  const int n = domain->size();
  return DiscreteMeasure(std::move(domain), Eigen::VectorXd::Constant(n, value));
}

Eigen::VectorXd DiscreteMeasure::masses() const {
  return density_.cwiseProduct(domain_->weights());
}

void require_same_domain(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (!a.domain() || !b.domain()) throw InvalidArgument("measure without domain");
  if (a.domain() != b.domain() && *a.domain() != *b.domain())
    throw DomainMismatch("measures live on different grids");
}

double total_mass(const DiscreteMeasure& mu) { return mu.density().dot(mu.domain()->weights()); }

DiscreteMeasure scale_measure(const DiscreteMeasure& mu, double factor) {
  if (!(factor >= 0.0) || !std::isfinite(factor))
    throw InvalidArgument("scale factor must be finite and nonnegative");
  return DiscreteMeasure(mu.domain(), mu.density() * factor);
}

DiscreteMeasure restrict_measure(const DiscreteMeasure& mu, const std::vector<bool>& mask) {
  if (static_cast<int>(mask.size()) != mu.size()) throw InvalidArgument("mask size mismatch");
  Eigen::VectorXd rho = mu.density();
  for (int i = 0; i < mu.size(); ++i)
    if (!mask[i]) rho[i] = 0.0;
  return DiscreteMeasure(mu.domain(), std::move(rho));
}

DiscreteMeasure normalize(const DiscreteMeasure& mu) {
  const double m = total_mass(mu);
  if (!(m > 0.0)) throw InvalidArgument("cannot normalize a zero measure");
  return scale_measure(mu, 1.0 / m);
}

}  // namespace hkflow
