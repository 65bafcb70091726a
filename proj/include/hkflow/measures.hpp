/// Grid domains and nonnegative discrete measures on them.
#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace hkflow {

/// Tensor grid on a box in R^d (d = 1 or 2) with trapezoid quadrature weights.
class GridDomain {
 public:
  GridDomain(std::vector<double> lower, std::vector<double> upper, std::vector<int> nodes);

  static std::shared_ptr<const GridDomain> interval(double a, double b, int n);
  static std::shared_ptr<const GridDomain> box(double a0, double b0, int n0, double a1, double b1,
                                               int n1);

  int dim() const { return static_cast<int>(nodes_.size()); }
  int size() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<int>& nodes() const { return nodes_; }
  double spacing(int axis) const { return spacing_[axis]; }
  double volume() const;

  const Eigen::VectorXd& weights() const { return weights_; }
  // Row i holds the coordinates of node i (axis 0 varies fastest).
  const Eigen::MatrixXd& coords() const { return coords_; }
  double distance(int i, int j) const;
  // Flat index of a multi-index.
  int index(int i0, int i1 = 0) const { return i0 + nodes_[0] * i1; }
  // Node whose coordinates match x within tol, or -1.
  int find_node(const Eigen::VectorXd& x, double tol = 1e-12) const;

  bool operator==(const GridDomain& other) const;
  bool operator!=(const GridDomain& other) const { return !(*this == other); }

 private:
  std::vector<double> lower_, upper_, spacing_;
  std::vector<int> nodes_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd coords_;
};

using DomainPtr = std::shared_ptr<const GridDomain>;

/// mu = rho dx sampled on grid nodes; mass uses the trapezoid weights.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  DiscreteMeasure(DomainPtr domain, Eigen::VectorXd density);

  static DiscreteMeasure uniform(DomainPtr domain, double value);
  static DiscreteMeasure zero(DomainPtr domain) { return uniform(std::move(domain), 0.0); }

  const DomainPtr& domain() const { return domain_; }
  const Eigen::VectorXd& density() const { return density_; }
  double density(int i) const { return density_[i]; }
  int size() const { return static_cast<int>(density_.size()); }
  // Nodal masses a_i = rho_i w_i.
  Eigen::VectorXd masses() const;
  double min_density() const { return density_.minCoeff(); }
  double max_density() const { return density_.maxCoeff(); }

 private:
  DomainPtr domain_;
  Eigen::VectorXd density_;
};

void require_same_domain(const DiscreteMeasure& a, const DiscreteMeasure& b);

double total_mass(const DiscreteMeasure& mu);
DiscreteMeasure scale_measure(const DiscreteMeasure& mu, double factor);
// Zero the density outside mask; mask.size() must equal the node count.
DiscreteMeasure restrict_measure(const DiscreteMeasure& mu, const std::vector<bool>& mask);
// Rescale to unit mass; throws on zero mass.
DiscreteMeasure normalize(const DiscreteMeasure& mu);

}  // namespace hkflow
