#include "hkflow/entropy.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hkflow/error.hpp"

namespace hkflow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Entropy Entropy::power_mass(double alpha, double m, double gamma) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("power_mass needs alpha >= 0");
  if (!(m > 1.0) || !std::isfinite(m)) throw InvalidArgument("power_mass needs m > 1");
  if (!std::isfinite(gamma)) throw InvalidArgument("power_mass needs finite gamma");
  Entropy e;
  e.family_ = EntropyFamily::PowerMass;
  e.p0_ = alpha;
  e.p1_ = m;
  e.p2_ = gamma;
  // The linear part sets the HK convexity modulus.
  e.lambda_ = 2.0 * gamma;
  return e;
}

Entropy Entropy::neg_power(double q, double beta) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("neg_power needs 0 < q < 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("neg_power needs beta > 0");
  Entropy e;
  e.family_ = EntropyFamily::NegPower;
  e.p0_ = beta;
  e.p1_ = q;
  e.lambda_ = 0.0;
  return e;
}

Entropy Entropy::capped(double gamma, double eps) {
  if (!std::isfinite(gamma)) throw InvalidArgument("capped entropy needs finite gamma");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("capped entropy needs eps > 0");
  Entropy e;
  e.family_ = EntropyFamily::Capped;
  e.p0_ = gamma;
  e.p1_ = eps;
  e.lambda_ = 2.0 * gamma;
  return e;
}

Entropy Entropy::with_c_low(double c) const {
  if (!(c > 0.0) || !(d1(c) < 0.0)) throw InvalidArgument("c_low must satisfy E'(c_low) < 0");
  Entropy e = *this;
  e.c_low_ = c;
  return e;
}

std::optional<double> Entropy::c_low_max() const {
  if (auto r = derivative_root()) return r;
  if (recession_slope() <= 0.0 && d1(1e12) < 0.0) return kInf;
  return c_low_;
}

Entropy Entropy::custom_table(std::vector<double> c, std::vector<double> v, double lambda) {
  const std::size_t k = c.size();
  if (k < 3 || v.size() != k) throw InvalidArgument("custom table needs >= 3 (c, E) samples");
  if (c[0] != 0.0) throw InvalidArgument("custom table must start at c = 0");
  if (v[0] != 0.0) throw InvalidArgument("custom table must have E(0) = 0");
  for (std::size_t i = 0; i < k; ++i) {
    if (!std::isfinite(c[i]) || !std::isfinite(v[i])) throw InvalidArgument("custom table not finite");
    if (i > 0 && !(c[i] > c[i - 1])) throw InvalidArgument("custom table c must increase");
  }
  if (!std::isfinite(lambda)) throw InvalidArgument("custom table lambda must be finite");
  Entropy e;
  e.family_ = EntropyFamily::CustomTable;
  e.lambda_ = lambda;
  e.tc_ = std::move(c);
  e.te_ = std::move(v);
  // Fritsch-Carlson slopes (same rule as SciPy's PchipInterpolator).
  std::vector<double> h(k - 1), del(k - 1);
  for (std::size_t i = 0; i + 1 < k; ++i) {
    h[i] = e.tc_[i + 1] - e.tc_[i];
    del[i] = (e.te_[i + 1] - e.te_[i]) / h[i];
  }
  e.ts_.assign(k, 0.0);
  for (std::size_t i = 1; i + 1 < k; ++i) {
    if (del[i - 1] * del[i] > 0.0) {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      e.ts_[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
    }
  }
  auto edge = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(d) > std::abs(3.0 * d0)) return 3.0 * d0;
    return d;
  };
  e.ts_[0] = edge(h[0], h[1], del[0], del[1]);
  e.ts_[k - 1] = edge(h[k - 2], h[k - 3], del[k - 2], del[k - 3]);
  // Convexity check of the interpolant: E' must not decrease.
  double prev = -kInf;
  double scale = 1.0;
  for (double s : e.ts_) scale = std::max(scale, std::abs(s));
  for (std::size_t i = 0; i + 1 < k; ++i) {
    for (int j = 0; j <= 16; ++j) {
      const double x = e.tc_[i] + h[i] * j / 16.0;
      const double d = e.d1(x);
      if (d < prev - 1e-9 * scale)
        throw InvalidArgument("custom table interpolant is not convex near c = " + std::to_string(x));
      prev = std::max(prev, d);
    }
  }
  return e;
}

std::string Entropy::describe() const {
  std::ostringstream os;
  os.precision(12);
  switch (family_) {
    case EntropyFamily::PowerMass:
      os << "power_mass(alpha=" << p0_ << ", m=" << p1_ << ", gamma=" << p2_ << ")";
      break;
    case EntropyFamily::NegPower:
      os << "neg_power(q=" << p1_ << ", beta=" << p0_ << ")";
      break;
    case EntropyFamily::CustomTable:
      os << "custom_table(" << tc_.size() << " samples, lambda=" << lambda_ << ")";
      break;
    case EntropyFamily::Capped:
      os << "capped(gamma=" << p0_ << ", eps=" << p1_ << ")";
      break;
  }
  return os.str();
}

int Entropy::segment(double c) const {
  auto it = std::upper_bound(tc_.begin(), tc_.end(), c);
  int k = static_cast<int>(it - tc_.begin()) - 1;
  return std::clamp(k, 0, static_cast<int>(tc_.size()) - 2);
}

double Entropy::value(double c) const {
  if (!(c >= 0.0)) throw InvalidArgument("entropy evaluated at negative density");
  switch (family_) {
    case EntropyFamily::PowerMass:
      return p0_ * std::pow(c, p1_) + p2_ * c;
    case EntropyFamily::NegPower:
      return -p0_ * std::pow(c, p1_);
    case EntropyFamily::CustomTable: {
      if (c >= tc_.back()) return te_.back() + ts_.back() * (c - tc_.back());
      const int k = segment(c);
      const double h = tc_[k + 1] - tc_[k];
      const double t = (c - tc_[k]) / h;
      const double t2 = t * t, t3 = t2 * t;
      return (2 * t3 - 3 * t2 + 1) * te_[k] + (t3 - 2 * t2 + t) * h * ts_[k] +
             (-2 * t3 + 3 * t2) * te_[k + 1] + (t3 - t2) * h * ts_[k + 1];
    }
    case EntropyFamily::Capped: {
      if (c > 1.0) return kInf;
      auto xlx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
      return p0_ * c + p1_ * (xlx(c) + xlx(1.0 - c));
    }
  }
  return 0.0;
}

double Entropy::d1(double c) const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      return p0_ == 0.0 ? p2_ : p0_ * p1_ * std::pow(c, p1_ - 1.0) + p2_;
    case EntropyFamily::NegPower:
      return c <= 0.0 ? -kInf : -p0_ * p1_ * std::pow(c, p1_ - 1.0);
    case EntropyFamily::CustomTable: {
      if (c >= tc_.back()) return ts_.back();
      const int k = segment(c);
      const double h = tc_[k + 1] - tc_[k];
      const double t = (c - tc_[k]) / h;
      const double t2 = t * t;
      return ((6 * t2 - 6 * t) * te_[k] + (3 * t2 - 4 * t + 1) * h * ts_[k] +
              (-6 * t2 + 6 * t) * te_[k + 1] + (3 * t2 - 2 * t) * h * ts_[k + 1]) /
             h;
    }
    case EntropyFamily::Capped:
      if (c <= 0.0) return -kInf;
      if (c >= 1.0) return kInf;
      return p0_ + p1_ * (std::log(c) - std::log1p(-c));
  }
  return 0.0;
}

double Entropy::d2(double c) const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      if (p0_ == 0.0) return 0.0;
      if (c <= 0.0) return p1_ < 2.0 ? kInf : (p1_ == 2.0 ? 2.0 * p0_ : 0.0);
      return p0_ * p1_ * (p1_ - 1.0) * std::pow(c, p1_ - 2.0);
    case EntropyFamily::NegPower:
      return c <= 0.0 ? kInf : p0_ * p1_ * (1.0 - p1_) * std::pow(c, p1_ - 2.0);
    case EntropyFamily::CustomTable: {
      if (c >= tc_.back()) return 0.0;
      const int k = segment(c);
      const double h = tc_[k + 1] - tc_[k];
      const double t = (c - tc_[k]) / h;
      return ((12 * t - 6) * te_[k] + (6 * t - 4) * h * ts_[k] + (-12 * t + 6) * te_[k + 1] +
              (6 * t - 2) * h * ts_[k + 1]) /
             (h * h);
    }
    case EntropyFamily::Capped:
      if (c <= 0.0 || c >= 1.0) return kInf;
      return p1_ / (c * (1.0 - c));
  }
  return 0.0;
}

double Entropy::d1_at_zero() const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      return p2_;
    case EntropyFamily::NegPower:
      return -kInf;
    case EntropyFamily::CustomTable:
      return ts_.front();
    case EntropyFamily::Capped:
      return -kInf;
  }
  return 0.0;
}

double Entropy::recession_slope() const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      return p0_ > 0.0 ? kInf : p2_;
    case EntropyFamily::NegPower:
      return 0.0;
    case EntropyFamily::CustomTable:
      return ts_.back();
    case EntropyFamily::Capped:
      return kInf;
  }
  return 0.0;
}

std::optional<double> Entropy::derivative_root() const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      if (p0_ > 0.0 && p2_ < 0.0) return std::pow(-p2_ / (p0_ * p1_), 1.0 / (p1_ - 1.0));
      return std::nullopt;
    case EntropyFamily::NegPower:
      return std::nullopt;
    case EntropyFamily::CustomTable: {
      if (d1_at_zero() >= 0.0 || ts_.back() <= 0.0) return std::nullopt;
      return conj_d1(0.0);
    }
    case EntropyFamily::Capped:
      return 1.0 / (1.0 + std::exp(p0_ / p1_));
  }
  return std::nullopt;
}

double Entropy::conj_d1(double u) const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      if (u <= p2_) return 0.0;
      if (p0_ == 0.0) return kInf;
      return std::pow((u - p2_) / (p0_ * p1_), 1.0 / (p1_ - 1.0));
    case EntropyFamily::NegPower:
      if (u >= 0.0) return kInf;
      return std::pow(-u / (p0_ * p1_), 1.0 / (p1_ - 1.0));
    case EntropyFamily::CustomTable: {
      if (u <= ts_.front()) return 0.0;
      if (u >= ts_.back()) return kInf;
      double lo = 0.0, hi = tc_.back();
      for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (d1(mid) < u ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    case EntropyFamily::Capped: {
      const double z = (u - p0_) / p1_;
      return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
  }
  return 0.0;
}

double Entropy::conj(double u) const {
  switch (family_) {
    case EntropyFamily::PowerMass: {
      if (u <= p2_) return 0.0;
      if (p0_ == 0.0) return kInf;
      const double c = conj_d1(u);
      return p0_ * (p1_ - 1.0) * std::pow(c, p1_);
    }
    case EntropyFamily::NegPower: {
      if (u >= 0.0) return kInf;
      const double c = conj_d1(u);
      return p0_ * (1.0 - p1_) * std::pow(c, p1_);
    }
    case EntropyFamily::CustomTable: {
      if (u >= ts_.back()) return kInf;
      const double c = conj_d1(u);
      return u * c - value(c);
    }
    case EntropyFamily::Capped: {
      const double z = (u - p0_) / p1_;
      return p1_ * (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))));
    }
  }
  return 0.0;
}

double Entropy::conj_d2(double u) const {
  switch (family_) {
    case EntropyFamily::PowerMass:
      if (u <= p2_) return 0.0;
      if (p0_ == 0.0) return kInf;
      return 1.0 / d2(conj_d1(u));
    case EntropyFamily::NegPower:
      if (u >= 0.0) return kInf;
      return 1.0 / d2(conj_d1(u));
    case EntropyFamily::CustomTable:
      if (u <= ts_.front()) return 0.0;
      if (u >= ts_.back()) return kInf;
      return 1.0 / std::max(d2(conj_d1(u)), 1e-12);
    case EntropyFamily::Capped: {
      const double c = conj_d1(u);
      return c * (1.0 - c) / p1_;
    }
  }
  return 0.0;
}

double Entropy::functional(const DiscreteMeasure& mu) const {
  const auto& w = mu.domain()->weights();
  double s = 0.0;
  for (int i = 0; i < mu.size(); ++i) s += w[i] * value(mu.density(i));
  return s;
}

double eval_functional(const Entropy& e, const DiscreteMeasure& mu, double singular_mass) {
  if (!(singular_mass >= 0.0)) throw InvalidArgument("singular mass must be nonnegative");
  double v = e.functional(mu);
  if (singular_mass > 0.0) v += e.recession_slope() * singular_mass;
  return v;
}

double eval_limit_functional(double gamma, const DiscreteMeasure& mu) {
  if (mu.max_density() > 1.0 + 1e-12) return kInf;
  return gamma * total_mass(mu);
}

std::optional<double> find_c_low(const Entropy& e, double c_max, int n) {
  if (!(c_max > 0.0) || n < 2) throw InvalidArgument("c_low search needs c_max > 0 and n >= 2");
  for (int k = n - 1; k >= 0; --k) {
    const double c = c_max * std::pow(1e-6, 1.0 - static_cast<double>(k) / (n - 1));
    if (e.d1(c) < 0.0) return c;
  }
  return std::nullopt;
}

double n_function(const Entropy& e, double lambda, int d, double rho, double g) {
  const double arg = std::pow(g, 2.0 + d) / std::pow(rho, d);
  return std::pow(rho / g, d) * e.value(arg) - 0.5 * lambda * g * g;
}

NEConditionReport check_ne_conditions(const Entropy& e, double lambda, int d, const NEGrid& grid) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  if (!(grid.lo > 0.0 && grid.hi > grid.lo) || grid.n < 2)
    throw InvalidArgument("invalid (rho, gamma) grid");
  NEConditionReport rep;
  const double step = grid.step;
  std::vector<double> pts(grid.n);
  for (int k = 0; k < grid.n; ++k)
    pts[k] = grid.lo * std::pow(grid.hi / grid.lo, static_cast<double>(k) / (grid.n - 1));
  auto N = [&](double r, double g) { return n_function(e, lambda, d, r, g); };
  for (double r : pts) {
    for (double g : pts) {
      const double hr = step * r, hg = step * g;
      const double f00 = N(r, g);
      const double fpr = N(r + hr, g), fmr = N(r - hr, g);
      const double fpg = N(r, g + hg), fmg = N(r, g - hg);
      const double fpp = N(r + hr, g + hg), fpm = N(r + hr, g - hg);
      const double fmp = N(r - hr, g + hg), fmm = N(r - hr, g - hg);
      double scale = 1.0;
      for (double v : {f00, fpr, fmr, fpg, fmg, fpp, fpm, fmp, fmm}) scale = std::max(scale, std::abs(v));
      // diag(r, g) H diag(r, g), divided by the local magnitude.
      Eigen::Matrix2d H;
      H(0, 0) = (fpr - 2 * f00 + fmr) / (step * step);
      H(1, 1) = (fpg - 2 * f00 + fmg) / (step * step);
      H(0, 1) = H(1, 0) = (fpp - fpm - fmp + fmm) / (4 * step * step);
      H /= scale;
      const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(H).eigenvalues()[0];
      if (lmin < rep.worst_eigenvalue) {
        rep.worst_eigenvalue = lmin;
        rep.eig_at[0] = r;
        rep.eig_at[1] = g;
      }
    }
  }
  rep.convex = rep.worst_eigenvalue >= -grid.tol;
  if (d > 1) {
    for (double g : pts) {
      for (int k = 0; k + 1 < grid.n; ++k) {
        const double a = N(pts[k], g), b = N(pts[k + 1], g);
        const double rise = (d - 1) * (b - a) / std::max({1.0, std::abs(a), std::abs(b)});
        if (rise > rep.worst_increase) {
          rep.worst_increase = rise;
          rep.incr_at[0] = pts[k];
          rep.incr_at[1] = g;
        }
      }
    }
  }
  rep.monotone = rep.worst_increase <= grid.tol;
  return rep;
}

}  // namespace hkflow
