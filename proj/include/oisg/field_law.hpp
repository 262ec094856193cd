#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "oisg/errors.hpp"
#include "oisg/quadrature.hpp"
#include "oisg/rng.hpp"

namespace oisg {

namespace detail {

// Inverse standard normal CDF: Acklam's rational approximation plus one
// Newton step through erfc, good to ~1e-15.
inline double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= phigh) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double cdf = 0.5 * std::erfc(-x / 1.4142135623730950488);
  const double pdf = std::exp(-0.5 * x * x) / 2.5066282746310005024;
  return x - (cdf - p) / pdf;
}

}  // namespace detail

// External-field law mu_H: point mass, finite atoms, or Gaussian. All
// expectations over H use nodes(); for the Gaussian these are Gauss-Hermite
// of the requested order (exact on polynomials of degree 2*order - 1).
class FieldLaw {
 public:
  enum class Kind { point_mass, atoms, gaussian };

  static FieldLaw point_mass(double h) { return FieldLaw(Kind::point_mass, h, 0.0, {}, {}, 40); }

  static FieldLaw atoms(std::vector<double> values, std::vector<double> weights) {
    if (values.empty() || values.size() != weights.size())
      throw DomainError("field atoms: values/weights size mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw DomainError("field atoms: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("field atoms: weights must sum to 1");
    return FieldLaw(Kind::atoms, 0.0, 0.0, std::move(values), std::move(weights), 40);
  }

  static FieldLaw gaussian(double mean, double sd) {
    if (!(sd >= 0.0)) throw DomainError("field gaussian: sd must be >= 0");
    return FieldLaw(Kind::gaussian, mean, sd, {}, {}, 40);
  }

  FieldLaw with_quadrature_order(int order) const {
    if (order < 1 || order > 200) throw DomainError("field quadrature order must be in [1,200]");
    FieldLaw f = *this;
    f.order_ = order;
    return f;
  }

  Kind kind() const { return kind_; }
  int quadrature_order() const { return order_; }
  double point_value() const { return a_; }
  double gaussian_mean() const { return a_; }
  double gaussian_sd() const { return b_; }
  const std::vector<double>& values() const { return vals_; }
  const std::vector<double>& weights() const { return wts_; }

  bool is_zero() const { return kind_ == Kind::point_mass && a_ == 0.0; }

  // (value, weight) pairs with weights summing to 1
  std::vector<std::pair<double, double>> nodes() const {
    switch (kind_) {
      case Kind::point_mass: return {{a_, 1.0}};
      case Kind::atoms: {
        std::vector<std::pair<double, double>> out(vals_.size());
        for (size_t i = 0; i < vals_.size(); ++i) out[i] = {vals_[i], wts_[i]};
        return out;
      }
      case Kind::gaussian: {
        const QuadratureRule& gh = gauss_hermite(order_);
        std::vector<std::pair<double, double>> out(gh.nodes.size());
        for (size_t i = 0; i < gh.nodes.size(); ++i)
          out[i] = {a_ + b_ * gh.nodes[i], gh.weights[i]};
        return out;
      }
    }
    return {};
  }

  double moment(int p) const {
    if (p < 0) throw DomainError("field moment: p must be >= 0");
    if (p == 0) return 1.0;
    switch (kind_) {
      case Kind::point_mass: return std::pow(a_, p);
      case Kind::atoms: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) s += wts_[i] * std::pow(vals_[i], p);
        return s;
      }
      case Kind::gaussian: {
        // E[(m + s Z)^p], E[Z^k] = (k-1)!! for even k
        double sum = 0.0, binom = 1.0;
        for (int k = 0; k <= p; ++k) {
          if (k % 2 == 0) {
            double dfact = 1.0;
            for (int j = k - 1; j >= 1; j -= 2) dfact *= static_cast<double>(j);
            sum += binom * std::pow(a_, p - k) * std::pow(b_, k) * dfact;
          }
          binom = binom * static_cast<double>(p - k) / static_cast<double>(k + 1);
        }
        return sum;
      }
    }
    return 0.0;
  }

  double second_moment() const { return moment(2); }

  double quantile(double p) const {
    if (!(p > 0.0) || !(p < 1.0)) throw DomainError("field quantile: p must be in (0,1)");
    switch (kind_) {
      case Kind::point_mass: return a_;
      case Kind::atoms: {
        double cum = 0.0;
        for (size_t k = 0; k < sorted_idx_.size(); ++k) {
          cum += wts_[sorted_idx_[k]];
          if (p <= cum + 1e-15) return vals_[sorted_idx_[k]];
        }
        return vals_[sorted_idx_.back()];
      }
      case Kind::gaussian: return a_ + b_ * detail::normal_quantile(p);
    }
    return 0.0;
  }

  double sample(Rng& rng) const {
    if (kind_ == Kind::gaussian) return a_ + b_ * rng.gaussian();
    return quantile(rng.uniform());
  }

 private:
  FieldLaw(Kind kind, double a, double b, std::vector<double> vals, std::vector<double> wts,
           int order)
      : kind_(kind), a_(a), b_(b), vals_(std::move(vals)), wts_(std::move(wts)), order_(order) {
    if (kind_ == Kind::atoms) {
      sorted_idx_.resize(vals_.size());
      for (size_t i = 0; i < vals_.size(); ++i) sorted_idx_[i] = i;
      std::sort(sorted_idx_.begin(), sorted_idx_.end(),
                [this](size_t x, size_t y) { return vals_[x] < vals_[y]; });
    }
  }

  Kind kind_;
  double a_;  // point value or gaussian mean
  double b_;  // gaussian sd
  std::vector<double> vals_;
  std::vector<double> wts_;
  std::vector<size_t> sorted_idx_;
  int order_;
};

}  // namespace oisg
