#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "oisg/errors.hpp"
#include "oisg/quadrature.hpp"
#include "oisg/rng.hpp"

namespace oisg {

// Limit spectral law mu_D with compact support. Every law is a core shape
// (semicircle, rademacher, discrete atoms) composed with an affine map
// x -> shift + scale * x; ShiftedScaled composes affine parts, so there is
// no recursion. Transforms:
//   G(z)  = int (z-x)^-1 dmu,    strictly decreasing on (d_+, inf)
//   R(z)  = G^-1(z) - 1/z,       on (0, G(d_+))
// with G(d_+) the (possibly infinite) limit of G at the support edge.
class SpectralLaw {
 public:
  enum class Kind { semicircle, rademacher, discrete };

  static SpectralLaw semicircle() { return SpectralLaw(Kind::semicircle, 0.0, 1.0, {}, {}); }

  static SpectralLaw rademacher() { return SpectralLaw(Kind::rademacher, 0.0, 1.0, {}, {}); }

  static SpectralLaw discrete(std::vector<double> values, std::vector<double> weights) {
    if (values.empty() || values.size() != weights.size())
      throw DomainError("discrete law: values/weights size mismatch");
    double total = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw DomainError("discrete law: weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw DomainError("discrete law: weights must sum to 1 (got " + std::to_string(total) + ")");
    return SpectralLaw(Kind::discrete, 0.0, 1.0, std::move(values), std::move(weights));
  }

  static SpectralLaw shifted_scaled(const SpectralLaw& base, double shift, double scale) {
    if (!(scale > 0.0)) throw DomainError("shifted_scaled: scale must be positive");
    return SpectralLaw(base.kind_, base.shift_ * scale + shift, base.scale_ * scale,
                       base.vals_, base.wts_);
  }

  Kind kind() const { return kind_; }
  double shift() const { return shift_; }
  double scale() const { return scale_; }
  const std::vector<double>& values() const { return vals_; }
  const std::vector<double>& weights() const { return wts_; }

  double support_min() const { return shift_ + scale_ * core_support_min(); }
  double support_max() const { return shift_ + scale_ * core_support_max(); }
  // ||mu||_inf = max |x| over the support
  double sup_abs() const { return std::max(std::abs(support_min()), std::abs(support_max())); }

  double mean() const { return moment(1); }
  double variance() const {
    const double m1 = moment(1);
    return moment(2) - m1 * m1;
  }

  double moment(int p) const {
    if (p < 0) throw DomainError("moment: p must be >= 0");
    if (p == 0) return 1.0;
    if (shift_ == 0.0 && scale_ == 1.0) return core_moment(p);
    // binomial expansion of (shift + scale*x)^p
    double sum = 0.0, binom = 1.0;
    for (int k = 0; k <= p; ++k) {
      sum += binom * std::pow(shift_, p - k) * std::pow(scale_, k) * core_moment(k);
      binom = binom * static_cast<double>(p - k) / static_cast<double>(k + 1);
    }
    return sum;
  }

  bool is_standardized(double tol_mean = 1e-10, double tol_var = 1e-10) const {
    return std::abs(mean()) <= tol_mean && std::abs(variance() - 1.0) <= tol_var;
  }

  // ---- Cauchy transform and derivatives, for z > support_max ----

  double cauchy(double z) const {
    check_resolvent_domain(z, "cauchy");
    return core_cauchy((z - shift_) / scale_) / scale_;
  }

  double cauchy_prime(double z) const {
    check_resolvent_domain(z, "cauchy_prime");
    return core_cauchy_prime((z - shift_) / scale_) / (scale_ * scale_);
  }

  double cauchy_second(double z) const {
    check_resolvent_domain(z, "cauchy_second");
    return core_cauchy_second((z - shift_) / scale_) / (scale_ * scale_ * scale_);
  }

  // G(d_+) as an extended real: +inf when an atom sits at the edge.
  double cauchy_at_edge() const {
    const double core = core_cauchy_at_edge();
    return std::isinf(core) ? core : core / scale_;
  }

  double cauchy_inverse(double alpha) const {
    if (!(alpha > 0.0) || !(alpha < cauchy_at_edge()))
      throw DomainError("cauchy_inverse: alpha outside (0, G(d_+))");
    return shift_ + scale_ * core_cauchy_inverse(scale_ * alpha);
  }

  // ---- R-transform and derivatives, for z in (0, G(d_+)) ----

  double r_transform(double z) const {
    check_r_domain(z, "r_transform");
    return shift_ + scale_ * core_r(scale_ * z);
  }

  double r_prime(double z) const {
    check_r_domain(z, "r_prime");
    return scale_ * scale_ * core_r_prime(scale_ * z);
  }

  double r_second(double z) const {
    check_r_domain(z, "r_second");
    return scale_ * scale_ * scale_ * core_r_second(scale_ * z);
  }

  // int_0^alpha R(z) dz
  double r_integral(double alpha) const {
    if (alpha == 0.0) return 0.0;
    check_r_domain(alpha, "r_integral");
    return shift_ * alpha + core_r_integral(scale_ * alpha);
  }

  // Free cumulants kappa_1..kappa_kmax via the moment-cumulant recursion.
  std::vector<double> free_cumulants(int k_max) const {
    if (k_max < 1 || k_max > 16) throw DomainError("free_cumulants: k_max must be in [1,16]");
    std::vector<double> core = core_cumulants(k_max);
    std::vector<double> out(static_cast<size_t>(k_max));
    double sk = scale_;
    for (int k = 1; k <= k_max; ++k) {
      out[static_cast<size_t>(k - 1)] = sk * core[static_cast<size_t>(k - 1)];
      sk *= scale_;
    }
    out[0] += shift_;
    return out;
  }

  // int log(gamma - x) dmu, for gamma > support_max
  double log_potential(double gamma) const {
    check_resolvent_domain(gamma, "log_potential");
    return std::log(scale_) + core_log_potential((gamma - shift_) / scale_);
  }

  double integrate(const std::function<double(double)>& f) const {
    return core_integrate([&](double x) { return f(shift_ + scale_ * x); });
  }

  double quantile(double p) const {
    if (!(p > 0.0) || !(p < 1.0)) throw DomainError("quantile: p must be in (0,1)");
    return shift_ + scale_ * core_quantile(p);
  }

  double sample(Rng& rng) const { return quantile(rng.uniform()); }

  // Law of s * X
  SpectralLaw scaled(double s) const { return shifted_scaled(*this, 0.0, s); }

  struct StandardizeResult;
  StandardizeResult standardize() const;

 private:
  SpectralLaw(Kind kind, double shift, double scale, std::vector<double> vals,
              std::vector<double> wts)
      : kind_(kind), shift_(shift), scale_(scale), vals_(std::move(vals)), wts_(std::move(wts)) {
    if (kind_ == Kind::discrete) {
      sorted_idx_.resize(vals_.size());
      std::iota(sorted_idx_.begin(), sorted_idx_.end(), size_t{0});
      std::sort(sorted_idx_.begin(), sorted_idx_.end(),
                [this](size_t a, size_t b) { return vals_[a] < vals_[b]; });
    }
  }

  void check_resolvent_domain(double z, const char* who) const {
    if (!(z > support_max()))
      throw DomainError(std::string(who) + ": argument must exceed support_max");
  }

  void check_r_domain(double z, const char* who) const {
    if (!(z > 0.0) || !(z < cauchy_at_edge()))
      throw DomainError(std::string(who) + ": argument outside (0, G(d_+))");
  }

  double core_support_min() const {
    switch (kind_) {
      case Kind::semicircle: return -2.0;
      case Kind::rademacher: return -1.0;
      case Kind::discrete: return vals_[sorted_idx_.front()];
    }
    return 0.0;
  }

  double core_support_max() const {
    switch (kind_) {
      case Kind::semicircle: return 2.0;
      case Kind::rademacher: return 1.0;
      case Kind::discrete: return vals_[sorted_idx_.back()];
    }
    return 0.0;
  }

  double core_sup_abs() const {
    return std::max(std::abs(core_support_min()), std::abs(core_support_max()));
  }

  double core_moment(int p) const {
    switch (kind_) {
      case Kind::semicircle: {
        if (p % 2 == 1) return 0.0;
        // Catalan numbers
        const int k = p / 2;
        double cat = 1.0;
        for (int i = 0; i < k; ++i)
          cat = cat * 2.0 * (2.0 * i + 1.0) / (static_cast<double>(i) + 2.0);
        return cat;
      }
      case Kind::rademacher: return (p % 2 == 0) ? 1.0 : 0.0;
      case Kind::discrete: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) s += wts_[i] * std::pow(vals_[i], p);
        return s;
      }
    }
    return 0.0;
  }

  double core_cauchy(double z) const {
    switch (kind_) {
      case Kind::semicircle: return 2.0 / (z + std::sqrt(z * z - 4.0));
      case Kind::rademacher: return z / (z * z - 1.0);
      case Kind::discrete: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) s += wts_[i] / (z - vals_[i]);
        return s;
      }
    }
    return 0.0;
  }

  double core_cauchy_prime(double z) const {
    switch (kind_) {
      case Kind::semicircle: {
        const double s = std::sqrt(z * z - 4.0);
        return -2.0 / (s * (s + z));
      }
      case Kind::rademacher: {
        const double d = z * z - 1.0;
        return -(z * z + 1.0) / (d * d);
      }
      case Kind::discrete: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) {
          const double r = z - vals_[i];
          s -= wts_[i] / (r * r);
        }
        return s;
      }
    }
    return 0.0;
  }

  double core_cauchy_second(double z) const {
    switch (kind_) {
      case Kind::semicircle: {
        const double s = std::sqrt(z * z - 4.0);
        return 2.0 / (s * s * s);
      }
      case Kind::rademacher: {
        const double d = z * z - 1.0;
        return 2.0 * z * (z * z + 3.0) / (d * d * d);
      }
      case Kind::discrete: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) {
          const double r = z - vals_[i];
          s += 2.0 * wts_[i] / (r * r * r);
        }
        return s;
      }
    }
    return 0.0;
  }

  double core_cauchy_at_edge() const {
    switch (kind_) {
      case Kind::semicircle: return 1.0;
      case Kind::rademacher:
      case Kind::discrete: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

  double core_cauchy_inverse(double alpha) const {
    switch (kind_) {
      case Kind::semicircle: return alpha + 1.0 / alpha;
      case Kind::rademacher: return (1.0 + std::sqrt(1.0 + 4.0 * alpha * alpha)) / (2.0 * alpha);
      case Kind::discrete: return solve_cauchy_inverse(alpha);
    }
    return 0.0;
  }

  // Bracketed bisection then Newton polish. Bracket from the spec'd pad
  // d_+ + 1/alpha + ||mu||_inf + 1 (where G < alpha is guaranteed) down to
  // d_+ + eps0 with eps0 shrunk until a sign change appears.
  double solve_cauchy_inverse(double alpha) const {
    const double dplus = core_support_max();
    double hi = dplus + 1.0 / alpha + core_sup_abs() + 1.0;
    double eps0 = 0.5 * (hi - dplus);
    double lo = dplus + eps0;
    int guard = 0;
    while (core_cauchy(lo) <= alpha) {
      eps0 *= 0.0625;
      lo = dplus + eps0;
      if (++guard > 300) throw DomainError("cauchy_inverse: bracketing failed");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (core_cauchy(mid) > alpha)
        lo = mid;
      else
        hi = mid;
      if (hi - lo <= 1e-8 * (1.0 + std::abs(lo))) break;
    }
    double z = 0.5 * (lo + hi);
    for (int it = 0; it < 6; ++it) {
      const double step = (core_cauchy(z) - alpha) / core_cauchy_prime(z);
      double znew = z - step;
      if (!(znew > dplus)) znew = 0.5 * (z + dplus);
      z = znew;
    }
    return z;
  }

  // Small-z threshold below which the cumulant series is used for R and its
  // derivatives; the identity route R = G^-1(z) - 1/z cancels there.
  double series_switch() const { return 0.05 / (16.0 * std::max(core_sup_abs(), 1e-300)); }

  double series_r(double z, int deriv) const {
    const std::vector<double> kap = core_cumulants(16);
    double s = 0.0;
    for (int k = 16; k >= 1; --k) {
      const double c = kap[static_cast<size_t>(k - 1)];
      const int e = k - 1 - deriv;
      if (e < 0) continue;
      double coef = c;
      for (int j = 0; j < deriv; ++j) coef *= static_cast<double>(k - 1 - j);
      s += coef * std::pow(z, e);
    }
    return s;
  }

  double core_r(double z) const {
    switch (kind_) {
      case Kind::semicircle: return z;
      case Kind::rademacher: return 2.0 * z / (1.0 + std::sqrt(1.0 + 4.0 * z * z));
      case Kind::discrete:
        if (z < series_switch()) return series_r(z, 0);
        return solve_cauchy_inverse(z) - 1.0 / z;
    }
    return 0.0;
  }

  double core_r_prime(double z) const {
    switch (kind_) {
      case Kind::semicircle: return 1.0;
      case Kind::rademacher: {
        const double s = std::sqrt(1.0 + 4.0 * z * z);
        return 2.0 / (s * (1.0 + s));
      }
      case Kind::discrete: {
        if (z < series_switch()) return series_r(z, 1);
        const double gamma = solve_cauchy_inverse(z);
        return 1.0 / core_cauchy_prime(gamma) + 1.0 / (z * z);
      }
    }
    return 0.0;
  }

  double core_r_second(double z) const {
    switch (kind_) {
      case Kind::semicircle: return 0.0;
      case Kind::rademacher: {
        const double s = std::sqrt(1.0 + 4.0 * z * z);
        const double q = s + s * s;
        return -8.0 * z * (1.0 + 2.0 * s) / (s * q * q);
      }
      case Kind::discrete: {
        if (z < series_switch()) return series_r(z, 2);
        const double gamma = solve_cauchy_inverse(z);
        const double gp = core_cauchy_prime(gamma);
        return -core_cauchy_second(gamma) / (gp * gp * gp) - 2.0 / (z * z * z);
      }
    }
    return 0.0;
  }

  double core_r_integral(double alpha) const {
    switch (kind_) {
      case Kind::semicircle: return 0.5 * alpha * alpha;
      case Kind::rademacher: {
        const double s = std::sqrt(1.0 + 4.0 * alpha * alpha);
        return 0.5 * (s - std::log1p(s)) - 0.5 * (1.0 - std::log(2.0));
      }
      case Kind::discrete: {
        const double z0 = std::min(series_switch(), alpha);
        const std::vector<double> kap = core_cumulants(16);
        double head = 0.0;
        for (int k = 16; k >= 1; --k)
          head += kap[static_cast<size_t>(k - 1)] * std::pow(z0, k) / static_cast<double>(k);
        if (z0 >= alpha) return head;
        return head + integrate_adaptive([this](double z) { return core_r(z); }, z0, alpha, 1e-13);
      }
    }
    return 0.0;
  }

  std::vector<double> core_cumulants(int k_max) const {
    // invert m_n = sum_{s=1}^{n} kappa_s * sum_{i_1+...+i_s=n-s} m_{i_1}...m_{i_s}
    std::vector<double> m(static_cast<size_t>(k_max) + 1);
    m[0] = 1.0;
    for (int p = 1; p <= k_max; ++p) m[static_cast<size_t>(p)] = core_moment(p);
    // comp[s][r] = sum over s-part compositions of r of products of moments
    std::vector<std::vector<double>> comp(static_cast<size_t>(k_max) + 1,
                                          std::vector<double>(static_cast<size_t>(k_max) + 1, 0.0));
    for (int r = 0; r <= k_max; ++r) comp[1][static_cast<size_t>(r)] = m[static_cast<size_t>(r)];
    for (int s = 2; s <= k_max; ++s)
      for (int r = 0; r <= k_max; ++r) {
        double acc = 0.0;
        for (int j = 0; j <= r; ++j)
          acc += comp[static_cast<size_t>(s - 1)][static_cast<size_t>(r - j)] *
                 m[static_cast<size_t>(j)];
        comp[static_cast<size_t>(s)][static_cast<size_t>(r)] = acc;
      }
    std::vector<double> kappa(static_cast<size_t>(k_max));
    for (int n = 1; n <= k_max; ++n) {
      double v = m[static_cast<size_t>(n)];
      for (int s = 1; s < n; ++s)
        v -= kappa[static_cast<size_t>(s - 1)] * comp[static_cast<size_t>(s)][static_cast<size_t>(n - s)];
      kappa[static_cast<size_t>(n - 1)] = v;
    }
    return kappa;
  }

  double core_log_potential(double gamma) const {
    switch (kind_) {
      case Kind::semicircle: {
        const double s = std::sqrt(gamma * gamma - 4.0);
        return gamma / (gamma + s) + std::log(0.5 * (gamma + s)) - 0.5;
      }
      case Kind::rademacher: return 0.5 * (std::log(gamma - 1.0) + std::log(gamma + 1.0));
      case Kind::discrete: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) s += wts_[i] * std::log(gamma - vals_[i]);
        return s;
      }
    }
    return 0.0;
  }

  template <typename F>
  double core_integrate(F&& f) const {
    switch (kind_) {
      case Kind::semicircle: {
        // x = 2 cos(theta), dmu = (2/pi) sin^2(theta) dtheta on [0, pi]
        constexpr double pi = 3.14159265358979323846;
        return integrate_gl(
            [&](double th) {
              const double st = std::sin(th);
              return f(2.0 * std::cos(th)) * (2.0 / pi) * st * st;
            },
            0.0, pi, 200);
      }
      case Kind::rademacher: return 0.5 * (f(1.0) + f(-1.0));
      case Kind::discrete: {
        double s = 0.0;
        for (size_t i = 0; i < vals_.size(); ++i) s += wts_[i] * f(vals_[i]);
        return s;
      }
    }
    return 0.0;
  }

  double core_quantile(double p) const {
    switch (kind_) {
      case Kind::semicircle: {
        constexpr double pi = 3.14159265358979323846;
        auto cdf = [&](double x) {
          return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * pi) + std::asin(0.5 * x) / pi;
        };
        double lo = -2.0, hi = 2.0;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (cdf(mid) < p)
            lo = mid;
          else
            hi = mid;
        }
        return 0.5 * (lo + hi);
      }
      case Kind::rademacher: return p <= 0.5 ? -1.0 : 1.0;
      case Kind::discrete: {
        double cum = 0.0;
        for (size_t k = 0; k < sorted_idx_.size(); ++k) {
          cum += wts_[sorted_idx_[k]];
          if (p <= cum + 1e-15) return vals_[sorted_idx_[k]];
        }
        return vals_[sorted_idx_.back()];
      }
    }
    return 0.0;
  }

  Kind kind_;
  double shift_;
  double scale_;
  std::vector<double> vals_;
  std::vector<double> wts_;
  std::vector<size_t> sorted_idx_;
};

struct SpectralLaw::StandardizeResult {
  SpectralLaw law;
  double shift;  // original = shift + scale * standardized
  double scale;
  // Additive free-energy bookkeeping for the Ising model: subtracting
  // shift*I from the couplings moves the free energy by beta*shift/2
  // (spins are unit); the scale is absorbed multiplicatively into beta.
  double free_energy_shift(double beta) const { return 0.5 * beta * shift; }
};

inline SpectralLaw::StandardizeResult SpectralLaw::standardize() const {
  const double m = mean();
  const double var = variance();
  if (var < 1e-14) throw ZeroVarianceError("standardize: variance below 1e-14");
  const double sd = std::sqrt(var);
  if (kind_ == Kind::discrete) {
    // bake the exact affine map into the atom list
    std::vector<double> v(vals_.size());
    for (size_t i = 0; i < vals_.size(); ++i) v[i] = (shift_ + scale_ * vals_[i] - m) / sd;
    return {SpectralLaw(Kind::discrete, 0.0, 1.0, std::move(v), wts_), m, sd};
  }
  return {SpectralLaw(kind_, (shift_ - m) / sd, scale_ / sd, vals_, wts_), m, sd};
}

// Precomputed transform context for repeated inversions of one law:
// the edge value G(d_+) and the outer solver bracket.
class TransformCache {
 public:
  explicit TransformCache(SpectralLaw law)
      : law_(std::move(law)),
        g_at_dplus_(law_.cauchy_at_edge()),
        bracket_hi_pad_(law_.sup_abs() + 1.0) {}

  const SpectralLaw& law() const { return law_; }
  double g_at_dplus() const { return g_at_dplus_; }
  double bracket_hi(double alpha) const {
    return law_.support_max() + 1.0 / alpha + bracket_hi_pad_;
  }

  double inverse(double alpha) const { return law_.cauchy_inverse(alpha); }

 private:
  SpectralLaw law_;
  double g_at_dplus_;
  double bracket_hi_pad_;
};

}  // namespace oisg
