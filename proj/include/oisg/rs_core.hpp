#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "oisg/errors.hpp"
#include "oisg/field_law.hpp"
#include "oisg/quadrature.hpp"
#include "oisg/spectral_law.hpp"

namespace oisg {

inline double log_2cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) ;
}

// Model at inverse temperature beta: standardized spectral law mu_D plus
// external-field law mu_H. All transform work happens on the rescaled law
// mu_Dbar = law of beta*d.
struct ModelSpec {
  double beta;
  SpectralLaw spectral;
  FieldLaw field;

  void validate() const {
    if (!(beta > 0.0)) throw DomainError("ModelSpec: beta must be positive");
    if (!spectral.is_standardized())
      throw DomainError("ModelSpec: spectral law must be standardized (mean 0, variance 1)");
    const double edge = spectral.cauchy_at_edge();
    if (std::isfinite(edge) && !(beta < edge))
      throw DomainError("ModelSpec: beta must be below G(d_+)");
  }

  SpectralLaw scaled_spectral() const { return spectral.scaled(beta); }

  bool regime_warning() const {
    const double edge = spectral.cauchy_at_edge();
    const double cap = 0.5 * std::min(1.0, std::isfinite(edge) ? edge : 1.0);
    return beta > cap;
  }
};

struct SolverInfo {
  int iterations = 0;
  double residual = 0.0;
  double multistart_delta = 0.0;
  bool monotone = true;
  bool regime_warning = false;
};

struct RSConstants {
  double q_star = 0.0;
  double sigma_star_sq = 0.0;
  double a_star = 0.0;       // Rbar(1 - q*)
  double lambda_star = 0.0;  // a* + 1/(1 - q*)
  double kappa_star = 0.0;
  double delta_star = 0.0;   // sigma*^2 / kappa*
  double psi_rs = 0.0;
  double psi_rs_sphere = 0.0;
  SolverInfo solver;
};

namespace detail {

// E[tanh^2(H + sigma*G)] over independent H ~ mu_H, G ~ N(0,1)
inline double expect_tanh_sq(const FieldLaw& field, double sigma, int gh_order = 80) {
  const auto hn = field.nodes();
  if (sigma <= 0.0) {
    double s = 0.0;
    for (const auto& [h, w] : hn) {
      const double t = std::tanh(h);
      s += w * t * t;
    }
    return s;
  }
  const QuadratureRule& gh = gauss_hermite(gh_order);
  double s = 0.0;
  for (const auto& [h, wh] : hn) {
    double inner = 0.0;
    for (size_t i = 0; i < gh.nodes.size(); ++i) {
      const double t = std::tanh(h + sigma * gh.nodes[i]);
      inner += gh.weights[i] * t * t;
    }
    s += wh * inner;
  }
  return s;
}

inline double expect_log_2cosh(const FieldLaw& field, double sigma, int gh_order = 80) {
  const auto hn = field.nodes();
  if (sigma <= 0.0) {
    double s = 0.0;
    for (const auto& [h, w] : hn) s += w * log_2cosh(h);
    return s;
  }
  const QuadratureRule& gh = gauss_hermite(gh_order);
  double s = 0.0;
  for (const auto& [h, wh] : hn) {
    double inner = 0.0;
    for (size_t i = 0; i < gh.nodes.size(); ++i)
      inner += gh.weights[i] * log_2cosh(h + sigma * gh.nodes[i]);
    s += wh * inner;
  }
  return s;
}

// fixed-point map f(q) = E[tanh^2(H + sqrt(q Rbar'(1-q)) G)]
inline double q_fixed_point_map(const ModelSpec& model, const SpectralLaw& scaled, double q,
                                int gh_order = 80) {
  const double z = std::max(1.0 - q, 1e-13);
  const double rp = scaled.r_prime(z);
  const double var = std::max(q, 0.0) * std::max(rp, 0.0);
  return expect_tanh_sq(model.field, std::sqrt(var), gh_order);
}

}  // namespace detail

inline double solve_q_star(const ModelSpec& model, double tol = 1e-13, int max_iter = 500,
                           SolverInfo* info = nullptr) {
  model.validate();
  if (tol < 1e-14) tol = 1e-14;
  const SpectralLaw scaled = model.scaled_spectral();
  const double eta = 0.7;

  auto iterate = [&](double q0, SolverInfo* si) {
    double q = q0;
    double prev_res = std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (int it = 1; it <= max_iter; ++it) {
      const double fq = detail::q_fixed_point_map(model, scaled, q);
      const double res = std::abs(fq - q);
      if (res > prev_res + 1e-15) monotone = false;
      prev_res = res;
      if (res <= tol) {
        if (si) {
          si->iterations = it;
          si->residual = res;
          si->monotone = monotone;
        }
        return q;
      }
      q = (1.0 - eta) * q + eta * fq;
    }
    throw NoConvergenceError("solve_q_star: damped iteration did not converge", prev_res);
  };

  SolverInfo local;
  const double q_main = iterate(detail::expect_tanh_sq(model.field, 0.0), &local);
  const double q_alt = iterate(0.9, nullptr);
  local.multistart_delta = std::abs(q_main - q_alt);
  local.regime_warning = model.regime_warning();
  if (info) *info = local;
  return q_main;
}

// Second expression for delta* as a Gaussian expectation:
// E[((1-q*)^-1 tanh(H + sigma* G) - sigma* G)^2]
inline double delta_star_gaussian_form(const ModelSpec& model, double q_star, double sigma_star,
                                       int gh_order = 80) {
  const auto hn = model.field.nodes();
  const QuadratureRule& gh = gauss_hermite(gh_order);
  const double inv = 1.0 / (1.0 - q_star);
  double s = 0.0;
  for (const auto& [h, wh] : hn) {
    double inner = 0.0;
    for (size_t i = 0; i < gh.nodes.size(); ++i) {
      const double g = gh.nodes[i];
      const double v = inv * std::tanh(h + sigma_star * g) - sigma_star * g;
      inner += gh.weights[i] * v * v;
    }
    s += wh * inner;
  }
  return s;
}

inline double psi_rs_sphere(const ModelSpec& model) {
  model.validate();
  const SpectralLaw scaled = model.scaled_spectral();
  const double dbar_plus = scaled.support_max();
  const double m2 = model.field.second_moment();

  auto value = [&](double g) {
    return g + m2 * scaled.cauchy(g) - scaled.log_potential(g) - 1.0;
  };
  auto deriv = [&](double g) { return 1.0 + m2 * scaled.cauchy_prime(g) - scaled.cauchy(g); };
  auto second = [&](double g) {
    return m2 * scaled.cauchy_second(g) - scaled.cauchy_prime(g);
  };

  // bracket [dbar_+ + eps, Gamma], expanding Gamma until the slope is positive
  double lo = dbar_plus + 1e-9 * (1.0 + std::abs(dbar_plus));
  int guard = 0;
  while (deriv(lo) >= 0.0) {
    lo = dbar_plus + (lo - dbar_plus) * 0.125;
    if (++guard > 200) throw DomainError("psi_rs_sphere: no descending direction at the edge");
  }
  double hi = dbar_plus + 2.0 + m2;
  guard = 0;
  while (deriv(hi) <= 0.0) {
    hi = dbar_plus + 2.0 * (hi - dbar_plus);
    if (++guard > 200) throw DomainError("psi_rs_sphere: failed to bracket the minimizer");
  }

  // golden-section localization, then Newton polish on the derivative
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = value(c), fd = value(d);
  for (int it = 0; it < 120 && (b - a) > 1e-11 * (1.0 + std::abs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = value(d);
    }
  }
  double g = 0.5 * (a + b);
  for (int it = 0; it < 8; ++it) {
    const double h = second(g);
    if (!(h > 0.0)) break;
    double gn = g - deriv(g) / h;
    if (!(gn > dbar_plus)) gn = 0.5 * (g + dbar_plus);
    g = gn;
  }
  return 0.5 * value(g);
}

inline RSConstants rs_constants(const ModelSpec& model, double tol = 1e-13, int max_iter = 500) {
  RSConstants c;
  c.q_star = solve_q_star(model, tol, max_iter, &c.solver);
  const SpectralLaw scaled = model.scaled_spectral();
  const double z = 1.0 - c.q_star;
  const double rp = scaled.r_prime(z);
  c.sigma_star_sq = c.q_star * rp;
  c.a_star = scaled.r_transform(z);
  c.lambda_star = c.a_star + 1.0 / z;
  const double denom = 1.0 - z * z * rp;
  if (!(denom > 0.0))
    throw DomainError("rs_constants: 1 - (1-q*)^2 Rbar'(1-q*) <= 0 (beta outside regime)");
  c.kappa_star = 1.0 / denom - 1.0;
  if (!(c.kappa_star > 0.0))
    throw DomainError("rs_constants: kappa* must be positive");
  c.delta_star = c.sigma_star_sq / c.kappa_star;

  // Psi_RS = E log 2cosh(H + sigma* G) + (q*/2) Rbar(1-q*)
  //          - (q*(1-q*)/2) Rbar'(1-q*) + (1/2) int_0^{1-q*} Rbar
  const double sigma = std::sqrt(std::max(c.sigma_star_sq, 0.0));
  c.psi_rs = detail::expect_log_2cosh(model.field, sigma) + 0.5 * c.q_star * c.a_star -
             0.5 * c.q_star * z * rp + 0.5 * scaled.r_integral(z);
  c.psi_rs_sphere = psi_rs_sphere(model);
  return c;
}

inline double psi_rs(const ModelSpec& model) { return rs_constants(model).psi_rs; }

}  // namespace oisg
