#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "oisg/errors.hpp"
#include "oisg/quadrature.hpp"
#include "oisg/rs_core.hpp"

namespace oisg {

// f(h, y) = (1-q*)^-1 tanh(h+y) - y, the divergence-free AMP nonlinearity.
inline double amp_nonlinearity(double h, double y, double q_star) {
  return std::tanh(h + y) / (1.0 - q_star) - y;
}

// Scalar recursion map g(delta) = E[f(H,Y') f(H,Y'')], where Y', Y'' are
// jointly Gaussian with variance sigma*^2 and covariance kappa* delta,
// represented through three independent standard Gaussians. Evaluated as
// E_{H,G}[ E_{G'}[f | H,G]^2 ] so the quadrature is at most 3_D.
inline double g_map(const ModelSpec& model, const RSConstants& c, double delta,
                    int gh_order = 60) {
  if (gh_order > 200) throw QuadratureOverflowError("g_map: requested order > 200");
  if (!(delta >= -1e-12) || !(delta <= c.delta_star + 1e-9))
    throw DomainError("g_map: delta outside [0, delta*]");
  delta = std::min(std::max(delta, 0.0), c.delta_star);
  const double shared_var = c.kappa_star * delta;
  const double resid_var = std::max(c.sigma_star_sq - shared_var, 0.0);
  const double a = std::sqrt(std::max(shared_var, 0.0));
  const double b = std::sqrt(resid_var);
  const QuadratureRule& gh = gauss_hermite(gh_order);
  const auto hnodes = model.field.nodes();
  double total = 0.0;
  for (const auto& [h, wh] : hnodes) {
    double outer = 0.0;
    for (size_t i = 0; i < gh.nodes.size(); ++i) {
      const double u = a * gh.nodes[i];
      double inner = 0.0;
      if (b == 0.0) {
        inner = amp_nonlinearity(h, u, c.q_star);
      } else {
        for (size_t j = 0; j < gh.nodes.size(); ++j)
          inner += gh.weights[j] * amp_nonlinearity(h, u + b * gh.nodes[j], c.q_star);
      }
      outer += gh.weights[i] * inner * inner;
    }
    total += wh * outer;
  }
  return total;
}

// Deterministic state-evolution Gram matrix Delta_t = (delta_{ss'}). Each
// advance appends one column: delta_{s,t+1} = g(delta_{s-1,t}) with
// delta_{0,.} = 0, so Delta_t is always the leading block of Delta_{t+1}.
struct SEState {
  ModelSpec model;
  RSConstants constants;
  Eigen::MatrixXd delta;  // t x t
  int gh_order = 60;

  int t() const { return static_cast<int>(delta.rows()); }
};

inline SEState se_init(const ModelSpec& model, const RSConstants& constants, int gh_order = 60) {
  SEState s{model, constants, Eigen::MatrixXd(1, 1), gh_order};
  // delta_11 = E[X_1^2] = g(delta*) = delta*
  s.delta(0, 0) = std::min(g_map(model, constants, constants.delta_star, gh_order),
                           constants.delta_star);
  return s;
}

inline SEState se_advance(const SEState& state) {
  const int t = state.t();
  SEState next = state;
  next.delta = Eigen::MatrixXd(t + 1, t + 1);
  next.delta.topLeftCorner(t, t) = state.delta;
  for (int s = 1; s <= t + 1; ++s) {
    const double prev = (s == 1) ? 0.0 : state.delta(s - 2, t - 1);
    double v = g_map(state.model, state.constants, prev, state.gh_order);
    v = std::min(std::max(v, 0.0), state.constants.delta_star);
    next.delta(s - 1, t) = v;
    next.delta(t, s - 1) = v;
  }
  return next;
}

inline SEState se_run(const ModelSpec& model, const RSConstants& constants, int t_max,
                      int gh_order = 60) {
  SEState s = se_init(model, constants, gh_order);
  while (s.t() < t_max) s = se_advance(s);
  return s;
}

struct SELimitReport {
  int t = 0;
  double max_dev_tail = 0.0;     // max |delta_st - delta*| over s,t >= t-2
  double decay_ratio = 0.0;      // geometric fit of |delta_{s,s+1} - delta*|
  double kappa_delta_gap = 0.0;  // |kappa* delta_{t-1,t} - sigma*^2|
  bool contraction_bound_ok = true;  // |delta_{t-1,t} - delta*| <= (1/2)^{t-1} delta* + 1e-9
  bool degenerate = false;
};

inline SELimitReport se_limit_check(const SEState& state) {
  SELimitReport rep;
  rep.t = state.t();
  const double ds = state.constants.delta_star;
  if (rep.t < 3) {
    rep.degenerate = true;
    return rep;
  }
  const int t = rep.t;
  for (int i = t - 3; i < t; ++i)
    for (int j = t - 3; j < t; ++j)
      rep.max_dev_tail = std::max(rep.max_dev_tail, std::abs(state.delta(i, j) - ds));
  // fit |delta_{s,s+1} - delta*| ~ C r^s by successive ratios
  std::vector<double> devs;
  for (int s = 0; s + 1 < t; ++s) devs.push_back(std::abs(state.delta(s, s + 1) - ds));
  double ratio = 0.0;
  int count = 0;
  for (size_t s = 0; s + 1 < devs.size(); ++s)
    if (devs[s] > 1e-14) {
      ratio += devs[s + 1] / devs[s];
      ++count;
    }
  rep.decay_ratio = count ? ratio / count : 0.0;
  rep.kappa_delta_gap = std::abs(state.constants.kappa_star * state.delta(t - 2, t - 1) -
                                 state.constants.sigma_star_sq);
  const double bound = std::pow(0.5, t - 1) * ds + 1e-9;
  rep.contraction_bound_ok = std::abs(state.delta(t - 2, t - 1) - ds) <= bound;
  return rep;
}

}  // namespace oisg
