#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oisg/errors.hpp"
#include "oisg/oracle.hpp"
#include "oisg/rng.hpp"
#include "oisg/rs_core.hpp"
#include "oisg/state_evolution.hpp"

namespace oisg {

// H(gamma, alpha) = gamma*alpha - int log(gamma - x) dmu - (1 + log alpha).
// Convex in gamma on (d_+, inf); the law argument is whichever measure the
// caller is working with (callers in this library pass the beta-scaled law).
inline double h_func(double gamma, double alpha, const SpectralLaw& law) {
  if (!(alpha > 0.0)) throw DomainError("h_func: alpha must be positive");
  return gamma * alpha - law.log_potential(gamma) - (1.0 + std::log(alpha));
}

inline double h_grad_gamma(double gamma, double alpha, const SpectralLaw& law) {
  return alpha - law.cauchy(gamma);
}

inline double h_grad_alpha(double gamma, double alpha, const SpectralLaw& law) {
  (void)law;
  return gamma - 1.0 / alpha;
}

// Resolvent weight of the first/second-moment objectives:
// psi(x) = x + (a*/kappa*) (1 - 1/((1-q*)(lambda* - x)))
inline double f_weight(double x, const RSConstants& c) {
  return x + (c.a_star / c.kappa_star) *
                 (1.0 - 1.0 / ((1.0 - c.q_star) * (c.lambda_star - x)));
}

inline double f_func(double gamma, const ModelSpec& model, const RSConstants& c) {
  const SpectralLaw scaled = model.scaled_spectral();
  if (!(gamma > scaled.support_max())) throw DomainError("f_func: gamma must exceed dbar_+");
  return scaled.integrate([&](double x) {
    const double w = f_weight(x, c);
    return w * w / (gamma - x);
  });
}

inline double f_func_prime(double gamma, const ModelSpec& model, const RSConstants& c) {
  const SpectralLaw scaled = model.scaled_spectral();
  if (!(gamma > scaled.support_max())) throw DomainError("f_func_prime: gamma must exceed dbar_+");
  return scaled.integrate([&](double x) {
    const double w = f_weight(x, c);
    const double r = gamma - x;
    return -w * w / (r * r);
  });
}

// 2x2 matrix version over the block resolvent [[gamma-x, nu], [nu, rho-x]]^-1.
inline Eigen::Matrix2d f2_func(double gamma, double nu, double rho, const ModelSpec& model,
                               const RSConstants& c) {
  const SpectralLaw scaled = model.scaled_spectral();
  const double edge = scaled.support_max();
  const double tr = gamma + rho;
  const double lam_min = 0.5 * tr - std::sqrt(0.25 * (gamma - rho) * (gamma - rho) + nu * nu);
  if (!(lam_min > edge)) throw DomainError("f2_func: matrix must dominate dbar_+ I");
  Eigen::Matrix2d out;
  out(0, 0) = scaled.integrate([&](double x) {
    const double w = f_weight(x, c);
    return w * w * (rho - x) / ((gamma - x) * (rho - x) - nu * nu);
  });
  out(1, 1) = scaled.integrate([&](double x) {
    const double w = f_weight(x, c);
    return w * w * (gamma - x) / ((gamma - x) * (rho - x) - nu * nu);
  });
  out(0, 1) = scaled.integrate([&](double x) {
    const double w = f_weight(x, c);
    return -w * w * nu / ((gamma - x) * (rho - x) - nu * nu);
  });
  out(1, 0) = out(0, 1);
  return out;
}

struct ScalarInfimum {
  double value = 0.0;
  double gamma_opt = 0.0;
};

// Direct 1-D minimization of h_func over gamma > d_+ (bracketed bisection on
// the derivative, then Newton), independent of the closed form.
inline ScalarInfimum inf_gamma_numeric(double alpha, const SpectralLaw& law) {
  const double edge_g = law.cauchy_at_edge();
  if (!(alpha > 0.0) || !(alpha < edge_g))
    throw DomainError("inf_gamma_numeric: alpha outside (0, G(d_+))");
  const double dplus = law.support_max();
  double hi = dplus + 1.0 / alpha + law.sup_abs() + 1.0;
  double eps0 = 0.5 * (hi - dplus);
  double lo = dplus + eps0;
  int guard = 0;
  while (!(law.cauchy(lo) > alpha)) {
    eps0 *= 0.0625;
    lo = dplus + eps0;
    if (++guard > 300) throw DomainError("inf_gamma_numeric: bracketing failed");
  }
  for (int it = 0; it < 200 && (hi - lo) > 1e-10 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (law.cauchy(mid) > alpha)
      lo = mid;
    else
      hi = mid;
  }
  double g = 0.5 * (lo + hi);
  for (int it = 0; it < 6; ++it) {
    double gn = g - (law.cauchy(g) - alpha) / law.cauchy_prime(g);
    if (!(gn > dplus)) gn = 0.5 * (g + dplus);
    g = gn;
  }
  if (!(-law.cauchy_prime(g) > 0.0))
    throw std::logic_error("inf_gamma_numeric: objective is not convex at the optimizer");
  return {h_func(g, alpha, law), g};
}

// Closed form inf_gamma h_func = int_0^alpha R(z) dz, cross-checked against
// the direct minimization.
inline double inf_gamma_closed(double alpha, const SpectralLaw& law) {
  const double closed = law.r_integral(alpha);
  const double numeric = inf_gamma_numeric(alpha, law).value;
  if (std::abs(closed - numeric) > 1e-8 * (1.0 + std::abs(closed)))
    throw std::logic_error("inf_gamma_closed: closed form and minimization disagree");
  return closed;
}

namespace detail {

// Hessian of -int log det(Lambda - xI) dmu in (gamma, nu, rho) coordinates,
// accumulated from the 2x2 resolvent W = (Lambda - xI)^-1.
inline Eigen::Matrix3d logdet_hessian_term(const Eigen::Matrix2d& w) {
  Eigen::Matrix3d h;
  const double w11 = w(0, 0), w12 = w(0, 1), w22 = w(1, 1);
  h(0, 0) = w11 * w11;
  h(0, 1) = 2.0 * w11 * w12;
  h(0, 2) = w12 * w12;
  h(1, 1) = 2.0 * (w12 * w12 + w11 * w22);
  h(1, 2) = 2.0 * w22 * w12;
  h(2, 2) = w22 * w22;
  h(1, 0) = h(0, 1);
  h(2, 0) = h(0, 2);
  h(2, 1) = h(1, 2);
  return h;
}

inline double lambda_min_2x2(double gamma, double nu, double rho) {
  return 0.5 * (gamma + rho) - std::sqrt(0.25 * (gamma - rho) * (gamma - rho) + nu * nu);
}

}  // namespace detail

struct MatrixInfimum {
  double value = 0.0;
  double gamma_opt = 0.0, nu_opt = 0.0, rho_opt = 0.0;
  double grad_norm = 0.0;
};

// Direct 3-D minimization over D_+ = { Lambda > d_+ I } of
// Tr(Lambda A) - int log det(Lambda - xI) dmu - (2 + log det A),
// by damped Newton with a feasibility line search.
inline MatrixInfimum inf_gamma_matrix_numeric(const Eigen::Matrix2d& a, const SpectralLaw& law) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
  const double amin = es.eigenvalues()(0), amax = es.eigenvalues()(1);
  const double edge_g = law.cauchy_at_edge();
  if (!(amin > 0.0) || !(amax < edge_g))
    throw DomainError("inf_gamma_matrix_numeric: need 0 < A < G(d_+) I");
  const double dplus = law.support_max();
  const double logdet_a = std::log(amin) + std::log(amax);

  auto objective = [&](double g, double nu, double rho) {
    const double tr = 0.5 * (g + rho);
    const double rad = std::sqrt(0.25 * (g - rho) * (g - rho) + nu * nu);
    const double l1 = tr - rad, l2 = tr + rad;
    return g * a(0, 0) + rho * a(1, 1) + 2.0 * nu * a(0, 1) - law.log_potential(l1) -
           law.log_potential(l2) - 2.0 - logdet_a;
  };
  auto gradient = [&](double g, double nu, double rho) {
    // matrix Cauchy transform through the eigenbasis of Lambda
    Eigen::Matrix2d lam;
    lam << g, nu, nu, rho;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> el(lam);
    Eigen::Matrix2d gl = Eigen::Matrix2d::Zero();
    for (int i = 0; i < 2; ++i) {
      const Eigen::Vector2d u = el.eigenvectors().col(i);
      gl += law.cauchy(el.eigenvalues()(i)) * u * u.transpose();
    }
    const Eigen::Matrix2d grad_m = a - gl;
    return Eigen::Vector3d(grad_m(0, 0), 2.0 * grad_m(0, 1), grad_m(1, 1));
  };
  auto hessian = [&](double g, double nu, double rho) {
    Eigen::Matrix3d h;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        h(i, j) = law.integrate([&](double x) {
          Eigen::Matrix2d m;
          m << g - x, nu, nu, rho - x;
          return detail::logdet_hessian_term(m.inverse())(i, j);
        });
        h(j, i) = h(i, j);
      }
    return h;
  };

  double g = dplus + 1.0 / amin + law.sup_abs() + 1.0;
  double nu = 0.0, rho = g;
  double fcur = objective(g, nu, rho);
  Eigen::Vector3d grad = gradient(g, nu, rho);
  for (int it = 0; it < 200 && grad.norm() > 1e-11; ++it) {
    const Eigen::Matrix3d h = hessian(g, nu, rho);
    Eigen::Vector3d step = h.ldlt().solve(-grad);
    if (!step.allFinite()) step = -grad;
    double tstep = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, tstep *= 0.5) {
      const double gn = g + tstep * step(0), nun = nu + tstep * step(1),
                   rhon = rho + tstep * step(2);
      if (!(detail::lambda_min_2x2(gn, nun, rhon) > dplus)) continue;
      const double fn = objective(gn, nun, rhon);
      if (fn <= fcur + 1e-14 * (1.0 + std::abs(fcur))) {
        g = gn;
        nu = nun;
        rho = rhon;
        fcur = fn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
    grad = gradient(g, nu, rho);
  }
  return {fcur, g, nu, rho, gradient(g, nu, rho).norm()};
}

// Closed form Tr f(A) with f(alpha) = int_0^alpha R(z) dz, via the
// eigendecomposition of A; cross-checked against the 3-D minimization.
inline double inf_gamma_matrix(const Eigen::Matrix2d& a, const SpectralLaw& law) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
  const double amin = es.eigenvalues()(0), amax = es.eigenvalues()(1);
  if (!(amin > 0.0) || !(amax < law.cauchy_at_edge()))
    throw DomainError("inf_gamma_matrix: need 0 < A < G(d_+) I");
  const double closed = law.r_integral(amin) + law.r_integral(amax);
  const double numeric = inf_gamma_matrix_numeric(a, law).value;
  if (std::abs(closed - numeric) > 1e-6 * (1.0 + std::abs(closed)))
    throw std::logic_error("inf_gamma_matrix: closed form and minimization disagree");
  return closed;
}

// ---- finite-n HCIZ exponents ----

struct Rank1Exponent {
  Eigen::VectorXd a, b, d;
  double epsilon = 0.0;
  double gamma_opt = 0.0;
  double value = 0.0;
  double derivative_at_opt = 0.0;
  bool boundary_active = false;
};

// E_n(a,b) = inf_{gamma >= d_{n,+}+eps} { gamma ||a||^2/n
//   + n^-1 b^T (gamma I - D)^-1 b - n^-1 log det(gamma I - D)
//   - (1 + log(||a||^2/n)) },
// solved through the scalar equation F_n(gamma) = alpha.
inline Rank1Exponent hciz_rank1(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& d, double eps) {
  const int n = static_cast<int>(a.size());
  if (n < 1 || b.size() != n || d.size() != n)
    throw DomainError("hciz_rank1: inconsistent vector lengths");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double alpha = a.squaredNorm() * inv_n;
  if (!(alpha > 0.0) || !std::isfinite(alpha) || !b.allFinite())
    throw InfeasibleAlphaError("hciz_rank1: need finite inputs and ||a||^2/n > 0");
  const double edge = d.maxCoeff();

  auto f_n = [&](double g) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = g - d(i);
      s += inv_n * (1.0 / r + b(i) * b(i) / (r * r));
    }
    return s;
  };
  auto f_n_prime = [&](double g) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = g - d(i);
      s -= inv_n * (1.0 / (r * r) + 2.0 * b(i) * b(i) / (r * r * r));
    }
    return s;
  };
  auto objective = [&](double g) {
    double quad = 0.0, logdet = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = g - d(i);
      quad += b(i) * b(i) / r;
      logdet += std::log(r);
    }
    return g * alpha + inv_n * quad - inv_n * logdet - (1.0 + std::log(alpha));
  };

  Rank1Exponent out;
  out.a = a;
  out.b = b;
  out.d = d;
  out.epsilon = eps;
  const double lo = edge + eps;
  if (f_n(lo) <= alpha) {
    // no interior root: derivative alpha - F_n >= 0 throughout, minimum at
    // the boundary with nonnegative derivative
    out.gamma_opt = lo;
    out.value = objective(lo);
    out.derivative_at_opt = alpha - f_n(lo);
    out.boundary_active = true;
    return out;
  }
  double hi = edge + 1.0 / alpha + d.cwiseAbs().maxCoeff() + 1.0;
  int guard = 0;
  while (f_n(hi) >= alpha) {
    hi = edge + 2.0 * (hi - edge);
    if (++guard > 200) throw DomainError("hciz_rank1: failed to bracket F_n = alpha");
  }
  double blo = lo, bhi = hi;
  for (int it = 0; it < 200 && (bhi - blo) > 1e-12 * (1.0 + std::abs(blo)); ++it) {
    const double mid = 0.5 * (blo + bhi);
    if (f_n(mid) > alpha)
      blo = mid;
    else
      bhi = mid;
  }
  double g = 0.5 * (blo + bhi);
  for (int it = 0; it < 5; ++it) {
    double gn = g - (f_n(g) - alpha) / f_n_prime(g);
    if (!(gn > lo)) gn = 0.5 * (g + lo);
    g = gn;
  }
  out.gamma_opt = g;
  out.value = objective(g);
  out.derivative_at_opt = alpha - f_n(g);
  if (!(-f_n_prime(g) >= 0.0))
    throw std::logic_error("hciz_rank1: objective is not convex at the optimizer");
  return out;
}

// Haar Monte Carlo of (2/n) log E[exp(b^T O a + a^T O^T D O a / 2)]:
// Oa is uniform on the sphere of radius ||a||, so each draw needs only a
// normalized Gaussian vector.
inline double hciz_rank1_mc(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& d, long draws, Rng& rng) {
  const int n = static_cast<int>(a.size());
  const double norm_a = a.norm();
  detail::LseAccumulator acc;
  Eigen::VectorXd g(n);
  for (long k = 0; k < draws; ++k) {
    for (int i = 0; i < n; ++i) g(i) = rng.gaussian();
    g *= norm_a / g.norm();
    double e = 0.0;
    for (int i = 0; i < n; ++i) e += b(i) * g(i) + 0.5 * d(i) * g(i) * g(i);
    acc.add(e);
  }
  return 2.0 / static_cast<double>(n) *
         (acc.log_sum() - std::log(static_cast<double>(draws)));
}

struct Rank2Exponent {
  double gamma_opt = 0.0, nu_opt = 0.0, rho_opt = 0.0;
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  bool boundary_active = false;
  // damped-Newton iterate trace: (gamma, nu, rho, objective) per step
  std::vector<std::array<double, 4>> trace;
};

// Rank-2 exponent: minimize over Lambda >= (d_{n,+}+eps) I
//   Tr(Lambda M) + n^-1 sum_i s_i^T (Lambda - d_i I)^-1 s_i
//   - n^-1 sum_i log det(Lambda - d_i I) - 2 - log det M,
// with M the Gram of (a, c)/n and s_i the rows of (b, d_vec).
inline Rank2Exponent hciz_rank2(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& c_vec, const Eigen::VectorXd& d_vec,
                                const Eigen::VectorXd& d_eigs, double eps) {
  const int n = static_cast<int>(a.size());
  if (b.size() != n || c_vec.size() != n || d_vec.size() != n || d_eigs.size() != n)
    throw DomainError("hciz_rank2: inconsistent vector lengths");
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::Matrix2d m;
  m << a.squaredNorm() * inv_n, a.dot(c_vec) * inv_n, a.dot(c_vec) * inv_n,
      c_vec.squaredNorm() * inv_n;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> em(m);
  if (!(em.eigenvalues()(0) > 1e-12 * (1.0 + em.eigenvalues()(1))))
    throw SingularGramError("hciz_rank2: Gram of (a, c) is singular");
  const double logdet_m = std::log(em.eigenvalues()(0)) + std::log(em.eigenvalues()(1));
  const double edge = d_eigs.maxCoeff() + eps;

  auto objective = [&](double g, double nu, double rho) {
    double acc = g * m(0, 0) + rho * m(1, 1) + 2.0 * nu * m(0, 1) - 2.0 - logdet_m;
    for (int i = 0; i < n; ++i) {
      const double p = g - d_eigs(i), r = rho - d_eigs(i);
      const double det = p * r - nu * nu;
      const double q = (b(i) * b(i) * r - 2.0 * b(i) * d_vec(i) * nu + d_vec(i) * d_vec(i) * p) / det;
      acc += inv_n * (q - std::log(det));
    }
    return acc;
  };
  auto grad_hess = [&](double g, double nu, double rho, Eigen::Vector3d& grad,
                       Eigen::Matrix3d& hess) {
    Eigen::Matrix2d gm = Eigen::Matrix2d::Zero();  // sum of resolvents and s-quadratics
    hess = Eigen::Matrix3d::Zero();
    const Eigen::Matrix2d e_g = (Eigen::Matrix2d() << 1, 0, 0, 0).finished();
    const Eigen::Matrix2d e_nu = (Eigen::Matrix2d() << 0, 1, 1, 0).finished();
    const Eigen::Matrix2d e_rho = (Eigen::Matrix2d() << 0, 0, 0, 1).finished();
    const Eigen::Matrix2d basis[3] = {e_g, e_nu, e_rho};
    for (int i = 0; i < n; ++i) {
      Eigen::Matrix2d mm;
      mm << g - d_eigs(i), nu, nu, rho - d_eigs(i);
      const Eigen::Matrix2d w = mm.inverse();
      const Eigen::Vector2d s(b(i), d_vec(i));
      const Eigen::Vector2d ws = w * s;
      gm += inv_n * (w + ws * ws.transpose());
      hess += inv_n * detail::logdet_hessian_term(w);
      for (int pq = 0; pq < 3; ++pq)
        for (int rs = pq; rs < 3; ++rs) {
          const double vv = ws.dot(basis[rs] * w * basis[pq] * ws) +
                            ws.dot(basis[pq] * w * basis[rs] * ws);
          hess(pq, rs) += inv_n * vv;
          if (rs != pq) hess(rs, pq) += inv_n * vv;
        }
    }
    const Eigen::Matrix2d gmat = m - gm;
    grad = Eigen::Vector3d(gmat(0, 0), 2.0 * gmat(0, 1), gmat(1, 1));
  };

  double g = edge + 1.0 / em.eigenvalues()(0) + d_eigs.cwiseAbs().maxCoeff() + 1.0;
  double nu = 0.0, rho = g;
  double fcur = objective(g, nu, rho);
  Eigen::Vector3d grad;
  Eigen::Matrix3d hess;
  grad_hess(g, nu, rho, grad, hess);
  Rank2Exponent out;
  out.trace.push_back({g, nu, rho, fcur});
  bool stalled = false;
  for (int it = 0; it < 200 && grad.norm() > 1e-10; ++it) {
    Eigen::Vector3d step = hess.ldlt().solve(-grad);
    if (!step.allFinite()) step = -grad;
    double tstep = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, tstep *= 0.5) {
      const double gn = g + tstep * step(0), nun = nu + tstep * step(1),
                   rhon = rho + tstep * step(2);
      if (detail::lambda_min_2x2(gn, nun, rhon) < edge) continue;
      const double fn = objective(gn, nun, rhon);
      if (fn <= fcur + 1e-14 * (1.0 + std::abs(fcur))) {
        g = gn;
        nu = nun;
        rho = rhon;
        fcur = fn;
        moved = true;
        break;
      }
    }
    if (!moved) {
      stalled = true;
      break;
    }
    grad_hess(g, nu, rho, grad, hess);
    out.trace.push_back({g, nu, rho, fcur});
  }
  // certified convexity: the Hessian must stay positive definite at the
  // returned optimizer
  if (hess.ldlt().isNegative() || !(hess(0, 0) > 0.0))
    throw std::logic_error("hciz_rank2: objective is not convex at the optimizer");
  out.gamma_opt = g;
  out.nu_opt = nu;
  out.rho_opt = rho;
  out.value = fcur;
  out.gradient = grad;
  out.boundary_active =
      detail::lambda_min_2x2(g, nu, rho) - edge < 1e-8 * (1.0 + std::abs(edge));
  if (stalled && grad.norm() > 1e-6 && !out.boundary_active)
    throw BarrierStallError("hciz_rank2: line search stalled before convergence", g, nu, rho);
  return out;
}

// ---- stationary points of the first/second-moment objectives ----

namespace detail {

struct MatrixSqrtPair {
  Eigen::MatrixXd sqrt;
  Eigen::MatrixXd inv_sqrt;  // pseudo-inverse on the numerically null space
  double rank_tol = 0.0;
};

// Symmetric square root with eigenvalue clamping. The state-evolution Gram
// matrices become numerically rank-deficient once the recursion has
// converged, so the inverse root is a pseudo-inverse.
inline MatrixSqrtPair matrix_sqrt_pair(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd& vals = es.eigenvalues();
  const double vmax = vals(vals.size() - 1);
  if (!(vmax > 0.0)) throw DomainError("matrix_sqrt_pair: matrix is not positive");
  const double tol = 1e-13 * vmax;
  Eigen::VectorXd rt(vals.size()), irt(vals.size());
  for (int i = 0; i < vals.size(); ++i) {
    const double v = std::max(vals(i), 0.0);
    rt(i) = std::sqrt(v);
    irt(i) = (vals(i) > tol) ? 1.0 / std::sqrt(vals(i)) : 0.0;
  }
  MatrixSqrtPair out;
  out.sqrt = es.eigenvectors() * rt.asDiagonal() * es.eigenvectors().transpose();
  out.inv_sqrt = es.eigenvectors() * irt.asDiagonal() * es.eigenvectors().transpose();
  out.rank_tol = tol;
  return out;
}

// E[H tanh(H + s G)] and friends by field x Gauss-Hermite quadrature
inline double expect_h_tanh(const FieldLaw& field, double s, int order = 80) {
  const QuadratureRule& gh = gauss_hermite(order);
  double acc = 0.0;
  for (const auto& [h, wh] : field.nodes()) {
    double inner = 0.0;
    if (s <= 0.0) {
      inner = std::tanh(h);
    } else {
      for (size_t i = 0; i < gh.nodes.size(); ++i)
        inner += gh.weights[i] * std::tanh(h + s * gh.nodes[i]);
    }
    acc += wh * h * inner;
  }
  return acc;
}

inline double expect_g_tanh(const FieldLaw& field, double s, int order = 80) {
  if (s <= 0.0) return 0.0;
  const QuadratureRule& gh = gauss_hermite(order);
  double acc = 0.0;
  for (const auto& [h, wh] : field.nodes()) {
    double inner = 0.0;
    for (size_t i = 0; i < gh.nodes.size(); ++i)
      inner += gh.weights[i] * gh.nodes[i] * std::tanh(h + s * gh.nodes[i]);
    acc += wh * inner;
  }
  return acc;
}

}  // namespace detail

struct StationaryReport {
  double value = 0.0;
  std::map<std::string, double> gradients;  // scalar magnitudes / vector norms
};

// Evaluates the first-moment objective at its starred point built from the
// solved constants and the state-evolution matrix (which must extend to
// t + 1 so the cross column delta_t is available). The log-cosh expectation
// collapses to one Gaussian dimension at this point.
inline StationaryReport phi1_stationary(const ModelSpec& model, const RSConstants& c,
                                        const SEState& se, int t) {
  if (t < 1) throw DomainError("phi1_stationary: t must be >= 1");
  if (se.t() < t + 1) throw DomainError("phi1_stationary: state evolution must reach t+1");
  if (!(c.delta_star > 0.0))
    throw DomainError("phi1_stationary: degenerate model (delta* = 0)");
  const SpectralLaw scaled = model.scaled_spectral();
  const double q = c.q_star;
  const double rk = std::sqrt(c.kappa_star);

  const Eigen::MatrixXd delta_t = se.delta.topLeftCorner(t, t);
  const auto pair = detail::matrix_sqrt_pair(delta_t);
  Eigen::VectorXd e_t = Eigen::VectorXd::Zero(t);
  e_t(t - 1) = 1.0;

  const Eigen::VectorXd v_star = (1.0 - q) * (pair.sqrt * e_t);
  const Eigen::VectorXd w_star = rk * v_star;
  const Eigen::VectorXd w_cap = rk * (pair.sqrt * e_t);  // W*
  const double u_star = detail::expect_h_tanh(model.field, std::sqrt(c.sigma_star_sq));
  const double gamma_star = scaled.cauchy_inverse(1.0 - q);

  const double delta_tt = se.delta(t - 1, t - 1);
  const double sigma_t = std::sqrt(std::max(c.kappa_star * delta_tt, 0.0));
  const double alpha = 1.0 - v_star.squaredNorm() - w_star.squaredNorm();
  if (!(alpha > 0.0)) throw DomainError("phi1_stationary: ||v||^2 + ||w||^2 >= 1");

  const Eigen::VectorXd resid = v_star - w_star / rk;  // exactly ~0
  const double f_gamma = f_func(gamma_star, model, c);

  StationaryReport rep;
  rep.value = detail::expect_log_2cosh(model.field, sigma_t) - u_star * 1.0 + u_star -
              w_star.dot(w_cap) + c.a_star / rk * v_star.dot(w_star) +
              0.5 * (c.lambda_star - c.a_star / c.kappa_star) * w_star.squaredNorm() +
              0.5 * f_gamma * resid.squaredNorm() + 0.5 * h_func(gamma_star, alpha, scaled);

  const double d_alpha_h = gamma_star - 1.0 / alpha;
  rep.gradients["u"] = 0.0;  // -U* + 1 with U* = 1
  rep.gradients["v"] =
      (c.a_star / rk * w_star + f_gamma * resid - d_alpha_h * v_star).norm();
  rep.gradients["w"] = (-w_cap + c.a_star / rk * v_star +
                        (c.lambda_star - c.a_star / c.kappa_star) * w_star -
                        f_gamma / rk * resid - d_alpha_h * w_star)
                           .norm();
  rep.gradients["gamma"] = std::abs(
      0.5 * (f_func_prime(gamma_star, model, c) * resid.squaredNorm() +
             h_grad_gamma(gamma_star, alpha, scaled)));
  rep.gradients["U"] =
      std::abs(detail::expect_h_tanh(model.field, sigma_t) - u_star);
  // E[(Y_1..Y_t) tanh(H+Y_t)] = (Delta e_t / delta_tt) E[Y_t tanh(H+Y_t)],
  // and Delta^{-1/2} Delta e_t = Delta^{1/2} e_t, so no inverse is needed.
  const double ey_tanh = sigma_t * detail::expect_g_tanh(model.field, sigma_t);
  rep.gradients["W"] =
      std::abs(ey_tanh / (rk * delta_tt) - rk * (1.0 - q)) * (pair.sqrt * e_t).norm();
  // delta_t - Delta_t e_t = (delta_{t,t+1} - delta_tt) e_t exactly in the
  // stored recursion (earlier entries of both columns coincide).
  const Eigen::VectorXd delta_cross = se.delta.block(0, t, t, 1);
  const Eigen::VectorXd cross_resid = delta_cross - delta_t.col(t - 1);
  rep.gradients["V"] = (1.0 - q) * (pair.inv_sqrt * cross_resid).norm();
  return rep;
}

// Second-moment analogue at the doubled starred point (p* = q*, nu* = 0,
// P* = 0); the four-argument log-sum collapses into two independent
// log-cosh terms there.
inline StationaryReport phi2_stationary(const ModelSpec& model, const RSConstants& c,
                                        const SEState& se, int t) {
  StationaryReport base = phi1_stationary(model, c, se, t);
  const SpectralLaw scaled = model.scaled_spectral();
  const double q = c.q_star;
  const double rk = std::sqrt(c.kappa_star);

  const Eigen::MatrixXd delta_t = se.delta.topLeftCorner(t, t);
  const auto pair = detail::matrix_sqrt_pair(delta_t);
  Eigen::VectorXd e_t = Eigen::VectorXd::Zero(t);
  e_t(t - 1) = 1.0;
  const Eigen::VectorXd v_star = (1.0 - q) * (pair.sqrt * e_t);
  const Eigen::VectorXd w_star = rk * v_star;

  const double alpha = 1.0 - v_star.squaredNorm() - w_star.squaredNorm();
  const double b_star = q - v_star.squaredNorm() - w_star.squaredNorm();
  const double gamma_star = scaled.cauchy_inverse(1.0 - q);
  const double delta_tt = se.delta(t - 1, t - 1);
  const double sigma_t = std::sqrt(std::max(c.kappa_star * delta_tt, 0.0));

  StationaryReport rep;
  // value: both halves coincide; the coupled H-term differs from twice the
  // scalar H by the off-diagonal log det correction
  const double h_pair = gamma_star * alpha + gamma_star * alpha -
                        2.0 * scaled.log_potential(gamma_star) - 2.0 -
                        std::log(alpha * alpha - b_star * b_star);
  rep.value = 2.0 * (base.value - 0.5 * h_func(gamma_star, alpha, scaled)) + 0.5 * h_pair;

  for (const auto& [k, v] : base.gradients) {
    rep.gradients[k] = v;
  }
  rep.gradients["k"] = base.gradients["u"];
  rep.gradients["l"] = base.gradients["v"];
  rep.gradients["m"] = base.gradients["w"];
  rep.gradients["rho"] = base.gradients["gamma"];
  rep.gradients["K"] = base.gradients["U"];
  rep.gradients["M"] = base.gradients["W"];
  rep.gradients["L"] = base.gradients["V"];
  rep.gradients["p"] = std::abs(b_star / (alpha * alpha - b_star * b_star));
  rep.gradients["nu"] = std::abs(b_star);
  rep.gradients["P"] =
      std::abs(detail::expect_tanh_sq(model.field, sigma_t) - q);
  return rep;
}

// ---- general-point evaluation of the first-moment objective ----
// (Monte Carlo over the joint state-evolution law, common random numbers)

struct Phi1Point {
  double u = 0.0;
  Eigen::VectorXd v, w;
  double gamma = 0.0;
  double u_cap = 0.0;  // U
  Eigen::VectorXd v_cap, w_cap;
};

struct PhiSamples {
  Eigen::VectorXd h;   // m
  Eigen::MatrixXd x;   // m x t
  Eigen::MatrixXd y;   // m x t
};

inline PhiSamples draw_phi_samples(const ModelSpec& model, const RSConstants& c,
                                   const Eigen::MatrixXd& delta_t, long m, Rng& rng) {
  const int t = static_cast<int>(delta_t.rows());
  const auto pair = detail::matrix_sqrt_pair((c.kappa_star * delta_t).eval());
  PhiSamples s;
  s.h.resize(m);
  s.x.resize(m, t);
  s.y.resize(m, t);
  const double sigma0 = std::sqrt(std::max(c.sigma_star_sq, 0.0));
  Eigen::VectorXd z(t);
  for (long j = 0; j < m; ++j) {
    s.h(j) = model.field.sample(rng);
    const double y0 = sigma0 * rng.gaussian();
    for (int i = 0; i < t; ++i) z(i) = rng.gaussian();
    const Eigen::VectorXd yrow = pair.sqrt * z;
    s.y.row(j) = yrow.transpose();
    s.x(j, 0) = amp_nonlinearity(s.h(j), y0, c.q_star);
    for (int i = 1; i < t; ++i) s.x(j, i) = amp_nonlinearity(s.h(j), yrow(i - 1), c.q_star);
  }
  return s;
}

inline double phi1_value(const Phi1Point& p, const ModelSpec& model, const RSConstants& c,
                         const Eigen::MatrixXd& delta_t, const PhiSamples& samples) {
  const SpectralLaw scaled = model.scaled_spectral();
  const double alpha = 1.0 - p.v.squaredNorm() - p.w.squaredNorm();
  if (!(alpha > 0.0)) throw DomainError("phi1_value: ||v||^2 + ||w||^2 must be < 1");
  const auto pair = detail::matrix_sqrt_pair(delta_t);
  const double rk = std::sqrt(c.kappa_star);
  const Eigen::VectorXd proj_x = pair.inv_sqrt * p.v_cap;
  const Eigen::VectorXd proj_y = pair.inv_sqrt * p.w_cap / rk;
  const long m = samples.h.size();
  double acc = 0.0;
  for (long j = 0; j < m; ++j)
    acc += log_2cosh(p.u_cap * samples.h(j) + samples.x.row(j).dot(proj_x) +
                     samples.y.row(j).dot(proj_y));
  acc /= static_cast<double>(m);
  const Eigen::VectorXd resid = p.v - p.w / rk;
  return acc - p.u * p.u_cap - p.v.dot(p.v_cap) - p.w.dot(p.w_cap) + p.u +
         c.a_star / rk * p.v.dot(p.w) +
         0.5 * (c.lambda_star - c.a_star / c.kappa_star) * p.w.squaredNorm() +
         0.5 * f_func(p.gamma, model, c) * resid.squaredNorm() +
         0.5 * h_func(p.gamma, alpha, scaled);
}

// Analytic gradient of the sampled objective in the flattened order
// (u, v, w, gamma, U, V, W).
inline Eigen::VectorXd phi1_grad(const Phi1Point& p, const ModelSpec& model,
                                 const RSConstants& c, const Eigen::MatrixXd& delta_t,
                                 const PhiSamples& samples) {
  const SpectralLaw scaled = model.scaled_spectral();
  const int t = static_cast<int>(delta_t.rows());
  const double alpha = 1.0 - p.v.squaredNorm() - p.w.squaredNorm();
  const auto pair = detail::matrix_sqrt_pair(delta_t);
  const double rk = std::sqrt(c.kappa_star);
  const Eigen::VectorXd proj_x = pair.inv_sqrt * p.v_cap;
  const Eigen::VectorXd proj_y = pair.inv_sqrt * p.w_cap / rk;
  const long m = samples.h.size();
  double mean_h_tanh = 0.0;
  Eigen::VectorXd mean_x_tanh = Eigen::VectorXd::Zero(t);
  Eigen::VectorXd mean_y_tanh = Eigen::VectorXd::Zero(t);
  for (long j = 0; j < m; ++j) {
    const double arg = p.u_cap * samples.h(j) + samples.x.row(j).dot(proj_x) +
                       samples.y.row(j).dot(proj_y);
    const double th = std::tanh(arg);
    mean_h_tanh += samples.h(j) * th;
    mean_x_tanh += samples.x.row(j).transpose() * th;
    mean_y_tanh += samples.y.row(j).transpose() * th;
  }
  mean_h_tanh /= static_cast<double>(m);
  mean_x_tanh /= static_cast<double>(m);
  mean_y_tanh /= static_cast<double>(m);

  const Eigen::VectorXd resid = p.v - p.w / rk;
  const double fg = f_func(p.gamma, model, c);
  const double dah = h_grad_alpha(p.gamma, alpha, scaled);

  Eigen::VectorXd grad(1 + t + t + 1 + 1 + t + t);
  int o = 0;
  grad(o++) = -p.u_cap + 1.0;
  grad.segment(o, t) = -p.v_cap + c.a_star / rk * p.w + fg * resid - dah * p.v;
  o += t;
  grad.segment(o, t) = -p.w_cap + c.a_star / rk * p.v +
                       (c.lambda_star - c.a_star / c.kappa_star) * p.w - fg / rk * resid -
                       dah * p.w;
  o += t;
  grad(o++) = 0.5 * (f_func_prime(p.gamma, model, c) * resid.squaredNorm() +
                     h_grad_gamma(p.gamma, alpha, scaled));
  grad(o++) = mean_h_tanh - p.u;
  grad.segment(o, t) = pair.inv_sqrt * mean_x_tanh - p.v;
  o += t;
  grad.segment(o, t) = pair.inv_sqrt * mean_y_tanh / rk - p.w;
  return grad;
}

// Stable multivariate log-cosh analogue
// L(x,y,z) = log(e^{x+y+z} + e^{x-y-z} + e^{-x+y-z} + e^{-x-y+z}).
inline double log_sum_4(double x, double y, double z) {
  const double e1 = x + y + z, e2 = x - y - z, e3 = -x + y - z, e4 = -x - y + z;
  const double m = std::max(std::max(e1, e2), std::max(e3, e4));
  return m + std::log(std::exp(e1 - m) + std::exp(e2 - m) + std::exp(e3 - m) +
                      std::exp(e4 - m));
}

struct GradCheckReport {
  double max_rel_err = 0.0;      // at the best step size
  bool richardson_consistent = false;
  std::vector<double> step_errors;
};

// Central finite differences at three step sizes against the analytic
// gradient; consistency means errors shrink (or sit at the noise floor)
// as the step decreases.
inline GradCheckReport gradcheck(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const Eigen::VectorXd& analytic) {
  const std::vector<double> steps = {1e-3, 1e-4, 1e-5};
  GradCheckReport rep;
  double best = std::numeric_limits<double>::infinity();
  for (double h : steps) {
    double worst = 0.0;
    for (int i = 0; i < x0.size(); ++i) {
      Eigen::VectorXd xp = x0, xm = x0;
      xp(i) += h;
      xm(i) -= h;
      const double fd = (f(xp) - f(xm)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - analytic(i)) / (1.0 + std::abs(analytic(i))));
    }
    rep.step_errors.push_back(worst);
    best = std::min(best, worst);
  }
  rep.max_rel_err = best;
  rep.richardson_consistent =
      rep.step_errors[1] <= rep.step_errors[0] * 4.0 + 1e-12 ||
      rep.step_errors[1] <= 1e-7;
  return rep;
}

}  // namespace oisg
