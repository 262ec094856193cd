#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "oisg/errors.hpp"

namespace oisg {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are
// mu0 * (first eigenvector component)^2.
inline QuadratureRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    jacobi(i, i + 1) = offdiag[static_cast<size_t>(i)];
    jacobi(i + 1, i) = offdiag[static_cast<size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(static_cast<size_t>(n));
  rule.weights.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    rule.nodes[static_cast<size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[static_cast<size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

template <typename Maker>
inline const QuadratureRule& cached_rule(std::map<int, QuadratureRule>& cache,
                                         std::mutex& mtx, int order, Maker make) {
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make(order)).first;
  return it->second;
}

}  // namespace detail

// Rule for E[f(G)] with G ~ N(0,1): probabilists' Hermite, weights sum to 1.
inline const QuadratureRule& gauss_hermite(int order) {
  if (order < 1) throw DomainError("gauss_hermite: order must be >= 1");
  if (order > 200) throw QuadratureOverflowError("gauss_hermite: order > 200");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  return detail::cached_rule(cache, mtx, order, [](int n) {
    std::vector<double> off(static_cast<size_t>(n - 1));
    for (int i = 1; i < n; ++i) off[static_cast<size_t>(i - 1)] = std::sqrt(static_cast<double>(i));
    return detail::golub_welsch(off, 1.0);
  });
}

// Rule for int_{-1}^{1} f(x) dx: Gauss-Legendre, weights sum to 2.
inline const QuadratureRule& gauss_legendre(int order) {
  if (order < 1) throw DomainError("gauss_legendre: order must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  return detail::cached_rule(cache, mtx, order, [](int n) {
    std::vector<double> off(static_cast<size_t>(n - 1));
    for (int i = 1; i < n; ++i) {
      const double ii = static_cast<double>(i);
      off[static_cast<size_t>(i - 1)] = ii / std::sqrt(4.0 * ii * ii - 1.0);
    }
    return detail::golub_welsch(off, 2.0);
  });
}

template <typename F>
inline double integrate_gl(F&& f, double a, double b, int order) {
  const QuadratureRule& rule = gauss_legendre(order);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double sum = 0.0;
  for (size_t i = 0; i < rule.nodes.size(); ++i)
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

namespace detail {
template <typename F>
inline double integrate_adaptive_impl(F& f, double a, double b, double whole, double tol,
                                      int depth) {
  const double mid = 0.5 * (a + b);
  const double left = integrate_gl(f, a, mid, 20);
  const double right = integrate_gl(f, mid, b, 20);
  if (depth <= 0 || std::abs(left + right - whole) <= tol)
    return left + right;
  return integrate_adaptive_impl(f, a, mid, left, 0.5 * tol, depth - 1) +
         integrate_adaptive_impl(f, mid, b, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// Adaptive Gauss-Legendre by interval halving; tol is absolute.
template <typename F>
inline double integrate_adaptive(F&& f, double a, double b, double tol = 1e-12) {
  if (a == b) return 0.0;
  const double whole = integrate_gl(f, a, b, 20);
  return detail::integrate_adaptive_impl(f, a, b, whole, tol, 40);
}

}  // namespace oisg
