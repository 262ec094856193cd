#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>

#include "oisg/errors.hpp"
#include "oisg/rng.hpp"
#include "oisg/rs_core.hpp"
#include "oisg/state_evolution.hpp"

namespace oisg {

// Haar-orthogonal factor O, kept as the Householder QR of a Gaussian matrix
// with the R-diagonal signs absorbed (O = Q * diag(sign(R_ii))). Products
// with vectors use the implicit reflector form; a dense copy is materialized
// only on request for small n.
class Orthogonal {
 public:
  Orthogonal(Eigen::HouseholderQR<Eigen::MatrixXd> qr, Eigen::VectorXd signs)
      : qr_(std::move(qr)), signs_(std::move(signs)), n_(static_cast<int>(signs_.size())) {}

  int n() const { return n_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v = signs_.cwiseProduct(x);
    return qr_.householderQ() * v;
  }

  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v = qr_.householderQ().transpose() * x;
    return signs_.cwiseProduct(v);
  }

  const Eigen::MatrixXd& dense() const {
    if (!dense_) {
      if (n_ > 2000) throw TooLargeError("Orthogonal::dense: only materialized for n <= 2000");
      auto m = std::make_shared<Eigen::MatrixXd>(qr_.householderQ() *
                                                 Eigen::MatrixXd::Identity(n_, n_));
      for (int j = 0; j < n_; ++j) m->col(j) *= signs_(j);
      dense_ = std::move(m);
    }
    return *dense_;
  }

 private:
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::VectorXd signs_;
  int n_;
  mutable std::shared_ptr<Eigen::MatrixXd> dense_;
};

inline Orthogonal sample_haar(int n, Rng& rng) {
  if (n < 1) throw DomainError("sample_haar: n must be >= 1");
  Eigen::MatrixXd a(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(std::move(a));
  Eigen::VectorXd signs(n);
  for (int i = 0; i < n; ++i) {
    const double r = qr.matrixQR()(i, i);
    signs(i) = (r >= 0.0) ? 1.0 : -1.0;
  }
  return Orthogonal(std::move(qr), std::move(signs));
}

enum class Placement { iid, quantile };

// One finite-n realization: eigenvalues of D (unscaled), Haar factor, field.
struct CouplingSample {
  int n;
  Eigen::VectorXd d;
  Orthogonal o;
  Eigen::VectorXd h;
  std::uint64_t seed;
  Placement placement;
};

inline CouplingSample sample_model(const ModelSpec& model, int n, std::uint64_t seed,
                                   Placement placement = Placement::quantile) {
  if (n < 2) throw DomainError("sample_model: n must be >= 2");
  Eigen::VectorXd d(n), h(n);
  if (placement == Placement::quantile) {
    for (int i = 0; i < n; ++i) {
      const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      d(i) = model.spectral.quantile(p);
      h(i) = model.field.quantile(p);
    }
  } else {
    Rng rd = Rng::stream(seed, stream_tag::eigenvalues);
    Rng rh = Rng::stream(seed, stream_tag::field);
    for (int i = 0; i < n; ++i) d(i) = model.spectral.sample(rd);
    for (int i = 0; i < n; ++i) h(i) = model.field.sample(rh);
  }
  Rng rm = Rng::stream(seed, stream_tag::matrix);
  return CouplingSample{n, std::move(d), sample_haar(n, rm), std::move(h), seed, placement};
}

// Memory-free AMP iterates plus their normalized Gram matrices.
struct AMPTrace {
  Eigen::MatrixXd x;        // n x T, column t-1 holds x^t
  Eigen::MatrixXd y;        // n x (T+1), column t holds y^t (col 0 = y^0)
  Eigen::MatrixXd s;        // n x T
  Eigen::MatrixXd gram_xx;  // T x T, (1/n) <x^s, x^t>
  Eigen::MatrixXd gram_yy;  // over y^1..y^T
  Eigen::MatrixXd gram_xy;
  bool degenerate = false;
};

struct AmpOptions {
  std::optional<Eigen::VectorXd> initial_y;  // overrides the N(0, sigma*^2) init
};

// x^t = (1-q*)^-1 tanh(h + y^{t-1}) - y^{t-1};  s^t = O x^t;
// y^t = O^T Lambda s^t with Lambda_ii = (1-q*)^-1 (lambda* - beta d_i)^-1 - 1.
// The couplings matrix is never formed; everything goes through O and the
// diagonal.
inline AMPTrace run_amp(const CouplingSample& sample, const ModelSpec& model,
                        const RSConstants& c, int T, Rng& rng, const AmpOptions& opts = {}) {
  if (T < 1) throw DomainError("run_amp: T must be >= 1");
  const int n = sample.n;
  const double q = c.q_star;
  Eigen::VectorXd lambda_diag(n);
  for (int i = 0; i < n; ++i)
    lambda_diag(i) = 1.0 / ((1.0 - q) * (c.lambda_star - model.beta * sample.d(i))) - 1.0;

  AMPTrace tr;
  tr.x.resize(n, T);
  tr.y.resize(n, T + 1);
  tr.s.resize(n, T);
  tr.degenerate = (c.sigma_star_sq == 0.0) && model.field.is_zero();

  const double sigma = std::sqrt(std::max(c.sigma_star_sq, 0.0));
  if (opts.initial_y) {
    if (opts.initial_y->size() != n) throw DomainError("run_amp: initial_y has wrong length");
    tr.y.col(0) = *opts.initial_y;
  } else {
    for (int i = 0; i < n; ++i) tr.y(i, 0) = sigma * rng.gaussian();
  }

  for (int t = 1; t <= T; ++t) {
    const auto yprev = tr.y.col(t - 1);
    for (int i = 0; i < n; ++i)
      tr.x(i, t - 1) = amp_nonlinearity(sample.h(i), yprev(i), q);
    tr.s.col(t - 1) = sample.o.apply(tr.x.col(t - 1));
    tr.y.col(t) = sample.o.apply_transpose(lambda_diag.cwiseProduct(tr.s.col(t - 1)).eval());
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  const auto y_tail = tr.y.rightCols(T);
  tr.gram_xx = inv_n * tr.x.transpose() * tr.x;
  tr.gram_yy = inv_n * y_tail.transpose() * y_tail;
  tr.gram_xy = inv_n * tr.x.transpose() * y_tail;
  return tr;
}

// n^{-1/2} || m - tanh(h + Jbar m - Rbar(1-q*) m) || at m = tanh(h + y^{T-1})
inline double tap_residual(const AMPTrace& trace, const CouplingSample& sample,
                           const ModelSpec& model, const RSConstants& c) {
  const int T = static_cast<int>(trace.x.cols());
  if (T < 2) throw DomainError("tap_residual: trace needs T >= 2");
  const int n = sample.n;
  Eigen::VectorXd m(n);
  for (int i = 0; i < n; ++i) m(i) = std::tanh(sample.h(i) + trace.y(i, T - 1));
  Eigen::VectorXd om = sample.o.apply(m);
  for (int i = 0; i < n; ++i) om(i) *= model.beta * sample.d(i);
  const Eigen::VectorXd jm = sample.o.apply_transpose(om);
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = m(i) - std::tanh(sample.h(i) + jm(i) - c.a_star * m(i));
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(n));
}

// Deviation matrix n^-1 S^T f(Dbar) S - Delta_T * int f dmu_Dbar, with f
// applied entrywise to the scaled sample eigenvalues.
inline Eigen::MatrixXd freeness_check(const AMPTrace& trace, const CouplingSample& sample,
                                      const ModelSpec& model, const Eigen::MatrixXd& delta_se,
                                      const std::function<double(double)>& f) {
  const int T = static_cast<int>(trace.s.cols());
  if (delta_se.rows() < T || delta_se.cols() < T)
    throw DomainError("freeness_check: delta_se smaller than trace horizon");
  const int n = sample.n;
  Eigen::VectorXd fd(n);
  for (int i = 0; i < n; ++i) fd(i) = f(model.beta * sample.d(i));
  const Eigen::MatrixXd lhs =
      (1.0 / static_cast<double>(n)) * trace.s.transpose() * fd.asDiagonal() * trace.s;
  const double integral = model.scaled_spectral().integrate(f);
  return lhs - delta_se.topLeftCorner(T, T) * integral;
}

}  // namespace oisg
