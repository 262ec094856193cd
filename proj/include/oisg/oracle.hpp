#pragma once

#include <Eigen/Dense>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "oisg/ensemble.hpp"
#include "oisg/errors.hpp"
#include "oisg/rs_core.hpp"

namespace oisg {

struct EnumerationResult {
  int n = 0;
  double log_z = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  double max_energy = 0.0;
};

namespace detail {

struct LseAccumulator {
  double m = -std::numeric_limits<double>::infinity();
  double s = 0.0;

  void add(double e) {
    if (e <= m) {
      s += std::exp(e - m);
    } else {
      s = s * std::exp(m - e) + 1.0;
      m = e;
    }
  }

  void merge(const LseAccumulator& other) {
    if (other.s == 0.0) return;
    if (m >= other.m) {
      s += other.s * std::exp(other.m - m);
    } else {
      s = s * std::exp(m - other.m) + other.s;
      m = other.m;
    }
  }

  double log_sum() const { return m + std::log(s); }
};

// One Gray-code sweep over the low n_low spins, with the top spins pinned by
// the bits of `block`. Maintains v = Jbar*sigma so each flip costs O(n).
inline std::pair<LseAccumulator, double> gray_sweep(const Eigen::MatrixXd& jbar,
                                                    const Eigen::VectorXd& h, int n_low,
                                                    std::uint64_t block) {
  const int n = static_cast<int>(h.size());
  Eigen::VectorXd sigma(n);
  for (int i = 0; i < n_low; ++i) sigma(i) = -1.0;
  for (int i = n_low; i < n; ++i) sigma(i) = ((block >> (i - n_low)) & 1u) ? 1.0 : -1.0;
  Eigen::VectorXd v = jbar * sigma;
  double quad = sigma.dot(v);
  double field = h.dot(sigma);

  LseAccumulator acc;
  double max_e = quad / 2.0 + field;
  acc.add(max_e);
  const std::uint64_t steps = 1ull << n_low;
  for (std::uint64_t k = 1; k < steps; ++k) {
    const int i = std::countr_zero(k);
    const double si = sigma(i);
    quad += -4.0 * si * v(i) + 4.0 * jbar(i, i);
    field += -2.0 * si * h(i);
    v.noalias() -= (2.0 * si) * jbar.col(i);
    sigma(i) = -si;
    const double e = quad / 2.0 + field;
    if (e > max_e) max_e = e;
    acc.add(e);
  }
  return {acc, max_e};
}

}  // namespace detail

// Exact log Z = log sum_sigma exp(sigma^T Jbar sigma / 2 + h^T sigma) by
// Gray-code traversal; parallelized by pinning the top spins.
inline EnumerationResult exact_log_z(const CouplingSample& sample, const ModelSpec& model,
                                     int threads = 1) {
  if (sample.n > 24) throw TooLargeError("exact_log_z: n > 24");
  const auto t0 = std::chrono::steady_clock::now();
  const int n = sample.n;
  const Eigen::MatrixXd& o = sample.o.dense();
  const Eigen::MatrixXd jbar =
      model.beta * (o.transpose() * sample.d.asDiagonal() * o);

  // block decomposition is fixed by n alone so the result is bitwise
  // identical for every thread count
  const int k = (n > 8) ? std::min(6, n - 4) : 0;
  const std::uint64_t blocks = 1ull << k;
  std::vector<std::pair<detail::LseAccumulator, double>> parts(blocks);

  auto work = [&](unsigned tid, unsigned stride) {
    for (std::uint64_t b = tid; b < blocks; b += stride)
      parts[b] = detail::gray_sweep(jbar, sample.h, n - k, b);
  };
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    const unsigned nt = static_cast<unsigned>(std::min<std::uint64_t>(threads, blocks));
    pool.reserve(nt);
    for (unsigned t = 0; t < nt; ++t) pool.emplace_back(work, t, nt);
    for (auto& th : pool) th.join();
  }

  detail::LseAccumulator total;
  double max_e = -std::numeric_limits<double>::infinity();
  for (const auto& [acc, me] : parts) {
    total.merge(acc);
    max_e = std::max(max_e, me);
  }

  EnumerationResult res;
  res.n = n;
  res.log_z = total.log_sum();
  res.beta = model.beta;
  res.seed = sample.seed;
  res.max_energy = max_e;
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double slack = 1e-9 * (1.0 + std::abs(res.log_z));
  if (res.log_z < max_e - slack ||
      res.log_z > n * std::log(2.0) + max_e + slack)
    throw std::logic_error("exact_log_z: log Z violates enumeration bounds");
  return res;
}

struct QuenchedResult {
  double mean = 0.0;
  std::optional<double> stderr_of_mean;
  std::vector<double> per_replicate;  // n^-1 log Z values
};

inline QuenchedResult quenched_free_energy(const ModelSpec& model, int n, int replicates,
                                           std::uint64_t seed,
                                           Placement placement = Placement::quantile,
                                           int threads = 1) {
  if (n > 24) throw TooLargeError("quenched_free_energy: n > 24");
  if (replicates < 1) throw DomainError("quenched_free_energy: replicates must be >= 1");
  QuenchedResult out;
  out.per_replicate.reserve(static_cast<size_t>(replicates));
  for (int r = 0; r < replicates; ++r) {
    const std::uint64_t seed_r = Rng::stream(seed, stream_tag::replicate, static_cast<std::uint64_t>(r)).next_u64();
    const CouplingSample sample = sample_model(model, n, seed_r, placement);
    const EnumerationResult er = exact_log_z(sample, model, threads);
    out.per_replicate.push_back(er.log_z / static_cast<double>(n));
  }
  double mean = 0.0;
  for (double v : out.per_replicate) mean += v;
  mean /= static_cast<double>(replicates);
  out.mean = mean;
  if (replicates >= 2) {
    double ss = 0.0;
    for (double v : out.per_replicate) ss += (v - mean) * (v - mean);
    out.stderr_of_mean = std::sqrt(ss / (static_cast<double>(replicates) - 1.0) /
                                   static_cast<double>(replicates));
  }
  return out;
}

// Annealed limit at zero field: log 2 + (1/2) int_0^1 Rbar(z) dz.
inline double annealed_h0(const ModelSpec& model) {
  model.validate();
  if (!model.field.is_zero()) throw DomainError("annealed_h0: field must be PointMass(0)");
  const SpectralLaw scaled = model.scaled_spectral();
  if (!(1.0 < scaled.cauchy_at_edge()))
    throw DomainError("annealed_h0: requires 1 < G(d_+)/beta");
  return std::log(2.0) + 0.5 * scaled.r_integral(1.0);
}

// Deterministic finite-n spherical free energy:
// (1/2) min_gamma { gamma + n^-1 (Oh)^T (gamma I - Dbar)^-1 (Oh)
//                   - n^-1 log det(gamma I - Dbar) - 1 }
// over gamma in [max(beta d_i) + eps, Gamma], Gamma expanded adaptively.
inline double spherical_finite_n(const CouplingSample& sample, const ModelSpec& model) {
  model.validate();
  if (sample.n < 2) throw DomainError("spherical_finite_n: n must be >= 2");
  const int n = sample.n;
  const Eigen::VectorXd w = sample.o.apply(sample.h);
  Eigen::VectorXd dbar = model.beta * sample.d;
  const double edge = dbar.maxCoeff();
  const double inv_n = 1.0 / static_cast<double>(n);

  auto value = [&](double g) {
    double quad = 0.0, logdet = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = g - dbar(i);
      quad += w(i) * w(i) / r;
      logdet += std::log(r);
    }
    return g + inv_n * quad - inv_n * logdet - 1.0;
  };
  auto deriv = [&](double g) {
    double s = 1.0;
    for (int i = 0; i < n; ++i) {
      const double r = g - dbar(i);
      s -= inv_n * (w(i) * w(i) / (r * r) + 1.0 / r);
    }
    return s;
  };
  auto second = [&](double g) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = g - dbar(i);
      s += inv_n * (2.0 * w(i) * w(i) / (r * r * r) + 1.0 / (r * r));
    }
    return s;
  };

  const double eps = 1e-6;
  double lo = edge + eps;
  if (deriv(lo) >= 0.0) return 0.5 * value(lo);  // boundary minimizer
  double hi = edge + 2.0 + model.field.second_moment();
  int guard = 0;
  while (deriv(hi) <= 0.0) {
    hi = edge + 2.0 * (hi - edge);
    if (++guard > 200) throw DomainError("spherical_finite_n: failed to bracket");
  }
  for (int it = 0; it < 100 && (hi - lo) > 1e-13 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deriv(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  double g = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    const double h2 = second(g);
    if (!(h2 > 0.0)) break;
    double gn = g - deriv(g) / h2;
    if (!(gn > edge)) gn = 0.5 * (g + edge);
    g = gn;
  }
  return 0.5 * value(g);
}

}  // namespace oisg
