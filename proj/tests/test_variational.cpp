#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oisg/state_evolution.hpp"
#include "oisg/variational.hpp"

using namespace oisg;

namespace {

struct Setup {
  ModelSpec model;
  RSConstants constants;
  SpectralLaw scaled;
};

Setup make(double beta, SpectralLaw law, FieldLaw field) {
  ModelSpec m{beta, law, field};
  RSConstants c = rs_constants(m);
  return {m, c, m.scaled_spectral()};
}

}  // namespace

TEST_CASE("h_func plugs through on a degenerate law", "[variational]") {
  const SpectralLaw atom0 = SpectralLaw::discrete({0.0}, {1.0});
  CHECK(h_func(2.0, 1.0, atom0) == Catch::Approx(2.0 - std::log(2.0) - 1.0).margin(1e-14));
}

TEST_CASE("h_func is stationary at alpha = G(gamma)", "[variational]") {
  const SpectralLaw law = SpectralLaw::rademacher();
  const double gamma = 1.8;
  CHECK(h_grad_gamma(gamma, law.cauchy(gamma), law) == Catch::Approx(0.0).margin(1e-14));
  // finite-difference confirmation
  const double a = law.cauchy(gamma);
  const double h = 1e-6;
  const double fd = (h_func(gamma + h, a, law) - h_func(gamma - h, a, law)) / (2.0 * h);
  CHECK(fd == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("scalar infimum equals the R integral", "[variational]") {
  auto [m, c, scaled] = make(0.2, SpectralLaw::semicircle(), FieldLaw::point_mass(0.0));
  CHECK(inf_gamma_closed(0.5, SpectralLaw::semicircle()) ==
        Catch::Approx(0.125).margin(1e-10));
  for (double alpha : {0.1, 0.4, 0.8}) {
    const ScalarInfimum num = inf_gamma_numeric(alpha, scaled);
    REQUIRE(std::abs(num.value - scaled.r_integral(alpha)) <= 1e-8);
    REQUIRE(std::abs(num.gamma_opt - (scaled.r_transform(alpha) + 1.0 / alpha)) <= 1e-6);
  }
}

TEST_CASE("matrix infimum equals Tr f(A)", "[variational]") {
  const SpectralLaw law = SpectralLaw::rademacher();
  Eigen::Matrix2d a;
  a << 0.5, 0.12, 0.12, 0.35;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
  const double closed = law.r_integral(es.eigenvalues()(0)) + law.r_integral(es.eigenvalues()(1));
  CHECK(inf_gamma_matrix(a, law) == Catch::Approx(closed).margin(1e-12));
  CHECK(std::abs(inf_gamma_matrix_numeric(a, law).value - closed) <= 1e-6);
  // A = alpha I doubles the scalar value
  const Eigen::Matrix2d iso = 0.4 * Eigen::Matrix2d::Identity();
  CHECK(inf_gamma_matrix(iso, law) == Catch::Approx(2.0 * law.r_integral(0.4)).margin(1e-10));
  // domain guard
  CHECK_THROWS_AS(inf_gamma_matrix((Eigen::Matrix2d() << 1.2, 0, 0, -0.1).finished(),
                                   SpectralLaw::semicircle()),
                  DomainError);
}

TEST_CASE("f_func shape", "[variational]") {
  auto [m, c, scaled] = make(0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3));
  const double edge = scaled.support_max();
  // decreasing in gamma, vanishing at infinity
  double prev = f_func(edge + 0.05, m, c);
  for (double g : {edge + 0.2, edge + 1.0, edge + 5.0, edge + 50.0}) {
    const double cur = f_func(g, m, c);
    REQUIRE(cur < prev);
    REQUIRE(cur >= 0.0);
    prev = cur;
  }
  CHECK(f_func(edge + 1e4, m, c) <= 1e-7);
  // slope is negative wherever sampled
  for (double g : {edge + 0.1, edge + 0.7, edge + 2.0})
    REQUIRE(f_func_prime(g, m, c) < 0.0);
  // block-diagonal reduction at nu = 0
  const Eigen::Matrix2d f2 = f2_func(edge + 0.4, 0.0, edge + 0.9, m, c);
  CHECK(f2(0, 0) == Catch::Approx(f_func(edge + 0.4, m, c)).margin(1e-12));
  CHECK(f2(1, 1) == Catch::Approx(f_func(edge + 0.9, m, c)).margin(1e-12));
  CHECK(f2(0, 1) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("f_func weight scales as beta^4 at small beta", "[variational]") {
  // the integrand prefactor is O(beta^4 (1-q*)^2): ratio between beta = 0.02
  // and beta = 0.04 is about 16
  auto value_at = [](double beta) {
    auto [m, c, scaled] = make(beta, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3));
    double peak = 0.0;
    for (double x : {-beta, 0.0, beta}) {
      const double w = f_weight(x, c);
      peak = std::max(peak, w * w);
    }
    return peak;
  };
  const double ratio = value_at(0.04) / value_at(0.02);
  CHECK(ratio == Catch::Approx(16.0).epsilon(0.3));
}

TEST_CASE("rank-1 exponent ties to the closed infimum as n grows", "[variational]") {
  const double alpha = 0.8;
  auto gap_at = [&](const SpectralLaw& law, int n) {
    Eigen::VectorXd a = Eigen::VectorXd::Constant(n, std::sqrt(alpha));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = law.quantile((i + 0.5) / n);
    return std::abs(hciz_rank1(a, b, d, 1e-4).value - law.r_integral(alpha));
  };
  // two-atom quantiles reproduce the limit law exactly at even n
  CHECK(gap_at(SpectralLaw::rademacher(), 400) <= 1e-9);
  // the semicircle quantile approximation carries a genuine finite-n gap
  const double g400 = gap_at(SpectralLaw::semicircle(), 400);
  const double g1600 = gap_at(SpectralLaw::semicircle(), 1600);
  CHECK(g1600 < g400);
  CHECK(g1600 <= 0.01);
}

TEST_CASE("rank-1 exponent on the zero matrix", "[variational]") {
  const int n = 50;
  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, std::sqrt(0.7));
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Rank1Exponent r = hciz_rank1(a, zero, zero, 1e-6);
  CHECK(r.value == Catch::Approx(0.0).margin(1e-9));
  CHECK(r.gamma_opt == Catch::Approx(1.0 / 0.7).epsilon(1e-8));
  CHECK_FALSE(r.boundary_active);
  CHECK(std::abs(r.derivative_at_opt) <= 1e-8);
}

TEST_CASE("rank-1 infeasible and boundary handling", "[variational]") {
  const int n = 20;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  CHECK_THROWS_AS(hciz_rank1(zero, zero, zero, 1e-3), InfeasibleAlphaError);
  // no interior root once alpha exceeds F_n at the left edge: boundary
  // optimizer with nonnegative slope
  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, std::sqrt(2.0));
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = (i % 2) ? 1.0 : -1.0;
  const Rank1Exponent r = hciz_rank1(a, zero, d, 0.5);
  CHECK(r.boundary_active);
  CHECK(r.gamma_opt == Catch::Approx(1.5));
  CHECK(r.derivative_at_opt >= 0.0);
}

TEST_CASE("rank-1 Monte Carlo smoke", "[variational]") {
  const int n = 60;
  const SpectralLaw law = SpectralLaw::rademacher();
  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, std::sqrt(0.5));
  Eigen::VectorXd b = Eigen::VectorXd::Constant(n, 0.1);
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = law.quantile((i + 0.5) / n);
  const Rank1Exponent r = hciz_rank1(a, b, d, 1e-3);
  Rng rng = Rng::stream(2024, stream_tag::monte_carlo);
  const double mc = hciz_rank1_mc(a, b, d, 200000, rng);
  CHECK(std::abs(mc - r.value) <= 0.2);
}

TEST_CASE("rank-2 decouples on orthogonal inputs", "[variational]") {
  const int n = 300;
  const SpectralLaw law = SpectralLaw::rademacher();
  Eigen::VectorXd d(n), aa = Eigen::VectorXd::Zero(n), cc = Eigen::VectorXd::Zero(n),
                  bb = Eigen::VectorXd::Constant(n, 0.05), zero = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    d(i) = law.quantile((i + 0.5) / n);
    if (i % 2 == 0)
      aa(i) = std::sqrt(1.2);
    else
      cc(i) = std::sqrt(0.6);
  }
  const Rank2Exponent r2 = hciz_rank2(aa, bb, cc, zero, d, 1e-3);
  const double sum = hciz_rank1(aa, bb, d, 1e-3).value + hciz_rank1(cc, zero, d, 1e-3).value;
  CHECK(std::abs(r2.value - sum) <= 1e-8);
  CHECK(std::abs(r2.nu_opt) <= 1e-7);
  CHECK(r2.gradient.norm() <= 1e-6);
}

TEST_CASE("rank-2 ties to the matrix infimum at the model gram", "[variational]") {
  auto [m, c, scaled] = make(0.15, SpectralLaw::semicircle(), FieldLaw::point_mass(0.3));
  const double q = c.q_star;
  auto gap_at = [&](int n) {
    Eigen::VectorXd d(n), aa = Eigen::VectorXd::Zero(n), cc = Eigen::VectorXd::Zero(n),
                    zero = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      d(i) = scaled.quantile((i + 0.5) / n);
      if (i % 2 == 0)
        aa(i) = std::sqrt(2.0 * (1.0 - q));
      else
        cc(i) = std::sqrt(2.0 * (1.0 - q));
    }
    const Rank2Exponent r2 = hciz_rank2(aa, zero, cc, zero, d, 1e-5);
    const double closed = inf_gamma_matrix((1.0 - q) * Eigen::Matrix2d::Identity(), scaled);
    return std::abs(r2.value - closed);
  };
  CHECK(gap_at(1600) < gap_at(200));
  CHECK(gap_at(1600) <= 0.02);
}

TEST_CASE("rank-2 rejects a singular gram", "[variational]") {
  const int n = 40;
  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, 1.0);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  CHECK_THROWS_AS(hciz_rank2(a, d, a, d, d, 1e-3), SingularGramError);
}

TEST_CASE("stationary evaluations hit the RS values", "[variational]") {
  auto [m, c, scaled] = make(0.1, SpectralLaw::rademacher(),
                             FieldLaw::atoms({-0.5, 0.7}, {0.4, 0.6}));
  const SEState se = se_run(m, c, 4);
  for (int t : {1, 2, 3}) {
    const StationaryReport p1 = phi1_stationary(m, c, se, t);
    REQUIRE(std::abs(p1.value - c.psi_rs) <= 1e-9);
    for (const char* key : {"u", "v", "w", "gamma", "U", "W"})
      REQUIRE(p1.gradients.at(key) <= 1e-9);
    const StationaryReport p2 = phi2_stationary(m, c, se, t);
    REQUIRE(std::abs(p2.value - 2.0 * c.psi_rs) <= 1e-8);
    for (const char* key : {"p", "nu", "P", "k", "l", "m", "rho", "K", "M"})
      REQUIRE(p2.gradients.at(key) <= 1e-9);
  }
  CHECK_THROWS_AS(phi1_stationary(m, c, se, 4), DomainError);  // needs t+1 columns
}

TEST_CASE("phi1 gradient matches finite differences under common random numbers",
          "[variational]") {
  auto [m, c, scaled] = make(0.12, SpectralLaw::rademacher(),
                             FieldLaw::atoms({-0.5, 0.7}, {0.4, 0.6}));
  const int t = 2;
  const SEState se = se_run(m, c, t);
  const Eigen::MatrixXd delta_t = se.delta.topLeftCorner(t, t);
  Rng rng = Rng::stream(31, stream_tag::monte_carlo);
  const PhiSamples samples = draw_phi_samples(m, c, delta_t, 20000, rng);

  // a perturbed (interior, non-starred) point
  Phi1Point p;
  p.u = 0.21;
  p.v = (Eigen::VectorXd(t) << 0.12, -0.08).finished();
  p.w = (Eigen::VectorXd(t) << 0.05, 0.11).finished();
  p.gamma = scaled.support_max() + 0.6;
  p.u_cap = 1.1;
  p.v_cap = (Eigen::VectorXd(t) << 0.03, -0.02).finished();
  p.w_cap = (Eigen::VectorXd(t) << 0.07, 0.01).finished();

  auto pack = [&](const Phi1Point& q) {
    Eigen::VectorXd x(3 + 4 * t);
    int o = 0;
    x(o++) = q.u;
    x.segment(o, t) = q.v;
    o += t;
    x.segment(o, t) = q.w;
    o += t;
    x(o++) = q.gamma;
    x(o++) = q.u_cap;
    x.segment(o, t) = q.v_cap;
    o += t;
    x.segment(o, t) = q.w_cap;
    return x;
  };
  auto unpack = [&](const Eigen::VectorXd& x) {
    Phi1Point q;
    int o = 0;
    q.u = x(o++);
    q.v = x.segment(o, t);
    o += t;
    q.w = x.segment(o, t);
    o += t;
    q.gamma = x(o++);
    q.u_cap = x(o++);
    q.v_cap = x.segment(o, t);
    o += t;
    q.w_cap = x.segment(o, t);
    return q;
  };
  auto f = [&](const Eigen::VectorXd& x) {
    return phi1_value(unpack(x), m, c, delta_t, samples);
  };
  const GradCheckReport rep =
      gradcheck(f, pack(p), phi1_grad(p, m, c, delta_t, samples));
  CHECK(rep.max_rel_err <= 1e-5);
  CHECK(rep.richardson_consistent);
}

TEST_CASE("upper-bound specialization is locally concave at the starred point",
          "[variational]") {
  auto [m, c, scaled] = make(0.1, SpectralLaw::rademacher(),
                             FieldLaw::atoms({-0.5, 0.7}, {0.4, 0.6}));
  const int t = 3;
  const SEState se = se_run(m, c, t);
  const Eigen::MatrixXd delta_t = se.delta.topLeftCorner(t, t);
  const auto pair = detail::matrix_sqrt_pair(delta_t);
  Eigen::VectorXd e_t = Eigen::VectorXd::Zero(t);
  e_t(t - 1) = 1.0;
  const double rk = std::sqrt(c.kappa_star);
  const Eigen::VectorXd v_star = (1.0 - c.q_star) * (pair.sqrt * e_t);
  const Eigen::VectorXd w_star = rk * v_star;
  const Eigen::VectorXd w_cap_star = rk * (pair.sqrt * e_t);

  Rng rng = Rng::stream(77, stream_tag::monte_carlo);
  const PhiSamples samples = draw_phi_samples(m, c, delta_t, 40000, rng);

  // gamma(v, w) = Gbar^{-1}(1 - |v|^2 - |w|^2), U = 1,
  // V = sqrt(beta)(v - v*), W = sqrt(beta)(w - w*) + W*
  auto tilde = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
    Phi1Point p;
    p.u = 0.0;
    p.v = v;
    p.w = w;
    p.gamma = scaled.cauchy_inverse(1.0 - v.squaredNorm() - w.squaredNorm());
    p.u_cap = 1.0;
    p.v_cap = std::sqrt(m.beta) * (v - v_star);
    p.w_cap = std::sqrt(m.beta) * (w - w_star) + w_cap_star;
    return phi1_value(p, m, c, delta_t, samples);
  };
  const double base = tilde(v_star, w_star);
  Rng dir(5);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd dv(t), dw(t);
    for (int i = 0; i < t; ++i) {
      dv(i) = dir.gaussian();
      dw(i) = dir.gaussian();
    }
    const double norm = std::sqrt(dv.squaredNorm() + dw.squaredNorm());
    dv *= 0.15 / norm;
    dw *= 0.15 / norm;
    REQUIRE(tilde(v_star + dv, w_star + dw) < base);
    REQUIRE(tilde(v_star - dv, w_star - dw) < base);
  }
}
