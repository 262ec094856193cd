#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oisg/ensemble.hpp"
#include "oisg/state_evolution.hpp"

using namespace oisg;

TEST_CASE("haar factor at n=1 is a fair sign", "[ensemble]") {
  int plus = 0;
  for (int k = 0; k < 200; ++k) {
    Rng rng(1000 + static_cast<std::uint64_t>(k));
    const Orthogonal o = sample_haar(1, rng);
    const double v = o.dense()(0, 0);
    REQUIRE(std::abs(std::abs(v) - 1.0) <= 1e-14);
    if (v > 0) ++plus;
  }
  CHECK(plus > 60);
  CHECK(plus < 140);
}

TEST_CASE("haar factor is orthogonal", "[ensemble]") {
  Rng rng(17);
  const int n = 120;
  const Orthogonal o = sample_haar(n, rng);
  const Eigen::MatrixXd& d = o.dense();
  CHECK((d.transpose() * d - Eigen::MatrixXd::Identity(n, n)).norm() <=
        1e-8 * std::sqrt(static_cast<double>(n)));
  for (int j = 0; j < n; ++j) REQUIRE(d.col(j).norm() == Catch::Approx(1.0).margin(1e-12));
  // implicit products agree with the dense matrix
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = std::sin(0.7 * i);
  CHECK((o.apply(x) - d * x).norm() <= 1e-12);
  CHECK((o.apply_transpose(x) - d.transpose() * x).norm() <= 1e-12);
}

TEST_CASE("haar entries have second moment 1/n", "[ensemble]") {
  // oracle: exact second moment of a Haar column entry is 1/n
  const int n = 500, draws = 200;
  double acc = 0.0;
  for (int k = 0; k < draws; ++k) {
    Rng rng(50000 + static_cast<std::uint64_t>(k));
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(n);
    e0(0) = 1.0;
    const Eigen::VectorXd col = sample_haar(n, rng).apply(e0);
    acc += col(0) * col(0);
  }
  acc /= draws;
  CHECK(std::abs(acc - 1.0 / n) <= 0.25 / n);
}

TEST_CASE("sample_model placements", "[ensemble]") {
  const ModelSpec m{0.2, SpectralLaw::rademacher(), FieldLaw::point_mass(0.5)};
  const CouplingSample s = sample_model(m, 4, 11, Placement::quantile);
  CHECK(s.d(0) == -1.0);
  CHECK(s.d(1) == -1.0);
  CHECK(s.d(2) == 1.0);
  CHECK(s.d(3) == 1.0);
  for (int i = 0; i < 4; ++i) REQUIRE(s.h(i) == 0.5);

  const ModelSpec msc{0.2, SpectralLaw::semicircle(), FieldLaw::point_mass(0.5)};
  const CouplingSample big = sample_model(msc, 4000, 13, Placement::iid);
  const double mean = big.d.mean();
  const double var = big.d.squaredNorm() / 4000.0 - mean * mean;
  CHECK(var == Catch::Approx(1.0).margin(0.05));

  CHECK_THROWS_AS(sample_model(m, 1, 5), DomainError);
}

TEST_CASE("degenerate zero-field AMP is flagged and identically zero", "[ensemble]") {
  const ModelSpec m{0.2, SpectralLaw::rademacher(), FieldLaw::point_mass(0.0)};
  const RSConstants c = rs_constants(m);
  const CouplingSample s = sample_model(m, 64, 3, Placement::quantile);
  Rng rng = Rng::stream(3, stream_tag::amp_init);
  const AMPTrace tr = run_amp(s, m, c, 4, rng);
  CHECK(tr.degenerate);
  CHECK(tr.x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one AMP iteration matches the update equations by hand", "[ensemble]") {
  const ModelSpec m{0.15, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const RSConstants c = rs_constants(m);
  const CouplingSample s = sample_model(m, 2, 21, Placement::quantile);
  Eigen::VectorXd y0(2);
  y0 << 0.05, -0.02;
  Rng rng(0);
  AmpOptions opts;
  opts.initial_y = y0;
  const AMPTrace tr = run_amp(s, m, c, 1, rng, opts);

  // direct scalar evaluation of the expanded iteration
  const Eigen::MatrixXd o = s.o.dense();
  const double q = c.q_star;
  double x0 = std::tanh(0.3 + y0(0)) / (1.0 - q) - y0(0);
  double x1 = std::tanh(0.3 + y0(1)) / (1.0 - q) - y0(1);
  const double s0 = o(0, 0) * x0 + o(0, 1) * x1;
  const double s1 = o(1, 0) * x0 + o(1, 1) * x1;
  const double l0 = 1.0 / ((1.0 - q) * (c.lambda_star - m.beta * s.d(0))) - 1.0;
  const double l1 = 1.0 / ((1.0 - q) * (c.lambda_star - m.beta * s.d(1))) - 1.0;
  const double y_new0 = o(0, 0) * l0 * s0 + o(1, 0) * l1 * s1;
  const double y_new1 = o(0, 1) * l0 * s0 + o(1, 1) * l1 * s1;

  CHECK(tr.x(0, 0) == Catch::Approx(x0).margin(1e-15));
  CHECK(tr.x(1, 0) == Catch::Approx(x1).margin(1e-15));
  CHECK(tr.s(0, 0) == Catch::Approx(s0).margin(1e-14));
  CHECK(tr.s(1, 0) == Catch::Approx(s1).margin(1e-14));
  CHECK(tr.y(0, 1) == Catch::Approx(y_new0).margin(1e-14));
  CHECK(tr.y(1, 1) == Catch::Approx(y_new1).margin(1e-14));
}

TEST_CASE("gram matrices track state evolution at moderate n", "[ensemble]") {
  const ModelSpec m{0.15, SpectralLaw::rademacher(), FieldLaw::gaussian(0.3, 0.5)};
  const RSConstants c = rs_constants(m);
  const SEState se = se_run(m, c, 4);
  const int n = 1500, seeds = 4;
  Eigen::MatrixXd axx = Eigen::MatrixXd::Zero(4, 4), ayy = axx, axy = axx;
  for (int k = 0; k < seeds; ++k) {
    const CouplingSample s = sample_model(m, n, 600 + static_cast<std::uint64_t>(k), Placement::quantile);
    Rng rng = Rng::stream(600 + static_cast<std::uint64_t>(k), stream_tag::amp_init);
    const AMPTrace tr = run_amp(s, m, c, 4, rng);
    axx += tr.gram_xx;
    ayy += tr.gram_yy;
    axy += tr.gram_xy;
  }
  axx /= seeds;
  ayy /= seeds;
  axy /= seeds;
  CHECK((axx - se.delta).cwiseAbs().maxCoeff() <= 0.08);
  CHECK((ayy - c.kappa_star * se.delta).cwiseAbs().maxCoeff() <= 0.08);
  CHECK(axy.cwiseAbs().maxCoeff() <= 0.08);
}

TEST_CASE("row empirical moments match the limit law", "[ensemble]") {
  const ModelSpec m{0.15, SpectralLaw::rademacher(), FieldLaw::point_mass(0.4)};
  const RSConstants c = rs_constants(m);
  const int n = 2000;
  const CouplingSample s = sample_model(m, n, 71, Placement::quantile);
  Rng rng = Rng::stream(71, stream_tag::amp_init);
  const AMPTrace tr = run_amp(s, m, c, 3, rng);
  // Y_t ~ N(0, kappa* delta_tt) with delta_tt = delta*
  const double var = c.kappa_star * c.delta_star;
  const std::vector<double> want = {0.0, var, 0.0, 3.0 * var * var};
  for (int p = 1; p <= 4; ++p) {
    double emp = 0.0, emp2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double v = std::pow(tr.y(i, 3), p);
      emp += v;
      emp2 += v * v;
    }
    emp /= n;
    emp2 /= n;
    const double mc_sigma = std::sqrt(std::max(emp2 - emp * emp, 1e-30) / n);
    REQUIRE(std::abs(emp - want[static_cast<size_t>(p - 1)]) <= 5.0 * mc_sigma + 1e-12);
  }
}

TEST_CASE("identical seeds give bitwise identical traces", "[ensemble]") {
  const ModelSpec m{0.15, SpectralLaw::rademacher(), FieldLaw::gaussian(0.2, 0.4)};
  const RSConstants c = rs_constants(m);
  auto run = [&]() {
    const CouplingSample s = sample_model(m, 300, 99, Placement::iid);
    Rng rng = Rng::stream(99, stream_tag::amp_init);
    return run_amp(s, m, c, 3, rng);
  };
  const AMPTrace a = run();
  const AMPTrace b = run();
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.s - b.s).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tap residual decreases with iterations and vanishes at the fixed point",
          "[ensemble]") {
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const RSConstants c = rs_constants(m);
  int wins = 0;
  for (int k = 0; k < 20; ++k) {
    const CouplingSample s = sample_model(m, 200, 3000 + static_cast<std::uint64_t>(k), Placement::iid);
    Rng r1 = Rng::stream(3000 + static_cast<std::uint64_t>(k), stream_tag::amp_init);
    Rng r2 = Rng::stream(3000 + static_cast<std::uint64_t>(k), stream_tag::amp_init);
    const double resid3 = tap_residual(run_amp(s, m, c, 3, r1), s, m, c);
    const double resid10 = tap_residual(run_amp(s, m, c, 10, r2), s, m, c);
    if (resid10 < resid3) ++wins;
  }
  CHECK(wins >= 11);  // majority over 20 seeds

  // near machine floor once the iteration has converged
  const ModelSpec ms{0.05, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const RSConstants cs = rs_constants(ms);
  const CouplingSample s = sample_model(ms, 64, 12, Placement::quantile);
  Rng rng = Rng::stream(12, stream_tag::amp_init);
  CHECK(tap_residual(run_amp(s, ms, cs, 80, rng), s, ms, cs) <= 1e-8);
}

TEST_CASE("freeness deviations", "[ensemble]") {
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::gaussian(0.3, 0.5)};
  const RSConstants c = rs_constants(m);
  const SEState se = se_run(m, c, 3);
  const int n = 1500;
  const CouplingSample s = sample_model(m, n, 41, Placement::quantile);
  Rng rng = Rng::stream(41, stream_tag::amp_init);
  const AMPTrace tr = run_amp(s, m, c, 3, rng);

  // f == 1 reduces to the plain gram check
  const Eigen::MatrixXd dev1 = freeness_check(tr, s, m, se.delta, [](double) { return 1.0; });
  const Eigen::MatrixXd gram_dev =
      (tr.s.transpose() * tr.s) / static_cast<double>(n) - se.delta;
  CHECK((dev1 - gram_dev).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK(freeness_check(tr, s, m, se.delta, [](double x) { return x; }).cwiseAbs().maxCoeff() <=
        0.1);
  CHECK(freeness_check(tr, s, m, se.delta, [](double x) { return x * x; })
            .cwiseAbs()
            .maxCoeff() <= 0.1);
}
