#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oisg/oracle.hpp"
#include "oisg/validation.hpp"

using namespace oisg;

TEST_CASE("single spin partition function", "[oracle]") {
  const ModelSpec m{0.3, SpectralLaw::rademacher(), FieldLaw::point_mass(0.7)};
  // n=2 is the smallest legal sample; restrict to one spin by hand instead
  const CouplingSample s = sample_model(m, 2, 5, Placement::quantile);
  const Eigen::MatrixXd jbar =
      m.beta * (s.o.dense().transpose() * s.d.asDiagonal() * s.o.dense());
  const EnumerationResult er = exact_log_z(s, m);
  // two-spin closed form: sum over four configurations
  double want = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  std::vector<double> energies;
  for (int s0 : {-1, 1})
    for (int s1 : {-1, 1}) {
      const double e = 0.5 * (jbar(0, 0) + jbar(1, 1)) + s0 * s1 * jbar(0, 1) +
                       0.7 * (s0 + s1);
      energies.push_back(e);
      want = std::max(want, e);
    }
  for (double e : energies) acc += std::exp(e - want);
  CHECK(er.log_z == Catch::Approx(want + std::log(acc)).margin(1e-12));
  CHECK(er.max_energy == Catch::Approx(want).margin(1e-12));
  CHECK(er.log_z >= er.max_energy);
  CHECK(er.log_z <= 2.0 * std::log(2.0) + er.max_energy);
}

TEST_CASE("coupled pair with zero field", "[oracle]") {
  // Jbar = [[0, j], [j, 0]], h = 0 -> log(2 e^j + 2 e^-j)
  const double j01 = 0.37;
  detail::LseAccumulator acc;
  for (int s0 : {-1, 1})
    for (int s1 : {-1, 1}) acc.add(s0 * s1 * j01);
  CHECK(acc.log_sum() == Catch::Approx(std::log(2.0 * std::exp(j01) + 2.0 * std::exp(-j01)))
                             .margin(1e-13));
}

TEST_CASE("gray code equals naive enumeration", "[oracle]") {
  const ModelSpec m{0.3, SpectralLaw::rademacher(), FieldLaw::gaussian(0.2, 0.6)};
  for (int k = 0; k < 5; ++k) {
    const int n = 8 + k;
    const CouplingSample s = sample_model(m, n, 100 + static_cast<std::uint64_t>(k), Placement::iid);
    const Eigen::MatrixXd jbar =
        m.beta * (s.o.dense().transpose() * s.d.asDiagonal() * s.o.dense());
    const EnumerationResult er = exact_log_z(s, m);
    REQUIRE(std::abs(er.log_z - validation::naive_log_z(jbar, s.h)) <= 1e-10);
  }
}

TEST_CASE("threaded enumeration is identical to serial", "[oracle]") {
  const ModelSpec m{0.25, SpectralLaw::semicircle(), FieldLaw::gaussian(0.1, 0.5)};
  const CouplingSample s = sample_model(m, 14, 77, Placement::iid);
  const EnumerationResult serial = exact_log_z(s, m, 1);
  const EnumerationResult threaded = exact_log_z(s, m, 4);
  CHECK(serial.log_z == threaded.log_z);  // bitwise: deterministic merge order
}

TEST_CASE("size guard", "[oracle]") {
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.0)};
  const CouplingSample s = sample_model(m, 25, 1, Placement::quantile);
  CHECK_THROWS_AS(exact_log_z(s, m), TooLargeError);
}

TEST_CASE("log-sum-exp stays finite at the extreme corner", "[oracle]") {
  const ModelSpec m{1.0 - 1e-9, SpectralLaw::semicircle(), FieldLaw::point_mass(5.0)};
  const CouplingSample s = sample_model(m, 12, 9, Placement::quantile);
  const EnumerationResult er = exact_log_z(s, m);
  CHECK(std::isfinite(er.log_z));
}

TEST_CASE("quenched free energy bookkeeping", "[oracle]") {
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const QuenchedResult one = quenched_free_energy(m, 8, 1, 5);
  CHECK_FALSE(one.stderr_of_mean.has_value());
  CHECK(one.per_replicate.size() == 1);

  const QuenchedResult many = quenched_free_energy(m, 8, 4, 5);
  CHECK(many.stderr_of_mean.has_value());

  // beta -> 0 reduces to the decoupled value log 2 + n^-1 sum log cosh h_i
  const ModelSpec tiny{1e-8, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const QuenchedResult free_spins = quenched_free_energy(tiny, 10, 1, 5);
  CHECK(free_spins.mean ==
        Catch::Approx(std::log(2.0) + std::log(std::cosh(0.3))).margin(1e-6));
}

TEST_CASE("quenched mean approaches psi_rs", "[oracle]") {
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const RSConstants c = rs_constants(m);
  const QuenchedResult q = quenched_free_energy(m, 14, 6, 31, Placement::quantile, 2);
  CHECK(std::abs(q.mean - c.psi_rs) <= 0.05);
}

TEST_CASE("annealed limit at zero field", "[oracle]") {
  const ModelSpec msc{0.3, SpectralLaw::semicircle(), FieldLaw::point_mass(0.0)};
  CHECK(annealed_h0(msc) == Catch::Approx(std::log(2.0) + 0.09 / 4.0).margin(1e-12));

  // Rademacher: quadrature on the closed-form R
  const double beta = 0.2;
  const ModelSpec mr{beta, SpectralLaw::rademacher(), FieldLaw::point_mass(0.0)};
  const double oracle = integrate_adaptive(
      [&](double z) {
        const double g = beta * z;
        return g == 0.0 ? 0.0 : beta * (std::sqrt(1.0 + 4.0 * g * g) - 1.0) / (2.0 * g);
      },
      0.0, 1.0, 1e-13);
  CHECK(annealed_h0(mr) == Catch::Approx(std::log(2.0) + 0.5 * oracle).margin(1e-10));

  for (const auto& law : {SpectralLaw::semicircle(), SpectralLaw::rademacher()}) {
    const ModelSpec mz{0.25, law, FieldLaw::point_mass(0.0)};
    CHECK(std::abs(annealed_h0(mz) - psi_rs(mz)) <= 1e-10);
  }

  CHECK_THROWS_AS(annealed_h0(ModelSpec{0.1, SpectralLaw::rademacher(),
                                        FieldLaw::point_mass(0.2)}),
                  DomainError);
}

TEST_CASE("spherical finite-n closed forms", "[oracle]") {
  // single repeated eigenvalue, zero field: gamma = beta c + 1, value beta c / 2
  const double cval = 0.8, beta = 0.3;
  const ModelSpec m{beta, SpectralLaw::rademacher(), FieldLaw::point_mass(0.0)};
  Rng rng(4);
  const int n = 30;
  CouplingSample s{n, Eigen::VectorXd::Constant(n, cval), sample_haar(n, rng),
                   Eigen::VectorXd::Zero(n), 4, Placement::quantile};
  CHECK(spherical_finite_n(s, m) == Catch::Approx(0.5 * beta * cval).margin(1e-8));
}

TEST_CASE("spherical finite-n approaches the limit", "[oracle]") {
  const ModelSpec m{0.3, SpectralLaw::semicircle(), FieldLaw::gaussian(0.0, 0.5)};
  const double psi = psi_rs_sphere(m);
  const CouplingSample s = sample_model(m, 2000, 8, Placement::quantile);
  CHECK(std::abs(spherical_finite_n(s, m) - psi) <= 0.01);
  // dropping the field removes the quadratic term
  const ModelSpec mz{0.3, SpectralLaw::semicircle(), FieldLaw::point_mass(0.0)};
  const CouplingSample sz = sample_model(mz, 500, 9, Placement::quantile);
  CHECK(std::abs(spherical_finite_n(sz, mz) - psi_rs_sphere(mz)) <= 0.01);
}
