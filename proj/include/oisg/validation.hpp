#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oisg/commands.hpp"
#include "oisg/ensemble.hpp"
#include "oisg/oracle.hpp"
#include "oisg/state_evolution.hpp"
#include "oisg/variational.hpp"

// Acceptance suite: every criterion pinned to its stated tolerance. Each
// check returns one pass/fail record; cmd_validate and the acceptance test
// binary both run these.

namespace oisg {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool warn = false;
  double seconds = 0.0;
  std::string detail;
};

namespace validation {

inline std::vector<SpectralLaw> shipped_laws() {
  return {SpectralLaw::semicircle(), SpectralLaw::rademacher(),
          SpectralLaw::discrete({-1.5, 0.5, 1.0}, {0.3, 0.4, 0.3}).standardize().law};
}

// Reference enumeration: O(2^n * n^2) direct evaluation, kept deliberately
// independent of the Gray-code path.
inline double naive_log_z(const Eigen::MatrixXd& jbar, const Eigen::VectorXd& h) {
  const int n = static_cast<int>(h.size());
  detail::LseAccumulator acc;
  std::vector<double> sigma(static_cast<size_t>(n));
  for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
    for (int i = 0; i < n; ++i) sigma[static_cast<size_t>(i)] = ((mask >> i) & 1u) ? 1.0 : -1.0;
    double quad = 0.0, field = 0.0;
    for (int i = 0; i < n; ++i) {
      field += h(i) * sigma[static_cast<size_t>(i)];
      for (int j = 0; j < n; ++j) quad += sigma[static_cast<size_t>(i)] * jbar(i, j) * sigma[static_cast<size_t>(j)];
    }
    acc.add(0.5 * quad + field);
  }
  return acc.log_sum();
}

inline CriterionResult criterion_transforms() {
  detail::Stopwatch sw;
  CriterionResult res{1, "transform correctness (round trips, closed forms, cumulants)"};
  double worst = 0.0;
  std::ostringstream detail_os;
  for (const SpectralLaw& law : shipped_laws()) {
    const double cap = 0.99 * std::min(law.cauchy_at_edge(), 10.0);
    for (int i = 0; i < 40; ++i) {
      const double alpha = 0.01 + (cap - 0.01) * (i + 0.5) / 40.0;
      const double rt = std::abs(law.cauchy(law.cauchy_inverse(alpha)) - alpha) / alpha;
      worst = std::max(worst, rt);
    }
  }
  detail_os << "roundtrip=" << worst;
  bool pass = worst <= 1e-8;

  // R against an in-criterion bisection inverse of the closed G
  auto bisect_r = [](const std::function<double(double)>& g_of, double edge, double z) {
    double lo = edge + 1e-12, hi = edge + 1.0 / z + 4.0;
    while (g_of(lo) <= z) lo = edge + (lo - edge) * 0.25;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (g_of(mid) > z)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi) - 1.0 / z;
  };
  double worst_r = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double z = 0.05 + 0.9 * i / 19.0;
    const double r_sc = bisect_r([](double g) { return 2.0 / (g + std::sqrt(g * g - 4.0)); },
                                 2.0, z);
    worst_r = std::max(worst_r, std::abs(SpectralLaw::semicircle().r_transform(z) - r_sc));
    worst_r = std::max(worst_r, std::abs(SpectralLaw::semicircle().r_transform(z) - z));
    const double r_rad = bisect_r([](double g) { return g / (g * g - 1.0); }, 1.0, z);
    const double closed = (std::sqrt(1.0 + 4.0 * z * z) - 1.0) / (2.0 * z);
    worst_r = std::max(worst_r, std::abs(SpectralLaw::rademacher().r_transform(z) - r_rad));
    worst_r = std::max(worst_r, std::abs(SpectralLaw::rademacher().r_transform(z) - closed));
  }
  detail_os << " closed_forms=" << worst_r;
  pass = pass && worst_r <= 1e-8;

  const std::vector<double> want_sc = {0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<double> want_rad = {0, 1, 0, -1, 0, 2, 0, -5, 0, 14, 0, -42};
  const auto got_sc = SpectralLaw::semicircle().free_cumulants(12);
  const auto got_rad = SpectralLaw::rademacher().free_cumulants(12);
  double worst_c = 0.0;
  for (int k = 0; k < 12; ++k) {
    worst_c = std::max(worst_c, std::abs(got_sc[static_cast<size_t>(k)] - want_sc[static_cast<size_t>(k)]));
    worst_c = std::max(worst_c, std::abs(got_rad[static_cast<size_t>(k)] - want_rad[static_cast<size_t>(k)]));
  }
  detail_os << " cumulants=" << worst_c;
  pass = pass && worst_c <= 1e-8;

  res.pass = pass;
  res.detail = detail_os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_rs_identities() {
  detail::Stopwatch sw;
  CriterionResult res{2, "RS constant identities on 3x3x3 model grid"};
  const std::vector<FieldLaw> fields = {FieldLaw::point_mass(0.3),
                                        FieldLaw::atoms({-0.5, 0.7}, {0.4, 0.6}),
                                        FieldLaw::gaussian(0.1, 0.4)};
  double worst = 0.0, worst_resid = 0.0;
  for (const SpectralLaw& law : shipped_laws())
    for (const FieldLaw& field : fields)
      for (double beta : {0.05, 0.15, 0.3}) {
        const ModelSpec m{beta, law, field};
        const RSConstants c = rs_constants(m);
        const double z = 1.0 - c.q_star;
        worst = std::max(worst, std::abs(c.kappa_star * c.delta_star - c.sigma_star_sq));
        worst = std::max(worst,
                         std::abs(c.delta_star - (c.q_star / (z * z) - c.sigma_star_sq)));
        worst = std::max(worst, std::abs(c.lambda_star - (c.a_star + 1.0 / z)));
        worst = std::max(
            worst, std::abs(delta_star_gaussian_form(m, c.q_star, std::sqrt(c.sigma_star_sq)) -
                            c.delta_star));
        worst_resid = std::max(worst_resid, c.solver.residual);
      }
  res.pass = worst <= 1e-8 && worst_resid <= 1e-10;
  std::ostringstream os;
  os << "max_identity_gap=" << worst << " max_fixed_point_residual=" << worst_resid;
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_stationary_points() {
  detail::Stopwatch sw;
  CriterionResult res{3, "stationary-point identities of the moment objectives"};
  const FieldLaw field = FieldLaw::atoms({-0.5, 0.7}, {0.4, 0.6});
  double worst_phi1 = 0.0, worst_phi2 = 0.0, worst_grad = 0.0;
  bool v_decreasing = true;
  const double v_floor = 1e-12;  // double-precision evaluation floor
  for (const SpectralLaw& law : {SpectralLaw::rademacher(), SpectralLaw::semicircle()})
    for (double beta : {0.05, 0.1}) {
      const ModelSpec m{beta, law, field};
      const RSConstants c = rs_constants(m);
      const SEState se = se_run(m, c, 9);
      std::vector<double> v_norms;
      for (int t = 1; t <= 8; ++t) {
        const StationaryReport p1 = phi1_stationary(m, c, se, t);
        const StationaryReport p2 = phi2_stationary(m, c, se, t);
        worst_phi1 = std::max(worst_phi1, std::abs(p1.value - c.psi_rs));
        worst_phi2 = std::max(worst_phi2, std::abs(p2.value - 2.0 * c.psi_rs));
        for (const char* key : {"u", "v", "w", "gamma", "U", "W"})
          worst_grad = std::max(worst_grad, p1.gradients.at(key));
        for (const char* key : {"k", "l", "m", "rho", "K", "M", "P", "p", "nu"})
          worst_grad = std::max(worst_grad, p2.gradients.at(key));
        v_norms.push_back(p1.gradients.at("V"));
      }
      // strict decrease until the sequence reaches the evaluation floor
      bool below = false;
      for (size_t i = 0; i < v_norms.size(); ++i) {
        if (below || v_norms[i] <= v_floor) {
          below = true;
          if (v_norms[i] > v_floor) v_decreasing = false;
        } else if (i > 0 && !(v_norms[i] < v_norms[i - 1])) {
          v_decreasing = false;
        }
      }
    }
  res.pass = worst_phi1 <= 1e-8 && worst_phi2 <= 1e-7 && worst_grad <= 1e-8 && v_decreasing;
  std::ostringstream os;
  os << "max|phi1-psi|=" << worst_phi1 << " max|phi2-2psi|=" << worst_phi2
     << " max_partial=" << worst_grad << " dV_decreasing=" << (v_decreasing ? "yes" : "no");
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_inf_gamma(std::uint64_t seed) {
  detail::Stopwatch sw;
  CriterionResult res{4, "variational infima vs closed forms"};
  Rng rng = Rng::stream(seed, 0x494e464741ULL);
  double worst_scalar = 0.0, worst_loc = 0.0, worst_matrix = 0.0;
  for (const SpectralLaw& law : shipped_laws()) {
    const double cap = 0.95 * std::min(law.cauchy_at_edge(), 2.0);
    for (int i = 0; i < 20; ++i) {
      const double alpha = rng.uniform(0.05, cap);
      const ScalarInfimum num = inf_gamma_numeric(alpha, law);
      worst_scalar = std::max(worst_scalar, std::abs(num.value - law.r_integral(alpha)));
      worst_loc = std::max(
          worst_loc, std::abs(num.gamma_opt - (law.r_transform(alpha) + 1.0 / alpha)));
    }
    for (int i = 0; i < 20; ++i) {
      const double a1 = rng.uniform(0.05, cap), a2 = rng.uniform(0.05, cap);
      const double th = rng.uniform(0.0, 3.141592653589793);
      Eigen::Matrix2d q;
      q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      const Eigen::Matrix2d a =
          q * Eigen::Vector2d(a1, a2).asDiagonal() * q.transpose();
      const double closed = law.r_integral(a1) + law.r_integral(a2);
      const MatrixInfimum num = inf_gamma_matrix_numeric(a, law);
      worst_matrix = std::max(worst_matrix, std::abs(num.value - closed));
    }
  }
  res.pass = worst_scalar <= 1e-8 && worst_matrix <= 1e-6 && worst_loc <= 1e-6;
  std::ostringstream os;
  os << "scalar=" << worst_scalar << " minimizer_loc=" << worst_loc
     << " matrix=" << worst_matrix;
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_se_ensemble(std::uint64_t seed, int threads) {
  detail::Stopwatch sw;
  CriterionResult res{5, "state evolution vs finite-n AMP ensemble (n=4000)"};
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.4)};
  const RSConstants c = rs_constants(m);
  const SEState se = se_run(m, c, 6);
  const int n = 4000, T = 6, n_seeds = 8;

  std::vector<Eigen::MatrixXd> xx(n_seeds), yy(n_seeds), xy(n_seeds);
  std::vector<std::map<std::string, Eigen::MatrixXd>> free_dev(n_seeds);
  const std::vector<std::pair<std::string, std::function<double(double)>>> fns = {
      {"x", [](double x) { return x; }},
      {"x_squared", [](double x) { return x * x; }},
      {"resolvent", [&](double x) { return 1.0 / (c.lambda_star - x); }}};
  auto run_one = [&](int s) {
    const std::uint64_t seed_s =
        Rng::stream(seed, stream_tag::replicate, static_cast<std::uint64_t>(s)).next_u64();
    const CouplingSample sample = sample_model(m, n, seed_s, Placement::quantile);
    Rng init = Rng::stream(seed_s, stream_tag::amp_init);
    const AMPTrace tr = run_amp(sample, m, c, T, init);
    xx[static_cast<size_t>(s)] = tr.gram_xx;
    yy[static_cast<size_t>(s)] = tr.gram_yy;
    xy[static_cast<size_t>(s)] = tr.gram_xy;
    for (const auto& [name, fn] : fns)
      free_dev[static_cast<size_t>(s)][name] = freeness_check(tr, sample, m, se.delta, fn);
  };
  if (threads <= 1) {
    for (int s = 0; s < n_seeds; ++s) run_one(s);
  } else {
    std::vector<std::thread> pool;
    const int nt = std::min(threads, n_seeds);
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&, t]() {
        for (int s = t; s < n_seeds; s += nt) run_one(s);
      });
    for (auto& th : pool) th.join();
  }
  Eigen::MatrixXd axx = xx[0], ayy = yy[0], axy = xy[0];
  std::map<std::string, Eigen::MatrixXd> afree = free_dev[0];
  for (int s = 1; s < n_seeds; ++s) {
    axx += xx[static_cast<size_t>(s)];
    ayy += yy[static_cast<size_t>(s)];
    axy += xy[static_cast<size_t>(s)];
    for (auto& [name, dev] : afree) dev += free_dev[static_cast<size_t>(s)][name];
  }
  const double inv = 1.0 / n_seeds;
  const double dev_xx = ((axx * inv) - se.delta).cwiseAbs().maxCoeff();
  const double dev_yy = ((ayy * inv) - c.kappa_star * se.delta).cwiseAbs().maxCoeff();
  const double dev_xy = (axy * inv).cwiseAbs().maxCoeff();
  double dev_free = 0.0;
  for (auto& [name, dev] : afree) dev_free = std::max(dev_free, (dev * inv).cwiseAbs().maxCoeff());

  res.pass = dev_xx <= 0.05 && dev_yy <= 0.05 && dev_xy <= 0.05 && dev_free <= 0.1;
  std::ostringstream os;
  os << "gram_xx=" << dev_xx << " gram_yy=" << dev_yy << " gram_xy=" << dev_xy
     << " freeness=" << dev_free;
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_main_theorem(std::uint64_t seed, int threads) {
  detail::Stopwatch sw;
  CriterionResult res{6, "quenched free energy vs Psi_RS at desk scale"};
  const ModelSpec m{0.1, SpectralLaw::rademacher(), FieldLaw::point_mass(0.3)};
  const RSConstants c = rs_constants(m);
  const QuenchedResult main_run =
      quenched_free_energy(m, 20, 32, seed, Placement::quantile, threads);
  const double gap = std::abs(main_run.mean - c.psi_rs);

  // Median trend across sizes. The true inter-size differences sit well
  // below a 16-seed median's sampling error, so the non-increase assertion
  // carries a one-standard-error budget (order-statistics estimate); a real
  // convergence failure overshoots it by orders of magnitude.
  std::vector<double> medians, med_se;
  for (int n : {12, 16, 20}) {
    const QuenchedResult q =
        quenched_free_energy(m, n, 16, seed + static_cast<std::uint64_t>(n), Placement::quantile, threads);
    std::vector<double> gaps;
    for (double v : q.per_replicate) gaps.push_back(std::abs(v - c.psi_rs));
    std::sort(gaps.begin(), gaps.end());
    medians.push_back(0.5 * (gaps[7] + gaps[8]));
    double mean_gap = 0.0;
    for (double g : gaps) mean_gap += g;
    mean_gap /= 16.0;
    double var = 0.0;
    for (double g : gaps) var += (g - mean_gap) * (g - mean_gap);
    med_se.push_back(1.2533 * std::sqrt(var / 15.0) / 4.0);
  }
  auto excess = [&](int i, int j) {
    const double budget =
        2.0 * std::sqrt(med_se[static_cast<size_t>(i)] * med_se[static_cast<size_t>(i)] +
                        med_se[static_cast<size_t>(j)] * med_se[static_cast<size_t>(j)]);
    return (medians[static_cast<size_t>(j)] - medians[static_cast<size_t>(i)]) / budget;
  };
  const bool strict = medians[1] <= medians[0] && medians[2] <= medians[1];
  const bool within_budget = excess(0, 1) <= 1.0 && excess(1, 2) <= 1.0;

  res.pass = gap <= 0.02 && within_budget;
  res.warn = res.pass && !strict;
  std::ostringstream os;
  os << "gap=" << gap << " (tol 0.02) medians n=12,16,20: " << medians[0] << "+-" << med_se[0]
     << ", " << medians[1] << "+-" << med_se[1] << ", " << medians[2] << "+-" << med_se[2]
     << (strict ? " (strictly non-increasing)"
                : " (non-increasing within the 2-sigma median budget)");
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_sphere(std::uint64_t seed, int threads) {
  detail::Stopwatch sw;
  CriterionResult res{7, "finite-n spherical free energy vs Psi_RS,sphere"};
  const ModelSpec m{0.3, SpectralLaw::semicircle(), FieldLaw::gaussian(0.0, 0.5)};
  const double psi_sphere = psi_rs_sphere(m);
  const int n = 2000, reps = 8;
  std::vector<double> vals(reps);
  auto run_one = [&](int r) {
    const std::uint64_t seed_r =
        Rng::stream(seed, stream_tag::replicate, static_cast<std::uint64_t>(r)).next_u64();
    vals[static_cast<size_t>(r)] = spherical_finite_n(sample_model(m, n, seed_r, Placement::quantile), m);
  };
  if (threads <= 1) {
    for (int r = 0; r < reps; ++r) run_one(r);
  } else {
    std::vector<std::thread> pool;
    const int nt = std::min(threads, reps);
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&, t]() {
        for (int r = t; r < reps; r += nt) run_one(r);
      });
    for (auto& th : pool) th.join();
  }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= reps;
  const double gap = std::abs(mean - psi_sphere);
  res.pass = gap <= 0.01;
  std::ostringstream os;
  os << "mean=" << mean << " psi_sphere=" << psi_sphere << " gap=" << gap << " (tol 0.01)";
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_hciz_mc(std::uint64_t seed) {
  detail::Stopwatch sw;
  CriterionResult res{8, "HCIZ rank-1 exponent vs Haar Monte Carlo (diagnostic)"};
  const int n = 400;
  const SpectralLaw law = SpectralLaw::rademacher();
  Eigen::VectorXd a(n), b(n), d(n);
  for (int i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    d(i) = law.quantile(p);
  }
  a.setConstant(std::sqrt(0.8));
  b.setConstant(0.1);
  const Rank1Exponent r1 = hciz_rank1(a, b, d, 1e-3);
  Rng rng = Rng::stream(seed, stream_tag::monte_carlo);
  const double mc = hciz_rank1_mc(a, b, d, 400000, rng);
  const double gap = std::abs(mc - r1.value);
  res.pass = gap <= 0.15;
  res.warn = gap > 0.05;
  std::ostringstream os;
  os << "E_n=" << r1.value << " MC=" << mc << " gap=" << gap
     << " (<=0.05 clean, <=0.15 tolerated)";
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_oracles(std::uint64_t seed) {
  detail::Stopwatch sw;
  CriterionResult res{9, "Gray-code vs naive enumeration; annealed = RS at zero field"};
  double worst_enum = 0.0;
  const ModelSpec m{0.2, SpectralLaw::rademacher(), FieldLaw::gaussian(0.2, 0.5)};
  for (int k = 0; k < 5; ++k) {
    const std::uint64_t seed_k =
        Rng::stream(seed, stream_tag::replicate, static_cast<std::uint64_t>(k)).next_u64();
    const CouplingSample sample = sample_model(m, 12, seed_k, Placement::iid);
    const EnumerationResult er = exact_log_z(sample, m);
    const Eigen::MatrixXd jbar =
        m.beta * (sample.o.dense().transpose() * sample.d.asDiagonal() * sample.o.dense());
    worst_enum = std::max(worst_enum, std::abs(er.log_z - naive_log_z(jbar, sample.h)));
  }
  double worst_annealed = 0.0;
  for (const SpectralLaw& law : shipped_laws()) {
    const ModelSpec mz{0.25, law, FieldLaw::point_mass(0.0)};
    worst_annealed = std::max(worst_annealed, std::abs(annealed_h0(mz) - psi_rs(mz)));
  }
  res.pass = worst_enum <= 1e-10 && worst_annealed <= 1e-10;
  std::ostringstream os;
  os << "enumeration_gap=" << worst_enum << " annealed_vs_rs=" << worst_annealed;
  res.detail = os.str();
  res.seconds = sw.seconds();
  return res;
}

inline CriterionResult criterion_determinism(std::uint64_t seed) {
  detail::Stopwatch sw;
  CriterionResult res{10, "seeded commands reproduce byte-identical reports"};
  json amp_cfg = {{"command", "amp"},
                  {"model",
                   {{"beta", 0.15},
                    {"spectral", {{"type", "rademacher"}}},
                    {"field", {{"type", "gaussian_field"}, {"mean", 0.2}, {"sd", 0.4}}}}},
                  {"n_list", {200}},
                  {"t_max", 3},
                  {"replicates", 2},
                  {"placement", "iid"},
                  {"seed", seed}};
  json enum_cfg = {{"command", "enumerate"},
                   {"model",
                    {{"beta", 0.1},
                     {"spectral", {{"type", "semicircle"}}},
                     {"field", {{"type", "point_mass"}, {"h", 0.3}}}}},
                   {"n_list", {10}},
                   {"replicates", 2},
                   {"seed", seed}};
  auto strip = [](json j) {
    j.erase("timing");
    return j.dump();
  };
  bool ok = true;
  for (const json& cfg_json : {amp_cfg, enum_cfg}) {
    const ExperimentConfig cfg = parse_config(cfg_json);
    const std::string cmd = cfg_json.at("command").get<std::string>();
    const json first = (cmd == "amp") ? cmd_amp(cfg, 1) : cmd_enumerate(cfg, 1);
    const json second = (cmd == "amp") ? cmd_amp(cfg, 2) : cmd_enumerate(cfg, 2);
    ok = ok && strip(first) == strip(second);
  }
  res.pass = ok;
  res.detail = ok ? "amp and enumerate reports identical across reruns (1 vs 2 threads)"
                  : "reports differ across reruns";
  res.seconds = sw.seconds();
  return res;
}

}  // namespace validation

inline std::vector<CriterionResult> run_acceptance(std::uint64_t seed, int threads,
                                                   const std::vector<int>& only = {}) {
  using namespace validation;
  std::vector<std::function<CriterionResult()>> all = {
      [&] { return criterion_transforms(); },
      [&] { return criterion_rs_identities(); },
      [&] { return criterion_stationary_points(); },
      [&] { return criterion_inf_gamma(seed); },
      [&] { return criterion_se_ensemble(seed, threads); },
      [&] { return criterion_main_theorem(seed, threads); },
      [&] { return criterion_sphere(seed, threads); },
      [&] { return criterion_hciz_mc(seed); },
      [&] { return criterion_oracles(seed); },
      [&] { return criterion_determinism(seed); }};
  std::vector<CriterionResult> out;
  for (size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    out.push_back(all[i]());
  }
  return out;
}

inline json cmd_validate(const ExperimentConfig& cfg, int threads = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const std::vector<CriterionResult> results = run_acceptance(cfg.require_seed(), threads);
  json arr = json::array();
  bool all_pass = true;
  for (const CriterionResult& r : results) {
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"pass", r.pass},
                   {"warn", r.warn},
                   {"seconds", r.seconds},
                   {"detail", r.detail}});
    all_pass = all_pass && r.pass;
  }
  rep["results"] = {{"criteria", arr}, {"all_pass", all_pass}};
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

}  // namespace oisg
