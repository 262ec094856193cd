#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "oisg/ensemble.hpp"
#include "oisg/oracle.hpp"
#include "oisg/serialize.hpp"
#include "oisg/state_evolution.hpp"
#include "oisg/variational.hpp"
#include "oisg/version.hpp"

namespace oisg {

struct ExperimentConfig {
  std::string command;
  ModelSpec model;  // standardized; beta already includes the spectral scale
  double spectral_shift = 0.0;
  double spectral_scale = 1.0;
  double beta_input = 0.0;  // beta as given in the config
  std::vector<int> n_list;
  int t_max = 6;
  int replicates = 8;
  std::optional<std::uint64_t> seed;
  Placement placement = Placement::quantile;
  std::map<std::string, double> tolerances;
  std::string out_path;
  std::string out_format = "json";
  std::string dump_iterates;
  json raw;

  double tol(const std::string& key, double fallback) const {
    auto it = tolerances.find(key);
    return it == tolerances.end() ? fallback : it->second;
  }

  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("config: \"seed\" is mandatory for randomized commands");
    return *seed;
  }

  // Free energy of the unstandardized model = reported value + this shift.
  double free_energy_shift() const { return 0.5 * beta_input * spectral_shift; }
};

inline bool command_is_randomized(const std::string& cmd) {
  return cmd == "amp" || cmd == "enumerate" || cmd == "sphere" || cmd == "hciz" ||
         cmd == "validate";
}

inline ExperimentConfig parse_config(const json& j, const std::string& command_override = "",
                                     std::optional<std::uint64_t> seed_override = std::nullopt) {
  detail::reject_unknown_keys(j,
                              {"command", "model", "n_list", "t_max", "replicates", "seed",
                               "placement", "tolerances", "output"},
                              "config");
  std::string command = command_override;
  if (j.contains("command")) {
    const std::string in_file = j.at("command").get<std::string>();
    if (!command.empty() && command != in_file)
      throw ConfigError("config: command \"" + in_file + "\" does not match subcommand \"" +
                        command + "\"");
    command = in_file;
  }
  if (command.empty()) throw ConfigError("config: no command given");

  const json& jm = detail::require_key(j, "model", "config");
  detail::reject_unknown_keys(jm, {"beta", "spectral", "field"}, "config.model");
  const double beta = detail::require_key(jm, "beta", "config.model").get<double>();
  const SpectralLaw raw_law = spectral_from_json(detail::require_key(jm, "spectral", "config.model"));
  const FieldLaw field = field_from_json(detail::require_key(jm, "field", "config.model"));
  const auto std_law = raw_law.standardize();

  ExperimentConfig cfg{.command = command,
                       .model = ModelSpec{beta * std_law.scale, std_law.law, field},
                       .spectral_shift = std_law.shift,
                       .spectral_scale = std_law.scale,
                       .beta_input = beta};
  cfg.model.validate();
  cfg.raw = j;

  if (j.contains("n_list")) cfg.n_list = j.at("n_list").get<std::vector<int>>();
  if (j.contains("t_max")) cfg.t_max = j.at("t_max").get<int>();
  if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (seed_override) cfg.seed = *seed_override;
  if (j.contains("placement")) {
    const std::string p = j.at("placement").get<std::string>();
    if (p == "iid")
      cfg.placement = Placement::iid;
    else if (p == "quantile")
      cfg.placement = Placement::quantile;
    else
      throw ConfigError("config: placement must be \"iid\" or \"quantile\"");
  }
  if (j.contains("tolerances")) {
    const json& jt = j.at("tolerances");
    for (auto it = jt.begin(); it != jt.end(); ++it)
      cfg.tolerances[it.key()] = it.value().get<double>();
  }
  if (j.contains("output")) {
    const json& jo = j.at("output");
    detail::reject_unknown_keys(jo, {"path", "format", "dump_iterates"}, "config.output");
    if (jo.contains("path")) cfg.out_path = jo.at("path").get<std::string>();
    if (jo.contains("format")) cfg.out_format = jo.at("format").get<std::string>();
    if (jo.contains("dump_iterates")) cfg.dump_iterates = jo.at("dump_iterates").get<std::string>();
  }
  if (cfg.out_format != "json" && cfg.out_format != "csv")
    throw ConfigError("config: format must be \"json\" or \"csv\"");
  if (command_is_randomized(command)) cfg.require_seed();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path,
                                         const std::string& command_override = "",
                                         std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j, command_override, seed_override);
}

namespace detail {

inline json report_envelope(const ExperimentConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["version"] = version_string;
  j["config_hash"] = config_hash(cfg.raw);
  if (cfg.seed) j["seed"] = *cfg.seed;
  j["model"] = {{"beta", cfg.model.beta},
                {"spectral", spectral_to_json(cfg.model.spectral)},
                {"field", field_to_json(cfg.model.field)}};
  if (cfg.spectral_shift != 0.0 || cfg.spectral_scale != 1.0) {
    j["standardization"] = {{"shift", cfg.spectral_shift},
                            {"scale", cfg.spectral_scale},
                            {"free_energy_shift", cfg.free_energy_shift()},
                            {"beta_input", cfg.beta_input}};
  }
  return j;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

inline json cmd_rs(const ExperimentConfig& cfg, int /*threads*/ = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const RSConstants c = rs_constants(cfg.model);
  rep["results"] = rs_constants_to_json(c);
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

inline json cmd_se(const ExperimentConfig& cfg, int /*threads*/ = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const RSConstants c = rs_constants(cfg.model);
  const SEState se = se_run(cfg.model, c, cfg.t_max);
  const SELimitReport lim = se_limit_check(se);
  rep["results"] = {{"t", se.t()},
                    {"delta", matrix_to_json(se.delta)},
                    {"delta_star", c.delta_star},
                    {"limit_check",
                     {{"max_dev_tail", lim.max_dev_tail},
                      {"decay_ratio", lim.decay_ratio},
                      {"kappa_delta_gap", lim.kappa_delta_gap},
                      {"contraction_bound_ok", lim.contraction_bound_ok},
                      {"degenerate", lim.degenerate}}}};
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

inline json cmd_amp(const ExperimentConfig& cfg, int threads = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const std::uint64_t seed = cfg.require_seed();
  const RSConstants c = rs_constants(cfg.model);
  const SEState se = se_run(cfg.model, c, cfg.t_max);
  std::vector<int> ns = cfg.n_list.empty() ? std::vector<int>{1000} : cfg.n_list;

  json per_n = json::array();
  for (int n : ns) {
    Eigen::MatrixXd avg_xx, avg_yy, avg_xy;
    json freeness = json::object();
    const std::vector<std::pair<std::string, std::function<double(double)>>> test_fns = {
        {"x", [](double x) { return x; }},
        {"x_squared", [](double x) { return x * x; }},
        {"resolvent", [&](double x) { return 1.0 / (c.lambda_star - x); }}};
    std::map<std::string, Eigen::MatrixXd> avg_free;
    std::vector<double> taps;
    bool degenerate = false;

    struct RepResult {
      Eigen::MatrixXd xx, yy, xy;
      std::map<std::string, Eigen::MatrixXd> free_dev;
      double tap = 0.0;
      bool degenerate = false;
    };
    std::vector<RepResult> results(static_cast<size_t>(cfg.replicates));
    auto run_one = [&](int r) {
      const std::uint64_t seed_r =
          Rng::stream(seed, stream_tag::replicate, static_cast<std::uint64_t>(r)).next_u64();
      const CouplingSample sample = sample_model(cfg.model, n, seed_r, cfg.placement);
      Rng init = Rng::stream(seed_r, stream_tag::amp_init);
      const AMPTrace tr = run_amp(sample, cfg.model, c, cfg.t_max, init);
      RepResult res;
      res.xx = tr.gram_xx;
      res.yy = tr.gram_yy;
      res.xy = tr.gram_xy;
      res.tap = (cfg.t_max >= 2) ? tap_residual(tr, sample, cfg.model, c) : 0.0;
      res.degenerate = tr.degenerate;
      for (const auto& [name, fn] : test_fns)
        res.free_dev[name] = freeness_check(tr, sample, cfg.model, se.delta, fn);
      results[static_cast<size_t>(r)] = std::move(res);
      if (r == 0 && !cfg.dump_iterates.empty()) {
        dump_matrix_binary(tr.x, cfg.dump_iterates, "x");
        dump_matrix_binary(tr.y, cfg.dump_iterates, "y");
        dump_matrix_binary(tr.s, cfg.dump_iterates, "s");
      }
    };
    if (threads <= 1 || cfg.replicates == 1) {
      for (int r = 0; r < cfg.replicates; ++r) run_one(r);
    } else {
      std::vector<std::thread> pool;
      const int nt = std::min(threads, cfg.replicates);
      for (int t = 0; t < nt; ++t)
        pool.emplace_back([&, t]() {
          for (int r = t; r < cfg.replicates; r += nt) run_one(r);
        });
      for (auto& th : pool) th.join();
    }
    for (int r = 0; r < cfg.replicates; ++r) {
      const RepResult& res = results[static_cast<size_t>(r)];
      if (r == 0) {
        avg_xx = res.xx;
        avg_yy = res.yy;
        avg_xy = res.xy;
        for (const auto& [name, dev] : res.free_dev) avg_free[name] = dev;
      } else {
        avg_xx += res.xx;
        avg_yy += res.yy;
        avg_xy += res.xy;
        for (const auto& [name, dev] : res.free_dev) avg_free[name] += dev;
      }
      taps.push_back(res.tap);
      degenerate = degenerate || res.degenerate;
    }
    const double inv_r = 1.0 / static_cast<double>(cfg.replicates);
    avg_xx *= inv_r;
    avg_yy *= inv_r;
    avg_xy *= inv_r;
    for (auto& [name, dev] : avg_free) {
      dev *= inv_r;
      freeness[name] = dev.cwiseAbs().maxCoeff();
    }
    per_n.push_back(
        {{"n", n},
         {"replicates", cfg.replicates},
         {"gram_xx_dev_max", (avg_xx - se.delta).cwiseAbs().maxCoeff()},
         {"gram_yy_dev_max", (avg_yy - c.kappa_star * se.delta).cwiseAbs().maxCoeff()},
         {"gram_xy_max", avg_xy.cwiseAbs().maxCoeff()},
         {"tap_residuals", taps},
         {"freeness_dev_max", freeness},
         {"degenerate", degenerate}});
  }
  rep["results"] = {{"t_max", cfg.t_max},
                    {"delta", matrix_to_json(se.delta)},
                    {"constants", rs_constants_to_json(c)},
                    {"per_n", per_n}};
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

inline json cmd_enumerate(const ExperimentConfig& cfg, int threads = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const std::uint64_t seed = cfg.require_seed();
  const RSConstants c = rs_constants(cfg.model);
  std::vector<int> ns = cfg.n_list.empty() ? std::vector<int>{12, 16, 20} : cfg.n_list;
  json rows = json::array();
  for (int n : ns) {
    const QuenchedResult q =
        quenched_free_energy(cfg.model, n, cfg.replicates, seed, cfg.placement, threads);
    json row = {{"n", n},
                {"beta", cfg.model.beta},
                {"seed", seed},
                {"log_z_per_n", q.mean},
                {"psi_rs", c.psi_rs},
                {"gap", std::abs(q.mean - c.psi_rs)},
                {"per_replicate", q.per_replicate}};
    if (q.stderr_of_mean) row["stderr"] = *q.stderr_of_mean;
    rows.push_back(std::move(row));
  }
  rep["results"] = {{"rows", rows}, {"psi_rs", c.psi_rs}};
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

inline json cmd_sphere(const ExperimentConfig& cfg, int threads = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const std::uint64_t seed = cfg.require_seed();
  const double psi_sphere = psi_rs_sphere(cfg.model);
  std::vector<int> ns = cfg.n_list.empty() ? std::vector<int>{2000} : cfg.n_list;
  json rows = json::array();
  for (int n : ns) {
    std::vector<double> vals(static_cast<size_t>(cfg.replicates));
    auto run_one = [&](int r) {
      const std::uint64_t seed_r =
          Rng::stream(seed, stream_tag::replicate, static_cast<std::uint64_t>(r)).next_u64();
      const CouplingSample sample = sample_model(cfg.model, n, seed_r, cfg.placement);
      vals[static_cast<size_t>(r)] = spherical_finite_n(sample, cfg.model);
    };
    if (threads <= 1 || cfg.replicates == 1) {
      for (int r = 0; r < cfg.replicates; ++r) run_one(r);
    } else {
      std::vector<std::thread> pool;
      const int nt = std::min(threads, cfg.replicates);
      for (int t = 0; t < nt; ++t)
        pool.emplace_back([&, t]() {
          for (int r = t; r < cfg.replicates; r += nt) run_one(r);
        });
      for (auto& th : pool) th.join();
    }
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(cfg.replicates);
    rows.push_back({{"n", n},
                    {"replicates", cfg.replicates},
                    {"mean_finite_n", mean},
                    {"psi_rs_sphere", psi_sphere},
                    {"gap", std::abs(mean - psi_sphere)},
                    {"per_replicate", vals}});
  }
  rep["results"] = {{"rows", rows}, {"psi_rs_sphere", psi_sphere}};
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

inline json cmd_hciz(const ExperimentConfig& cfg, int /*threads*/ = 1) {
  detail::Stopwatch sw;
  json rep = detail::report_envelope(cfg);
  const std::uint64_t seed = cfg.require_seed();
  const int n = cfg.n_list.empty() ? 400 : cfg.n_list.front();
  const double alpha = cfg.tol("hciz_alpha", 0.8);
  const double eps = cfg.tol("hciz_eps", 1e-3);
  const long draws = static_cast<long>(cfg.tol("hciz_draws", 400000.0));

  Eigen::VectorXd d(n), a(n), b(n);
  for (int i = 0; i < n; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    d(i) = cfg.model.spectral.quantile(p);
    b(i) = cfg.model.field.quantile(p);
  }
  a.setConstant(std::sqrt(alpha));

  const Rank1Exponent r1 = hciz_rank1(a, b, d, eps);
  Rng rng = Rng::stream(seed, stream_tag::monte_carlo);
  const double mc = hciz_rank1_mc(a, b, d, draws, rng);
  const double closed = cfg.model.spectral.r_integral(alpha);

  // decoupled rank-2 instance on the same spectrum
  Eigen::VectorXd aa = Eigen::VectorXd::Zero(n), cc = Eigen::VectorXd::Zero(n),
                  dd = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (i % 2 == 0)
      aa(i) = std::sqrt(2.0 * alpha);
    else
      cc(i) = std::sqrt(alpha);
  }
  const Rank2Exponent r2 = hciz_rank2(aa, b, cc, dd, d, eps);
  const Rank1Exponent r1a = hciz_rank1(aa, b, d, eps);
  const Rank1Exponent r1c = hciz_rank1(cc, dd, d, eps);

  rep["results"] = {
      {"n", n},
      {"alpha", alpha},
      {"draws", draws},
      {"rank1",
       {{"value", r1.value},
        {"gamma_opt", r1.gamma_opt},
        {"boundary_active", r1.boundary_active},
        {"derivative_at_opt", r1.derivative_at_opt},
        {"mc_estimate", mc},
        {"mc_gap", std::abs(mc - r1.value)},
        {"r_integral_limit", closed}}},
      {"rank2",
       {{"value", r2.value},
        {"gamma_opt", r2.gamma_opt},
        {"nu_opt", r2.nu_opt},
        {"rho_opt", r2.rho_opt},
        {"gradient_norm", r2.gradient.norm()},
        {"boundary_active", r2.boundary_active},
        {"optimizer_trace", rank2_trace_to_json(r2)},
        {"decoupled_rank1_sum", r1a.value + r1c.value},
        {"decoupling_gap", std::abs(r2.value - r1a.value - r1c.value)}}}};
  rep["timing"] = {{"seconds", sw.seconds()}};
  return rep;
}

// CSV projections of the JSON reports for tabular commands.
inline std::string report_to_csv(const json& rep) {
  CsvWriter csv;
  const std::string cmd = rep.at("command").get<std::string>();
  if (cmd == "enumerate") {
    csv.row({"n", "beta", "seed", "log_z_per_n", "stderr", "psi_rs", "gap"});
    for (const auto& row : rep.at("results").at("rows")) {
      csv.row({std::to_string(row.at("n").get<int>()),
               format_double(row.at("beta").get<double>()),
               std::to_string(row.at("seed").get<std::uint64_t>()),
               format_double(row.at("log_z_per_n").get<double>()),
               row.contains("stderr") ? format_double(row.at("stderr").get<double>()) : "",
               format_double(row.at("psi_rs").get<double>()),
               format_double(row.at("gap").get<double>())});
    }
    return csv.str();
  }
  if (cmd == "sphere") {
    csv.row({"n", "replicates", "mean_finite_n", "psi_rs_sphere", "gap"});
    for (const auto& row : rep.at("results").at("rows")) {
      csv.row({std::to_string(row.at("n").get<int>()),
               std::to_string(row.at("replicates").get<int>()),
               format_double(row.at("mean_finite_n").get<double>()),
               format_double(row.at("psi_rs_sphere").get<double>()),
               format_double(row.at("gap").get<double>())});
    }
    return csv.str();
  }
  if (cmd == "se") {
    const json& delta = rep.at("results").at("delta");
    for (const auto& row : delta) {
      std::vector<std::string> fields;
      for (const auto& v : row) fields.push_back(format_double(v.get<double>()));
      csv.row(fields);
    }
    return csv.str();
  }
  if (cmd == "rs") {
    const json& r = rep.at("results");
    csv.row({"q_star", "sigma_star_sq", "a_star", "lambda_star", "kappa_star", "delta_star",
             "psi_rs", "psi_rs_sphere"});
    csv.row({format_double(r.at("q_star").get<double>()),
             format_double(r.at("sigma_star_sq").get<double>()),
             format_double(r.at("a_star").get<double>()),
             format_double(r.at("lambda_star").get<double>()),
             format_double(r.at("kappa_star").get<double>()),
             format_double(r.at("delta_star").get<double>()),
             format_double(r.at("psi_rs").get<double>()),
             format_double(r.at("psi_rs_sphere").get<double>())});
    return csv.str();
  }
  throw ConfigError("csv export is not defined for command \"" + cmd + "\"");
}

}  // namespace oisg
