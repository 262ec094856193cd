#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "oisg/commands.hpp"
#include "oisg/validation.hpp"
#include "oisg/version.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_path;
  std::string format;
};

void add_common(CLI::App* sub, GlobalFlags& flags) {
  sub->add_option("--config", flags.config_path, "JSON experiment config")->required();
  sub->add_option("--seed", flags.seed, "override the config seed");
  sub->add_option("--threads", flags.threads, "worker thread cap")->check(CLI::PositiveNumber);
  sub->add_option("--out", flags.out_path, "write the report here instead of stdout");
  sub->add_option("--format", flags.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
}

void emit(const oisg::json& report, const oisg::ExperimentConfig& cfg, const GlobalFlags& flags) {
  const std::string format = flags.format.empty() ? cfg.out_format : flags.format;
  const std::string path = flags.out_path.empty() ? cfg.out_path : flags.out_path;
  std::string payload;
  if (format == "csv")
    payload = oisg::report_to_csv(report);
  else
    payload = report.dump(2) + "\n";
  if (path.empty()) {
    std::cout << payload;
  } else {
    std::ofstream out(path);
    if (!out) throw oisg::ConfigError("cannot open output path " + path);
    out << payload;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("oisg ") + oisg::version_string +
               " - replica-symmetric free energies, AMP dynamics, and HCIZ "
               "integrals for orthogonally invariant spin glasses"};
  app.require_subcommand(1);

  struct SubSpec {
    const char* name;
    const char* help;
  };
  const SubSpec subs[] = {
      {"rs", "solve the RS fixed point and report all model constants"},
      {"se", "state-evolution Gram matrix and its convergence report"},
      {"amp", "finite-n AMP runs: Gram deviations, TAP residuals, freeness"},
      {"enumerate", "exact 2^n enumeration vs the RS free energy"},
      {"sphere", "finite-n spherical free energy vs its RS value"},
      {"hciz", "rank-1/2 HCIZ exponents with Monte Carlo cross-check"},
      {"validate", "run the full acceptance suite (exit 0 iff green)"},
  };
  std::map<std::string, GlobalFlags> flags;
  for (const SubSpec& s : subs) add_common(app.add_subcommand(s.name, s.help), flags[s.name]);

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  const GlobalFlags& f = flags[cmd];

  try {
    const oisg::ExperimentConfig cfg = oisg::load_config_file(f.config_path, cmd, f.seed);
    oisg::json report;
    if (cmd == "rs") report = oisg::cmd_rs(cfg, f.threads);
    else if (cmd == "se") report = oisg::cmd_se(cfg, f.threads);
    else if (cmd == "amp") report = oisg::cmd_amp(cfg, f.threads);
    else if (cmd == "enumerate") report = oisg::cmd_enumerate(cfg, f.threads);
    else if (cmd == "sphere") report = oisg::cmd_sphere(cfg, f.threads);
    else if (cmd == "hciz") report = oisg::cmd_hciz(cfg, f.threads);
    else if (cmd == "validate") {
      report = oisg::cmd_validate(cfg, f.threads);
      for (const auto& c : report.at("results").at("criteria")) {
        std::fprintf(stderr, "[%s] criterion %d: %s (%.1fs) %s\n",
                     c.at("pass").get<bool>() ? (c.at("warn").get<bool>() ? "WARN" : "PASS")
                                              : "FAIL",
                     c.at("id").get<int>(), c.at("name").get<std::string>().c_str(),
                     c.at("seconds").get<double>(), c.at("detail").get<std::string>().c_str());
      }
      emit(report, cfg, f);
      return report.at("results").at("all_pass").get<bool>() ? 0 : 1;
    }
    emit(report, cfg, f);
    return 0;
  } catch (const oisg::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const oisg::DomainError& e) {
    std::fprintf(stderr, "numeric domain error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
