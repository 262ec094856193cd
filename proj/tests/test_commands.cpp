#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "oisg/commands.hpp"
#include "oisg/validation.hpp"

using namespace oisg;

namespace {

json base_model() {
  return {{"beta", 0.3},
          {"spectral", {{"type", "semicircle"}}},
          {"field", {{"type", "point_mass"}, {"h", 0.0}}}};
}

}  // namespace

TEST_CASE("config schema is strict", "[commands]") {
  json cfg = {{"command", "rs"}, {"model", base_model()}};
  CHECK_NOTHROW(parse_config(cfg));

  json extra = cfg;
  extra["unexpected"] = 1;
  CHECK_THROWS_AS(parse_config(extra), ConfigError);

  json bad_model = cfg;
  bad_model["model"]["typo"] = 1;
  CHECK_THROWS_AS(parse_config(bad_model), ConfigError);

  json bad_law = cfg;
  bad_law["model"]["spectral"] = {{"type", "cauchy"}};
  CHECK_THROWS_AS(parse_config(bad_law), ConfigError);

  json bad_placement = cfg;
  bad_placement["placement"] = "sorted";
  CHECK_THROWS_AS(parse_config(bad_placement), ConfigError);

  json mismatch = cfg;
  CHECK_THROWS_AS(parse_config(mismatch, "se"), ConfigError);

  // randomized commands demand a seed
  json amp = {{"command", "amp"}, {"model", base_model()}};
  CHECK_THROWS_AS(parse_config(amp), ConfigError);
  amp["seed"] = 7;
  CHECK_NOTHROW(parse_config(amp));
}

TEST_CASE("non-standardized spectra are standardized with bookkeeping", "[commands]") {
  json cfg = {{"command", "rs"},
              {"model",
               {{"beta", 0.2},
                {"spectral",
                 {{"type", "discrete"}, {"values", {3.0, 1.0}}, {"weights", {0.5, 0.5}}}},
                {"field", {{"type", "point_mass"}, {"h", 0.0}}}}}};
  const ExperimentConfig parsed = parse_config(cfg);
  CHECK(parsed.spectral_shift == Catch::Approx(2.0));
  CHECK(parsed.spectral_scale == Catch::Approx(1.0));
  CHECK(parsed.model.beta == Catch::Approx(0.2));
  CHECK(parsed.free_energy_shift() == Catch::Approx(0.2));  // beta*shift/2
  const json rep = cmd_rs(parsed);
  CHECK(rep.at("standardization").at("free_energy_shift").get<double>() ==
        Catch::Approx(0.2));
}

TEST_CASE("cmd_rs reproduces the closed-form free energy", "[commands]") {
  const ExperimentConfig cfg = parse_config({{"command", "rs"}, {"model", base_model()}});
  const json rep = cmd_rs(cfg);
  CHECK(rep.at("results").at("psi_rs").get<double>() ==
        Catch::Approx(std::log(2.0) + 0.0225).epsilon(1e-12));
  CHECK(rep.at("version").get<std::string>() == version_string);
  CHECK(rep.contains("config_hash"));
}

TEST_CASE("cmd_se exports the gram matrix", "[commands]") {
  json cfg = {{"command", "se"},
              {"model",
               {{"beta", 0.1},
                {"spectral", {{"type", "rademacher"}}},
                {"field", {{"type", "point_mass"}, {"h", 0.4}}}}},
              {"t_max", 4}};
  const json rep = cmd_se(parse_config(cfg));
  CHECK(rep.at("results").at("t").get<int>() == 4);
  CHECK(rep.at("results").at("delta").size() == 4);
  const std::string csv = report_to_csv(rep);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("cmd_enumerate rows carry the gap against psi_rs", "[commands]") {
  json cfg = {{"command", "enumerate"},
              {"model",
               {{"beta", 0.1},
                {"spectral", {{"type", "rademacher"}}},
                {"field", {{"type", "point_mass"}, {"h", 0.3}}}}},
              {"n_list", {8, 10}},
              {"replicates", 2},
              {"seed", 4}};
  const json rep = cmd_enumerate(parse_config(cfg), 2);
  const auto& rows = rep.at("results").at("rows");
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.at("gap").get<double>() ==
          Catch::Approx(std::abs(row.at("log_z_per_n").get<double>() -
                                 row.at("psi_rs").get<double>())));
    CHECK(row.contains("stderr"));
  }
  const std::string csv = report_to_csv(rep);
  CHECK(csv.rfind("n,beta,seed,log_z_per_n,stderr,psi_rs,gap\r\n", 0) == 0);
}

TEST_CASE("seeded reports are byte-identical without timing", "[commands]") {
  json cfg = {{"command", "sphere"},
              {"model",
               {{"beta", 0.3},
                {"spectral", {{"type", "semicircle"}}},
                {"field", {{"type", "gaussian_field"}, {"mean", 0.0}, {"sd", 0.5}}}}},
              {"n_list", {120}},
              {"replicates", 2},
              {"seed", 31}};
  auto strip = [](json j) {
    j.erase("timing");
    return j.dump();
  };
  const ExperimentConfig parsed = parse_config(cfg);
  CHECK(strip(cmd_sphere(parsed, 1)) == strip(cmd_sphere(parsed, 2)));
}

TEST_CASE("csv writer quotes per RFC 4180", "[commands]") {
  CsvWriter csv;
  csv.row({"plain", "with,comma", "with\"quote", "with\nnewline"});
  CHECK(csv.str() == "plain,\"with,comma\",\"with\"\"quote\",\"with\nnewline\"\r\n");
}

TEST_CASE("cmd_hciz reports both exponents", "[commands]") {
  json cfg = {{"command", "hciz"},
              {"model",
               {{"beta", 0.2},
                {"spectral", {{"type", "rademacher"}}},
                {"field", {{"type", "point_mass"}, {"h", 0.1}}}}},
              {"n_list", {100}},
              {"seed", 8},
              {"tolerances", {{"hciz_draws", 20000.0}}}};
  const json rep = cmd_hciz(parse_config(cfg));
  CHECK(rep.at("results").at("rank1").contains("mc_gap"));
  CHECK(rep.at("results").at("rank2").at("decoupling_gap").get<double>() <= 1e-8);
}

TEST_CASE("amp command writes iterate dumps on request", "[commands]") {
  const std::string prefix = "/tmp/oisg_dump_";
  json cfg = {{"command", "amp"},
              {"model",
               {{"beta", 0.15},
                {"spectral", {{"type", "rademacher"}}},
                {"field", {{"type", "gaussian_field"}, {"mean", 0.2}, {"sd", 0.4}}}}},
              {"n_list", {50}},
              {"t_max", 2},
              {"replicates", 1},
              {"seed", 12},
              {"output", {{"dump_iterates", prefix}}}};
  const json rep = cmd_amp(parse_config(cfg));
  CHECK(rep.at("results").at("per_n").at(0).at("n").get<int>() == 50);
  std::ifstream side(prefix + "x.json");
  REQUIRE(side.good());
  json sidecar;
  side >> sidecar;
  CHECK(sidecar.at("shape").at(0).get<int>() == 50);
  CHECK(sidecar.at("shape").at(1).get<int>() == 2);
  std::ifstream bin(prefix + "x.bin", std::ios::binary | std::ios::ate);
  REQUIRE(bin.good());
  CHECK(bin.tellg() == 50 * 2 * 8);
}

TEST_CASE("cli binary round trip", "[commands]") {
#ifdef OISG_CLI_PATH
  const std::string cfg_path = "/tmp/oisg_cli_test_cfg.json";
  {
    std::ofstream out(cfg_path);
    out << json({{"command", "rs"}, {"model", base_model()}}).dump();
  }
  const std::string out_path = "/tmp/oisg_cli_test_out.json";
  const std::string cmd = std::string(OISG_CLI_PATH) + " rs --config " + cfg_path +
                          " --out " + out_path;
  REQUIRE(std::system(cmd.c_str()) == 0);
  std::ifstream in(out_path);
  json rep;
  in >> rep;
  CHECK(rep.at("results").at("psi_rs").get<double>() ==
        Catch::Approx(std::log(2.0) + 0.0225).epsilon(1e-12));

  // config errors exit with code 2
  const std::string bad = std::string(OISG_CLI_PATH) + " rs --config /nonexistent.json 2>/dev/null";
  const int rc = std::system(bad.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
#endif
}
