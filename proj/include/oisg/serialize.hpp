#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "oisg/ensemble.hpp"
#include "oisg/errors.hpp"
#include "oisg/field_law.hpp"
#include "oisg/rs_core.hpp"
#include "oisg/spectral_law.hpp"

namespace oisg {

using json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

inline const json& require_key(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
  return j.at(key);
}

}  // namespace detail

inline json spectral_to_json(const SpectralLaw& law) {
  json j;
  const bool affine = law.shift() != 0.0 || law.scale() != 1.0;
  json core;
  switch (law.kind()) {
    case SpectralLaw::Kind::semicircle: core = {{"type", "semicircle"}}; break;
    case SpectralLaw::Kind::rademacher: core = {{"type", "rademacher"}}; break;
    case SpectralLaw::Kind::discrete:
      core = {{"type", "discrete"}, {"values", law.values()}, {"weights", law.weights()}};
      break;
  }
  if (!affine) return core;
  return {{"type", "shifted_scaled"}, {"base", core}, {"shift", law.shift()}, {"scale", law.scale()}};
}

inline SpectralLaw spectral_from_json(const json& j) {
  const std::string where = "spectral law";
  const std::string type = detail::require_key(j, "type", where).get<std::string>();
  if (type == "semicircle") {
    detail::reject_unknown_keys(j, {"type"}, where);
    return SpectralLaw::semicircle();
  }
  if (type == "rademacher") {
    detail::reject_unknown_keys(j, {"type"}, where);
    return SpectralLaw::rademacher();
  }
  if (type == "discrete") {
    detail::reject_unknown_keys(j, {"type", "values", "weights"}, where);
    return SpectralLaw::discrete(
        detail::require_key(j, "values", where).get<std::vector<double>>(),
        detail::require_key(j, "weights", where).get<std::vector<double>>());
  }
  if (type == "shifted_scaled") {
    detail::reject_unknown_keys(j, {"type", "base", "shift", "scale"}, where);
    return SpectralLaw::shifted_scaled(
        spectral_from_json(detail::require_key(j, "base", where)),
        detail::require_key(j, "shift", where).get<double>(),
        detail::require_key(j, "scale", where).get<double>());
  }
  throw ConfigError(where + ": unknown type \"" + type + "\"");
}

inline json field_to_json(const FieldLaw& f) {
  switch (f.kind()) {
    case FieldLaw::Kind::point_mass: return {{"type", "point_mass"}, {"h", f.point_value()}};
    case FieldLaw::Kind::atoms:
      return {{"type", "discrete_field"}, {"values", f.values()}, {"weights", f.weights()}};
    case FieldLaw::Kind::gaussian:
      return {{"type", "gaussian_field"}, {"mean", f.gaussian_mean()}, {"sd", f.gaussian_sd()}};
  }
  return {};
}

inline FieldLaw field_from_json(const json& j) {
  const std::string where = "field law";
  const std::string type = detail::require_key(j, "type", where).get<std::string>();
  int order = 40;
  if (j.contains("quadrature_order")) order = j.at("quadrature_order").get<int>();
  if (type == "point_mass") {
    detail::reject_unknown_keys(j, {"type", "h", "quadrature_order"}, where);
    return FieldLaw::point_mass(detail::require_key(j, "h", where).get<double>())
        .with_quadrature_order(order);
  }
  if (type == "discrete_field") {
    detail::reject_unknown_keys(j, {"type", "values", "weights", "quadrature_order"}, where);
    return FieldLaw::atoms(detail::require_key(j, "values", where).get<std::vector<double>>(),
                           detail::require_key(j, "weights", where).get<std::vector<double>>())
        .with_quadrature_order(order);
  }
  if (type == "gaussian_field") {
    detail::reject_unknown_keys(j, {"type", "mean", "sd", "quadrature_order"}, where);
    return FieldLaw::gaussian(detail::require_key(j, "mean", where).get<double>(),
                              detail::require_key(j, "sd", where).get<double>())
        .with_quadrature_order(order);
  }
  throw ConfigError(where + ": unknown type \"" + type + "\"");
}

inline json rs_constants_to_json(const RSConstants& c) {
  return {{"q_star", c.q_star},
          {"sigma_star_sq", c.sigma_star_sq},
          {"a_star", c.a_star},
          {"lambda_star", c.lambda_star},
          {"kappa_star", c.kappa_star},
          {"delta_star", c.delta_star},
          {"psi_rs", c.psi_rs},
          {"psi_rs_sphere", c.psi_rs_sphere},
          {"solver",
           {{"iterations", c.solver.iterations},
            {"residual", c.solver.residual},
            {"multistart_delta", c.solver.multistart_delta},
            {"monotone", c.solver.monotone},
            {"regime_warning", c.solver.regime_warning}}}};
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Report>
inline json stationary_report_to_json(const Report& rep) {
  json grads = json::object();
  for (const auto& [key, val] : rep.gradients) grads[key] = val;
  return {{"value", rep.value}, {"gradients", grads}};
}

// FNV-1a over the canonical dump; embedded in every report so runs are
// traceable to their configuration.
inline std::string config_hash(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// RFC 4180 CSV: CRLF line endings, fields quoted when they contain
// separators or quotes.
class CsvWriter {
 public:
  void row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << escape(fields[i]);
    }
    out_ << "\r\n";
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string escape(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += "\"\"";
      else q += c;
    }
    return q + "\"";
  }

  std::ostringstream out_;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const size_t rows = j.size();
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const size_t cols = j.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t k = 0; k < cols; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j.at(i).at(k).get<double>();
  return m;
}

// Flat binary dump of iterates (64-bit doubles, row-major) plus a JSON
// sidecar describing the shape.
inline void dump_matrix_binary(const Eigen::MatrixXd& m, const std::string& path_prefix,
                               const std::string& name) {
  std::ofstream bin(path_prefix + name + ".bin", std::ios::binary);
  if (!bin) throw ConfigError("dump_matrix_binary: cannot open " + path_prefix + name + ".bin");
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  json sidecar = {{"name", name},
                  {"dtype", "float64"},
                  {"order", "row_major"},
                  {"shape", {m.rows(), m.cols()}}};
  std::ofstream side(path_prefix + name + ".json");
  side << sidecar.dump(2) << "\n";
}

}  // namespace oisg
