#pragma once

// YAML run configuration. Unknown keys are rejected; every diagnostic
// carries the 1-based line and column of the offending node.
//
//   unit_scale: 1.0            # internal frequency = unit_scale * user frequency
//   threshold: 1.0e-3
//   quadrature: {rel_tol: 1e-10, abs_tol: 1e-14, max_subdivisions: 200, policy: truncate}
//   output: {path: out.json, format: json}
//   modes:
//     - {type: gaussian, omega0: 10, sigma: 1, phi: 0, beta: 0}
//     - type: comb
//       teeth: [{center: 10, width: 1, weight: [1, 0]}]
//     - {type: sampled, omega: [...], amplitude: [[re, im], ...], interpolation: cubic}
//   parameter_scan:
//     template: {modes: 2, omega0_over_sigma: 10, sigma: 1, sigma_phi: 0, separation_over_sigma: 20}
//     axis1: {name: sigma_phi, values: [0, 1, 5]}
//     axis2: {name: omega0_over_sigma, values: [10]}
//     chi: 1.002

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qredshift/error.hpp"
#include "qredshift/quad.hpp"
#include "qredshift/spectra.hpp"
#include "qredshift/validity.hpp"

namespace qredshift::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& origin, int line, int column, const std::string& message)
      : std::runtime_error(locate(origin, line, column) + ": " + message), line_(line), column_(column) {}

  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] int column() const { return column_; }

 private:
  // line 0 means the error has no position inside the file
  static std::string locate(const std::string& origin, int line, int column) {
    if (line <= 0) return origin;
    return origin + ":" + std::to_string(line) + ":" + std::to_string(column);
  }

  int line_;
  int column_;
};

enum class Format { json, csv };

inline Format format_from_string(std::string_view s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  throw Error(ErrorCode::invalid_argument, "format must be json or csv, got '" + std::string(s) + "'");
}

inline std::string_view to_string(Format f) { return f == Format::json ? "json" : "csv"; }

struct ModeEntry {
  std::string name;
  spectra::SpectralMode mode;
};

struct ParameterScan {
  validity::BasisTemplate base;
  validity::Parameter axis1 = validity::Parameter::sigma_phi;
  std::vector<double> values1{0.0};
  validity::Parameter axis2 = validity::Parameter::omega0_over_sigma;
  std::vector<double> values2{10.0};
  double chi = 1.0;
};

struct Config {
  std::string origin;
  std::string text;  // raw bytes, for the digest
  double unit_scale = 1.0;
  std::optional<double> threshold;
  quad::Settings quadrature;
  std::string output_path;
  Format format = Format::json;
  std::vector<ModeEntry> modes;
  std::optional<ParameterScan> parameter_scan;
};

/// FNV-1a, 64 bit, as 16 lowercase hex digits.
inline std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& message) const {
    const auto mark = node.Mark();
    throw ConfigError(origin_, mark.line + 1, mark.column + 1, message);
  }

  void require_map(const YAML::Node& node, std::string_view what) const {
    if (!node.IsMap()) fail(node, std::string(what) + " must be a mapping");
  }

  void only_keys(const YAML::Node& node, std::string_view what, std::initializer_list<std::string_view> allowed) const {
    require_map(node, what);
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      bool ok = false;
      for (const auto a : allowed) ok = ok || key == a;
      if (!ok) {
        std::string list;
        for (const auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(kv.first, "unknown key '" + key + "' in " + std::string(what) + " (allowed: " + list + ")");
      }
    }
  }

  double number(const YAML::Node& node, std::string_view what) const {
    if (!node.IsScalar()) fail(node, std::string(what) + " must be a number");
    const auto s = node.Scalar();
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      fail(node, std::string(what) + " must be a number, got '" + s + "'");
    }
    if (!std::isfinite(v)) fail(node, std::string(what) + " must be finite");
    return v;
  }

  double number_or(const YAML::Node& parent, const char* key, double fallback) const {
    const auto n = parent[key];
    return n ? number(n, key) : fallback;
  }

  double required_number(const YAML::Node& parent, const char* key, std::string_view what) const {
    const auto n = parent[key];
    if (!n) fail(parent, std::string(what) + " needs '" + key + "'");
    return number(n, key);
  }

  bool boolean(const YAML::Node& node, std::string_view what) const {
    bool v = false;
    if (!node.IsScalar() || !YAML::convert<bool>::decode(node, v)) fail(node, std::string(what) + " must be true or false");
    return v;
  }

  std::string string(const YAML::Node& node, std::string_view what) const {
    if (!node.IsScalar()) fail(node, std::string(what) + " must be a string");
    return node.Scalar();
  }

  complex complex_number(const YAML::Node& node, std::string_view what) const {
    if (node.IsScalar()) return {number(node, what), 0.0};
    if (node.IsSequence() && node.size() == 2) return {number(node[0], what), number(node[1], what)};
    fail(node, std::string(what) + " must be a number or [re, im]");
  }

  std::vector<double> numbers(const YAML::Node& node, std::string_view what) const {
    if (!node.IsSequence()) fail(node, std::string(what) + " must be a list of numbers");
    std::vector<double> out;
    for (const auto& v : node) out.push_back(number(v, what));
    return out;
  }

  [[nodiscard]] const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
};

inline spectra::SpectralMode parse_mode(const Reader& r, const YAML::Node& node, double unit,
                                        const quad::Settings& settings) {
  r.require_map(node, "mode");
  const auto type_node = node["type"];
  if (!type_node) r.fail(node, "mode needs 'type' (gaussian, comb or sampled)");
  const auto type = r.string(type_node, "type");
  try {
    if (type == "gaussian") {
      r.only_keys(node, "gaussian mode", {"type", "name", "omega0", "sigma", "phi", "beta", "allow_near_origin"});
      spectra::GaussianChirp g;
      g.omega0 = unit * r.required_number(node, "omega0", "gaussian mode");
      g.sigma = unit * r.required_number(node, "sigma", "gaussian mode");
      g.phi = r.number_or(node, "phi", 0.0) / unit;
      g.beta = r.number_or(node, "beta", 0.0) / (unit * unit);
      if (node["allow_near_origin"]) g.allow_near_origin = r.boolean(node["allow_near_origin"], "allow_near_origin");
      auto mode = spectra::SpectralMode::gaussian(g);
      return g.allow_near_origin ? spectra::normalize(mode, settings) : mode;
    }
    if (type == "comb") {
      r.only_keys(node, "comb mode", {"type", "name", "teeth", "phase_slope", "allow_near_origin"});
      spectra::Comb c;
      const auto teeth = node["teeth"];
      if (!teeth || !teeth.IsSequence() || teeth.size() == 0) r.fail(node, "comb mode needs a non-empty 'teeth' list");
      for (const auto& t : teeth) {
        r.only_keys(t, "comb tooth", {"center", "width", "weight"});
        spectra::Tooth tooth;
        tooth.center = unit * r.required_number(t, "center", "comb tooth");
        tooth.width = unit * r.required_number(t, "width", "comb tooth");
        tooth.weight = t["weight"] ? r.complex_number(t["weight"], "weight") : complex{1.0, 0.0};
        c.teeth.push_back(tooth);
      }
      c.phase_slope = r.number_or(node, "phase_slope", 0.0) / unit;
      if (node["allow_near_origin"]) c.allow_near_origin = r.boolean(node["allow_near_origin"], "allow_near_origin");
      return spectra::normalize(spectra::SpectralMode::comb(std::move(c)), settings);
    }
    if (type == "sampled") {
      r.only_keys(node, "sampled mode", {"type", "name", "omega", "amplitude", "interpolation"});
      if (!node["omega"] || !node["amplitude"]) r.fail(node, "sampled mode needs 'omega' and 'amplitude'");
      auto omega = r.numbers(node["omega"], "omega");
      for (auto& w : omega) w *= unit;
      const auto amp_node = node["amplitude"];
      if (!amp_node.IsSequence()) r.fail(amp_node, "amplitude must be a list");
      std::vector<complex> amp;
      for (const auto& a : amp_node) amp.push_back(r.complex_number(a, "amplitude"));
      auto rule = spectra::Interpolation::cubic;
      if (node["interpolation"]) {
        const auto s = r.string(node["interpolation"], "interpolation");
        if (s == "linear") {
          rule = spectra::Interpolation::linear;
        } else if (s != "cubic") {
          r.fail(node["interpolation"], "interpolation must be cubic or linear");
        }
      }
      return spectra::normalize(spectra::SpectralMode::sampled(std::move(omega), amp, rule), settings);
    }
  } catch (const Error& e) {
    r.fail(node, e.what());
  }
  r.fail(type_node, "unknown mode type '" + type + "' (expected gaussian, comb or sampled)");
}

inline quad::Settings parse_quadrature(const Reader& r, const YAML::Node& node) {
  r.only_keys(node, "quadrature", {"rel_tol", "abs_tol", "max_subdivisions", "policy"});
  quad::Settings s;
  s.rel_tol = r.number_or(node, "rel_tol", s.rel_tol);
  s.abs_tol = r.number_or(node, "abs_tol", s.abs_tol);
  const double subdivisions = r.number_or(node, "max_subdivisions", s.max_subdivisions);
  if (subdivisions < 0 || subdivisions != std::floor(subdivisions)) {
    r.fail(node["max_subdivisions"], "max_subdivisions must be a non-negative integer");
  }
  s.max_subdivisions = static_cast<int>(subdivisions);
  if (node["policy"]) {
    const auto p = r.string(node["policy"], "policy");
    if (p == "truncate") {
      s.policy = quad::SupportPolicy::truncate;
    } else if (p == "map_half_line") {
      s.policy = quad::SupportPolicy::map_half_line;
    } else {
      r.fail(node["policy"], "policy must be truncate or map_half_line");
    }
  }
  try {
    s.validate();
  } catch (const Error& e) {
    r.fail(node, e.what());
  }
  return s;
}

inline ParameterScan parse_parameter_scan(const Reader& r, const YAML::Node& node) {
  r.only_keys(node, "parameter_scan", {"template", "axis1", "axis2", "chi"});
  ParameterScan out;
  if (const auto t = node["template"]) {
    r.only_keys(t, "template", {"modes", "omega0_over_sigma", "sigma", "sigma_phi", "separation_over_sigma"});
    const double modes = r.number_or(t, "modes", 2.0);
    if (modes != 1.0 && modes != 2.0) r.fail(t["modes"], "template modes must be 1 or 2");
    out.base.modes = static_cast<std::size_t>(modes);
    out.base.omega0_over_sigma = r.number_or(t, "omega0_over_sigma", out.base.omega0_over_sigma);
    out.base.sigma = r.number_or(t, "sigma", out.base.sigma);
    out.base.sigma_phi = r.number_or(t, "sigma_phi", out.base.sigma_phi);
    out.base.separation_over_sigma = r.number_or(t, "separation_over_sigma", out.base.separation_over_sigma);
  }
  auto axis = [&](const char* key, validity::Parameter& p, std::vector<double>& values) {
    const auto a = node[key];
    if (!a) r.fail(node, std::string("parameter_scan needs '") + key + "'");
    r.only_keys(a, key, {"name", "values"});
    if (!a["name"] || !a["values"]) r.fail(a, std::string(key) + " needs 'name' and 'values'");
    try {
      p = validity::parameter_from_string(r.string(a["name"], "name"));
    } catch (const Error& e) {
      r.fail(a["name"], e.what());
    }
    values = r.numbers(a["values"], "values");
    if (values.empty()) r.fail(a["values"], "values must not be empty");
  };
  axis("axis1", out.axis1, out.values1);
  axis("axis2", out.axis2, out.values2);
  out.chi = r.number_or(node, "chi", 1.0);
  if (!(out.chi > 0.0)) r.fail(node["chi"], "chi must be positive");
  return out;
}

}  // namespace detail

/// Parses and validates a configuration. Mode constructors run here, so
/// every spectral invariant is enforced before any command starts.
inline Config parse_config_text(const std::string& text, const std::string& origin) {
  detail::Reader r(origin);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(origin, e.mark.line + 1, e.mark.column + 1, e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError(origin, 1, 1, "configuration is empty");
  r.only_keys(root, "configuration", {"unit_scale", "threshold", "quadrature", "output", "modes", "parameter_scan"});

  Config cfg;
  cfg.origin = origin;
  cfg.text = text;
  cfg.unit_scale = r.number_or(root, "unit_scale", 1.0);
  if (!(cfg.unit_scale > 0.0)) r.fail(root["unit_scale"], "unit_scale must be positive");
  if (root["threshold"]) {
    cfg.threshold = r.number(root["threshold"], "threshold");
    if (!(*cfg.threshold > 0.0)) r.fail(root["threshold"], "threshold must be positive");
  }
  if (root["quadrature"]) cfg.quadrature = detail::parse_quadrature(r, root["quadrature"]);
  if (const auto out = root["output"]) {
    r.only_keys(out, "output", {"path", "format"});
    if (out["path"]) cfg.output_path = r.string(out["path"], "path");
    if (out["format"]) {
      try {
        cfg.format = format_from_string(r.string(out["format"], "format"));
      } catch (const Error& e) {
        r.fail(out["format"], e.what());
      }
    }
  }
  if (const auto modes = root["modes"]) {
    if (!modes.IsSequence()) r.fail(modes, "modes must be a list");
    std::size_t index = 0;
    for (const auto& m : modes) {
      ModeEntry entry{"mode" + std::to_string(index), detail::parse_mode(r, m, cfg.unit_scale, cfg.quadrature)};
      if (m["name"]) entry.name = r.string(m["name"], "name");
      cfg.modes.push_back(std::move(entry));
      ++index;
    }
  }
  if (root["parameter_scan"]) cfg.parameter_scan = detail::parse_parameter_scan(r, root["parameter_scan"]);
  return cfg;
}

inline Config parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, 0, "cannot read configuration file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace qredshift::config
