#pragma once

// Command-line front end: subcommand dispatch, output documents and exit
// codes (0 ok, 2 configuration or input error, 3 numerical non-convergence,
// 4 completion failure under --require-unitary).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qredshift/config.hpp"
#include "qredshift/mixer.hpp"
#include "qredshift/overlap.hpp"
#include "qredshift/validity.hpp"

#ifndef QREDSHIFT_VERSION
#define QREDSHIFT_VERSION "0.0.0"
#endif

namespace qredshift::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalError = 3, kCompletionFailed = 4 };

// ---------------------------------------------------------------------------
// Serialization. Floating-point values are strings with 17 significant
// digits, so they survive any JSON parser unchanged.

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json num(complex z) { return json{{"re", num(z.real())}, {"im", num(z.imag())}}; }

inline json num(const mixer::Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(complex(m(i, j))));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json num(const std::vector<double>& v) {
  json out = json::array();
  for (const double x : v) out.push_back(num(x));
  return out;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct OutputDocument {
  std::string command;
  std::string config_digest;
  json payload;
  std::string timestamp = utc_timestamp();

  [[nodiscard]] json to_json() const {
    return json{{"tool_version", QREDSHIFT_VERSION},
                {"config_digest", config_digest},
                {"command", command},
                {"timestamp", timestamp},
                {"payload", payload}};
  }
};

/// Flattens nested objects and arrays into `field,value` rows.
inline void flatten(const json& node, const std::string& prefix, std::string& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) flatten(node[i], prefix + "." + std::to_string(i), out);
  } else if (node.is_string()) {
    out += prefix + "," + node.get<std::string>() + "\n";
  } else {
    out += prefix + "," + node.dump() + "\n";
  }
}

/// Deterministic bytes: keys sorted, LF line endings, no locale dependence.
/// CSV carries only the payload; `table` overrides the generic flattening.
inline std::string emit(const OutputDocument& doc, config::Format format, const std::string& table = {}) {
  if (format == config::Format::json) return doc.to_json().dump(2) + "\n";
  if (!table.empty()) return table;
  std::string out = "field,value\n";
  flatten(doc.payload, "", out);
  return out;
}

// ---------------------------------------------------------------------------
// Options shared by the subcommands.

struct Options {
  std::string config_path;
  std::vector<double> chi;
  std::vector<double> chi_squared;
  std::string direction = "alice-to-bob";
  std::optional<double> rel_tol;
  std::optional<double> abs_tol;
  std::optional<int> max_subdivisions;
  std::optional<double> threshold;
  std::optional<std::string> format;
  std::string output;
  std::string plot;
  std::size_t workers = 1;
  std::size_t mode = 0;
  bool all_modes = false;
  bool require_unitary = false;
  bool generator = false;
  std::vector<double> epsilon;
  double lo = 1.0;
  double hi = 3.0;
  double chi_min = 0.5;
  double chi_max = 2.0;
  std::size_t points = 61;
  bool log_grid = false;
  std::vector<double> chi_list;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  const Options& opt;
  const config::Config& cfg;
  quad::Settings settings;
  std::size_t workers = 1;
  double threshold = 1e-3;
  std::ostream& err;

  [[nodiscard]] Direction direction() const {
    if (opt.direction == "alice-to-bob") return Direction::alice_to_bob;
    if (opt.direction == "bob-to-alice") return Direction::bob_to_alice;
    throw UsageError("--direction must be alice-to-bob or bob-to-alice");
  }

  /// Requested redshift factors before the direction is applied.
  [[nodiscard]] std::vector<RedshiftFactor> raw_chis() const {
    if (!opt.chi.empty() && !opt.chi_squared.empty()) throw UsageError("give either --chi or --chi-squared, not both");
    if (opt.chi.empty() && opt.chi_squared.empty()) throw UsageError("one of --chi or --chi-squared is required");
    std::vector<RedshiftFactor> out;
    for (const double c : opt.chi) out.emplace_back(c);
    for (const double c2 : opt.chi_squared) out.push_back(RedshiftFactor::from_chi_squared(c2));
    return out;
  }

  [[nodiscard]] std::vector<RedshiftFactor> chis() const {
    auto out = raw_chis();
    for (auto& c : out) c = oriented(c, direction());
    return out;
  }

  [[nodiscard]] RedshiftFactor chi() const {
    const auto all = chis();
    if (all.size() != 1) throw UsageError("this command takes a single redshift factor");
    return all.front();
  }

  [[nodiscard]] std::vector<const config::ModeEntry*> modes() const {
    if (cfg.modes.empty()) throw UsageError("the configuration defines no modes");
    std::vector<const config::ModeEntry*> out;
    if (opt.all_modes) {
      for (const auto& m : cfg.modes) out.push_back(&m);
      return out;
    }
    if (opt.mode >= cfg.modes.size()) {
      throw UsageError("--mode " + std::to_string(opt.mode) + " out of range (" + std::to_string(cfg.modes.size()) +
                       " modes)");
    }
    out.push_back(&cfg.modes[opt.mode]);
    return out;
  }

  [[nodiscard]] mixer::BasisSet basis() const {
    if (cfg.modes.empty()) throw UsageError("the configuration defines no modes");
    std::vector<spectra::SpectralMode> raw;
    for (const auto& m : cfg.modes) raw.push_back(m.mode);
    return mixer::gram_schmidt(raw, settings);
  }

  /// Frequencies leave the tool in user units.
  [[nodiscard]] double user_frequency(double w) const { return w / cfg.unit_scale; }
  [[nodiscard]] double user_time(double t) const { return t * cfg.unit_scale; }
};

inline json overlap_json(const overlap::OverlapResult& r) {
  return json{{"chi", num(r.chi)},
              {"delta", num(r.delta)},
              {"magnitude", num(r.magnitude)},
              {"phase", num(r.phase)},
              {"error_estimate", num(r.error_estimate)}};
}

inline json functionals_json(const overlap::SpectralFunctionals& f, const Context& ctx) {
  return json{{"K", num(f.K)},
              {"kappa", num(f.kappa)},
              {"mu_squared", num(f.mu_squared)},
              {"kappa_opt", num(f.kappa_opt)},
              {"omega_bar", num(ctx.user_frequency(f.omega_bar))},
              {"variance_term", num(f.variance_term)},
              {"gradient_term", num(f.gradient_term)},
              {"polar_available", f.polar_available},
              {"route_gap", num(f.route_gap)},
              {"c2", num(overlap::overlap_perturbative(f, 0.0).c2)}};
}

inline json deficit_json(const mixer::GramDeficit& g) {
  return json{{"G", num(g.G)},
              {"eigenvalues", num(g.eigenvalues)},
              {"residual", num(g.rank1_residual)},
              {"relative_residual", num(g.relative_residual)},
              {"min_eig", num(g.min_eigenvalue)},
              {"max_eig", num(g.max_eigenvalue)},
              {"hermiticity_error", num(g.hermiticity_error)},
              {"rank_ambiguous", g.rank_ambiguous}};
}

// ---------------------------------------------------------------------------
// Subcommands. Each fills the payload and returns an exit code.

/// One result stays a flat object; several become {"results": [...]}.
inline json collect(json results) {
  if (results.size() == 1) return std::move(results.front());
  return json{{"results", std::move(results)}};
}

inline json overlap_point(const Context& ctx, const config::ModeEntry& entry, RedshiftFactor chi) {
  const auto exact = overlap::overlap_exact(entry.mode, chi, ctx.settings);
  json out = overlap_json(exact);
  out["mode"] = entry.name;
  out["chi_squared"] = num(chi.chi_squared());
  if (const auto* g = std::get_if<spectra::GaussianChirp>(&entry.mode.variant());
      g && g->beta == 0.0 && !g->allow_near_origin) {
    const auto closed = overlap::gaussian_closed_form(g->omega0, g->sigma, g->phi, chi);
    out["closed_form"] = overlap_json(closed);
    out["closed_form_gap"] = num(std::abs(closed.magnitude - exact.magnitude));
  }
  return out;
}

inline int cmd_overlap(const Context& ctx, json& payload) {
  json results = json::array();
  const auto chis = ctx.chis();
  for (const auto* entry : ctx.modes()) {
    for (const auto chi : chis) results.push_back(overlap_point(ctx, *entry, chi));
  }
  payload = collect(std::move(results));
  return kOk;
}

/// Least-squares slope of log y against log x over the positive samples.
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly, ++n;
  }
  if (n < 2) return std::nan("");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline json functionals_point(const Context& ctx, const config::ModeEntry& entry) {
  const auto f = overlap::functionals(entry.mode, ctx.settings);
  json out = functionals_json(f, ctx);
  out["mode"] = entry.name;
  if (ctx.opt.epsilon.empty()) return out;

  json rows = json::array();
  std::vector<double> eps_abs, law_gap;
  for (const double eps : ctx.opt.epsilon) {
    const auto p = overlap::overlap_perturbative(f, eps);
    if (p.outside_guard) {
      ctx.err << "warning: |epsilon| = " << std::abs(eps) << " is outside the perturbative guard "
              << overlap::kPerturbativeGuard << "\n";
    }
    json row{{"epsilon", num(eps)},
             {"delta_poly", num(p.delta_poly)},
             {"delta_exp", num(p.delta_exp)},
             {"magnitude_law", num(p.magnitude_law())},
             {"outside_guard", p.outside_guard}};
    if (1.0 + eps > 0.0) {
      const auto exact = overlap::overlap_exact(entry.mode, RedshiftFactor(1.0 + eps), ctx.settings);
      row["exact"] = overlap_json(exact);
      row["law_gap"] = num(std::abs(exact.magnitude - p.magnitude_law()));
      eps_abs.push_back(std::abs(eps));
      law_gap.push_back(std::abs(exact.magnitude - p.magnitude_law()));
    }
    rows.push_back(std::move(row));
  }
  out["perturbative"] = std::move(rows);
  if (eps_abs.size() >= 2) out["law_gap_slope"] = num(log_log_slope(eps_abs, law_gap));
  return out;
}

inline int cmd_functionals(const Context& ctx, json& payload) {
  json results = json::array();
  for (const auto* entry : ctx.modes()) results.push_back(functionals_point(ctx, *entry));
  payload = collect(std::move(results));
  return kOk;
}

inline int cmd_matrix(const Context& ctx, json& payload) {
  const auto chi = ctx.chi();
  const auto basis = ctx.basis();
  const auto a = mixer::overlap_block(basis, chi, ctx.settings, ctx.workers);
  const auto completion = mixer::complete_with_environment(a, ctx.threshold, chi.chi());
  const bool failed = std::holds_alternative<mixer::GramDeficit>(completion);
  const auto& gd = failed ? std::get<mixer::GramDeficit>(completion) : std::get<mixer::MixerMatrix>(completion).gram;
  const auto u = failed ? mixer::forced_completion(a, gd, chi.chi()) : std::get<mixer::MixerMatrix>(completion);
  payload = json{{"chi", num(chi.chi())},
                 {"modes", basis.size()},
                 {"threshold", num(ctx.threshold)},
                 {"failure", failed},
                 {"completed", !failed && u.completed},
                 {"deficit", num(u.deficit)},
                 {"completion_residual", num(gd.rank1_residual)},
                 {"overlap_block", num(a)},
                 {"entries", num(u.entries)},
                 {"gram_deficit", deficit_json(gd)}};
  if (ctx.opt.generator) {
    const auto gen = mixer::perturbative_generator(basis, {1e-4, 2e-4, 4e-4}, ctx.threshold, ctx.settings, ctx.workers);
    double max_real_diag = 0.0;
    for (Eigen::Index i = 0; i < gen.M.rows(); ++i) max_real_diag = std::max(max_real_diag, std::abs(gen.M(i, i).real()));
    payload["generator"] = json{{"M", num(gen.M)},
                                {"anti_hermiticity_defect", num(gen.anti_hermiticity_defect)},
                                {"max_real_diagonal", num(max_real_diag)},
                                {"norm", num(gen.M.norm())},
                                {"epsilons", num(gen.epsilons)}};
  }
  if (failed) {
    ctx.err << "completion failed: residual " << gd.rank1_residual << " exceeds threshold " << ctx.threshold << "\n";
    if (ctx.opt.require_unitary) return kCompletionFailed;
  }
  return kOk;
}

inline std::vector<double> chi_grid(const Options& opt) {
  if (!opt.chi_list.empty()) return opt.chi_list;
  if (opt.points < 1) throw UsageError("--points must be at least 1");
  if (!(opt.chi_min > 0.0) || !(opt.chi_max >= opt.chi_min)) throw UsageError("need 0 < --chi-min <= --chi-max");
  return opt.log_grid ? validity::log_grid(opt.chi_min, opt.chi_max, opt.points)
                      : validity::linear_grid(opt.chi_min, opt.chi_max, opt.points);
}

inline int cmd_scan(const Context& ctx, json& payload, std::string& table) {
  auto grid = chi_grid(ctx.opt);
  if (ctx.direction() == Direction::bob_to_alice) {
    for (auto& c : grid) c = 1.0 / c;
    std::reverse(grid.begin(), grid.end());
  }
  const auto records = validity::scan_chi(ctx.basis(), grid, ctx.threshold, ctx.settings, ctx.workers);
  json rows = json::array();
  bool all_converged = true;
  for (const auto& r : records) {
    json row{{"chi", num(r.chi)},
             {"residual", num(r.residual)},
             {"relative_residual", num(r.relative_residual)},
             {"deficit", num(r.deficit)},
             {"min_eig", num(r.min_eigenvalue)},
             {"magnitudes", num(r.magnitudes)},
             {"converged", r.converged},
             {"completes", r.completes}};
    if (!r.error.empty()) row["error"] = r.error;
    all_converged = all_converged && r.converged;
    rows.push_back(std::move(row));
  }
  payload = json{{"threshold", num(ctx.threshold)}, {"records", std::move(rows)}};
  table = validity::scan_csv(records);
  if (!ctx.opt.plot.empty()) {
    std::ofstream plot(ctx.opt.plot, std::ios::binary);
    if (!plot) throw UsageError("cannot write plot file " + ctx.opt.plot);
    plot << validity::scan_plot_data(records);
  }
  if (!all_converged) ctx.err << "warning: some scan points did not converge\n";
  return kOk;
}

inline int cmd_boundary(const Context& ctx, json& payload) {
  const auto b = validity::find_boundary(ctx.basis(), ctx.threshold, ctx.opt.lo, ctx.opt.hi, ctx.settings, ctx.workers);
  payload = json{{"chi_star", num(b.chi_star)},
                 {"lo", num(b.lo)},
                 {"hi", num(b.hi)},
                 {"iterations", b.iterations},
                 {"threshold", num(b.threshold)},
                 {"monotone_in_bracket", b.monotone_in_bracket}};
  return kOk;
}

inline int cmd_params(const Context& ctx, json& payload, std::string& table) {
  if (!ctx.cfg.parameter_scan) throw UsageError("the configuration has no parameter_scan section");
  const auto& ps = *ctx.cfg.parameter_scan;
  RedshiftFactor chi(ps.chi);
  if (!ctx.opt.chi.empty() || !ctx.opt.chi_squared.empty()) chi = ctx.chi();
  const auto records = validity::scan_parameters(ps.base, ps.axis1, ps.values1, ps.axis2, ps.values2, chi,
                                                 ctx.threshold, ctx.settings, ctx.workers);
  json rows = json::array();
  for (const auto& r : records) {
    json row{{"p1", num(r.p1)},       {"p2", num(r.p2)},      {"chi", num(r.chi)},
             {"residual", num(r.residual)}, {"pass", r.pass}, {"diagonal", num(r.diagonal)},
             {"converged", r.converged}};
    if (!r.error.empty()) row["error"] = r.error;
    rows.push_back(std::move(row));
  }
  payload = json{{"axis1", validity::to_string(ps.axis1)},
                 {"axis2", validity::to_string(ps.axis2)},
                 {"threshold", num(ctx.threshold)},
                 {"records", std::move(rows)}};
  table = validity::parameters_csv(records);
  return kOk;
}

inline int cmd_freq(const Context& ctx, json& payload) {
  json results = json::array();
  const auto raw = ctx.raw_chis();
  for (const auto* entry : ctx.modes()) {
    for (const auto chi : raw) {
      const auto r = validity::frequency_energy_report(entry->mode, chi, ctx.direction(), ctx.settings);
      results.push_back(json{{"mode", entry->name},
                             {"direction", ctx.opt.direction},
                             {"chi", num(r.chi)},
                             {"mean_in", num(ctx.user_frequency(r.mean_in))},
                             {"mean_out", num(ctx.user_frequency(r.mean_out))},
                             {"ratio", num(r.ratio)},
                             {"z", num(r.z)},
                             {"delta_E_ratio", num(r.delta_E_ratio)}});
    }
  }
  payload = collect(std::move(results));
  return kOk;
}

inline int cmd_optimize_phase(const Context& ctx, json& payload) {
  json results = json::array();
  const auto chis = ctx.chis();
  for (const auto* entry : ctx.modes()) {
    for (const auto chi : chis) {
      const auto r = overlap::optimize_linear_phase(entry->mode, chi, ctx.settings);
      json out{{"mode", entry->name},
               {"chi", num(chi.chi())},
               {"c_star", num(ctx.user_time(r.c_star))},
               {"c_first_order", num(ctx.user_time(r.c_first_order))},
               {"achieved", overlap_json(r.achieved)},
               {"baseline", overlap_json(r.baseline)},
               {"iterations", r.iterations}};
      // (1 - |Delta|) / eps^2, the measured second-order coefficient.
      const double eps = chi.chi() - 1.0;
      if (eps != 0.0) {
        out["achieved_coefficient"] = num((1.0 - r.achieved.magnitude) / (eps * eps));
        out["baseline_coefficient"] = num((1.0 - r.baseline.magnitude) / (eps * eps));
      }
      results.push_back(std::move(out));
    }
  }
  payload = collect(std::move(results));
  return kOk;
}

// ---------------------------------------------------------------------------
// Argument parsing.

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"overlap", "functionals", "matrix", "scan",
                                              "boundary", "params", "freq", "optimize-phase"};
  return names;
}

inline void add_common(CLI::App& sub, Options& o) {
  sub.add_option("-c,--config", o.config_path, "YAML configuration file")->required();
  sub.add_option("--rel-tol", o.rel_tol, "Quadrature relative tolerance (default 1e-10)");
  sub.add_option("--abs-tol", o.abs_tol, "Quadrature absolute tolerance (default 1e-14)");
  sub.add_option("--max-subdivisions", o.max_subdivisions, "Quadrature subdivision budget (default 200)");
  sub.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  sub.add_option("-o,--output", o.output, "Write the document here instead of stdout");
}

inline void add_chi(CLI::App& sub, Options& o, bool several) {
  auto* chi = sub.add_option("--chi", o.chi, several ? "Redshift factors chi, one or more" : "Redshift factor chi");
  auto* chi2 = sub.add_option("--chi-squared", o.chi_squared,
                              several ? "Redshift factors as chi^2 = 1 + z, one or more" : "Redshift factor as chi^2 = 1 + z");
  for (auto* opt : {chi, chi2}) {
    opt->check(CLI::PositiveNumber);
    if (!several) opt->expected(1);
  }
  sub.add_option("--direction", o.direction, "alice-to-bob uses chi, bob-to-alice uses 1/chi")
      ->check(CLI::IsMember({"alice-to-bob", "bob-to-alice"}))
      ->capture_default_str();
}

inline void add_mode(CLI::App& sub, Options& o) {
  sub.add_option("--mode", o.mode, "Index of the mode in the configuration")->capture_default_str();
  sub.add_flag("--all-modes", o.all_modes, "Run for every configured mode");
}

inline void add_parallel(CLI::App& sub, Options& o) {
  sub.add_option("--workers", o.workers, "Worker threads; 0 uses every hardware thread")->capture_default_str();
}

inline void add_threshold(CLI::App& sub, Options& o) {
  sub.add_option("--threshold", o.threshold, "Completion residual threshold (default 1e-3)")
      ->check(CLI::PositiveNumber);
}

inline void build(CLI::App& app, Options& o) {
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(QREDSHIFT_VERSION));

  auto* ov = app.add_subcommand("overlap", "Overlap Delta(chi) between a mode and its redshifted copy");
  add_common(*ov, o);
  add_chi(*ov, o, true);
  add_mode(*ov, o);

  auto* fn = app.add_subcommand("functionals", "Spectral functionals K, kappa, mu^2 and the second-order law");
  add_common(*fn, o);
  add_mode(*fn, o);
  fn->add_option("--epsilon", o.epsilon, "Also evaluate the expansion at chi = 1 + epsilon (one or more)");

  auto* mx = app.add_subcommand("matrix", "Mixing matrix of all configured modes plus one environment mode");
  add_common(*mx, o);
  add_chi(*mx, o, false);
  add_threshold(*mx, o);
  add_parallel(*mx, o);
  mx->add_flag("--require-unitary", o.require_unitary, "Exit with status 4 when the completion fails");
  mx->add_flag("--generator", o.generator, "Also extract the first-order generator M at chi = 1");

  auto* sc = app.add_subcommand("scan", "Completion residual over a grid of chi");
  add_common(*sc, o);
  add_threshold(*sc, o);
  add_parallel(*sc, o);
  sc->add_option("--direction", o.direction, "alice-to-bob uses chi, bob-to-alice uses 1/chi")
      ->check(CLI::IsMember({"alice-to-bob", "bob-to-alice"}))
      ->capture_default_str();
  sc->add_option("--chi-min", o.chi_min, "Lower end of the chi grid")->capture_default_str();
  sc->add_option("--chi-max", o.chi_max, "Upper end of the chi grid")->capture_default_str();
  sc->add_option("--points", o.points, "Number of grid points")->capture_default_str();
  sc->add_flag("--log-grid", o.log_grid, "Space the grid logarithmically");
  sc->add_option("--chi-list", o.chi_list, "Explicit sorted chi values (overrides the grid)");
  sc->add_option("--plot", o.plot, "Also write two-column plot data (chi, residual)");

  auto* bd = app.add_subcommand("boundary", "Bisect for the chi where the residual crosses the threshold");
  add_common(*bd, o);
  add_threshold(*bd, o);
  add_parallel(*bd, o);
  bd->add_option("--lo", o.lo, "Lower end of the bracket")->capture_default_str();
  bd->add_option("--hi", o.hi, "Upper end of the bracket")->capture_default_str();

  auto* pr = app.add_subcommand("params", "Residual over the parameter_scan grid of the configuration");
  add_common(*pr, o);
  add_chi(*pr, o, false);
  add_threshold(*pr, o);
  add_parallel(*pr, o);

  auto* fq = app.add_subcommand("freq", "Mean frequency before and after the redshift");
  add_common(*fq, o);
  add_chi(*fq, o, true);
  add_mode(*fq, o);

  auto* op = app.add_subcommand("optimize-phase", "Linear phase exp(i c w) maximizing |Delta(chi)|");
  add_common(*op, o);
  add_chi(*op, o, true);
  add_mode(*op, o);
}

inline std::size_t resolve_workers(std::size_t requested) {
  if (const char* v = std::getenv("QREDSHIFT_NO_PARALLEL"); v && std::string(v) == "1") return 1;
  if (requested == 0) return std::max(1u, std::thread::hardware_concurrency());
  return requested;
}

/// Entry point. Never throws.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Gravitational redshift of photonic spectral modes", "qredshift");
  build(app, o);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = config::parse_config(o.config_path);
    quad::Settings settings = cfg.quadrature;
    if (o.rel_tol) settings.rel_tol = *o.rel_tol;
    if (o.abs_tol) settings.abs_tol = *o.abs_tol;
    if (o.max_subdivisions) settings.max_subdivisions = *o.max_subdivisions;
    settings.validate();
    Context ctx{o, cfg, settings, resolve_workers(o.workers), o.threshold.value_or(cfg.threshold.value_or(1e-3)), err};
    const auto format = o.format ? config::format_from_string(*o.format) : cfg.format;

    OutputDocument doc;
    doc.command = command;
    doc.config_digest = config::digest(cfg.text);
    std::string table;
    int code = kOk;
    if (command == "overlap") code = cmd_overlap(ctx, doc.payload);
    else if (command == "functionals") code = cmd_functionals(ctx, doc.payload);
    else if (command == "matrix") code = cmd_matrix(ctx, doc.payload);
    else if (command == "scan") code = cmd_scan(ctx, doc.payload, table);
    else if (command == "boundary") code = cmd_boundary(ctx, doc.payload);
    else if (command == "params") code = cmd_params(ctx, doc.payload, table);
    else if (command == "freq") code = cmd_freq(ctx, doc.payload);
    else code = cmd_optimize_phase(ctx, doc.payload);

    const std::string bytes = emit(doc, format, table);
    const std::string path = o.output.empty() ? cfg.output_path : o.output;
    if (path.empty() || path == "-") {
      out << bytes;
    } else {
      std::ofstream file(path, std::ios::binary);
      if (!file || !(file << bytes)) {
        err << "error: cannot write " << path << "\n";
        return kConfigError;
      }
    }
    return code;
  } catch (const config::ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::quadrature_failure:
      case ErrorCode::non_finite_integrand:
      case ErrorCode::optimization_not_converged:
        return kNumericalError;
      case ErrorCode::completion_failed:
        return kCompletionFailed;
      default:
        return kConfigError;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace qredshift::cli
