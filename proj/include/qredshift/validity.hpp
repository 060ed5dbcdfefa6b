#pragma once

// Scans over chi and mode parameters, bisection for the validity boundary
// chi*, and the mean-frequency bookkeeping.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "qredshift/error.hpp"
#include "qredshift/mixer.hpp"
#include "qredshift/parallel.hpp"
#include "qredshift/spectra.hpp"

namespace qredshift::validity {

using mixer::BasisSet;
using spectra::SpectralMode;

struct ScanRecord {
  double chi = 1.0;
  double residual = 0.0;
  double relative_residual = 0.0;
  double deficit = 0.0;  // of the forced single-environment completion
  double min_eigenvalue = 0.0;
  std::vector<double> magnitudes;  // |A_nm|, row-major
  double wall_time = 0.0;          // seconds; never serialized to CSV
  bool converged = true;
  bool completes = true;  // residual <= tolerance
  std::string error;
};

inline ScanRecord evaluate_point(const BasisSet& basis, double chi, double tolerance,
                                 const quad::Settings& settings) {
  const auto start = std::chrono::steady_clock::now();
  ScanRecord rec;
  rec.chi = chi;
  try {
    const auto a = mixer::overlap_block(basis, RedshiftFactor(chi), settings);
    const auto gd = mixer::gram_deficit(a);
    const auto forced = mixer::forced_completion(a, gd, chi);
    rec.residual = gd.rank1_residual;
    rec.relative_residual = gd.relative_residual;
    rec.deficit = forced.deficit;
    rec.min_eigenvalue = gd.min_eigenvalue;
    rec.completes = gd.rank1_residual <= tolerance;
    rec.magnitudes.reserve(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) rec.magnitudes.push_back(std::abs(a(i, j)));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::quadrature_failure && e.code() != ErrorCode::non_finite_integrand) throw;
    rec.converged = false;
    rec.completes = false;
    rec.residual = rec.relative_residual = rec.deficit = rec.min_eigenvalue = std::nan("");
    rec.error = e.what();
  }
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// One record per grid point, in grid order, independent of `workers`.
inline std::vector<ScanRecord> scan_chi(const BasisSet& basis, const std::vector<double>& chi_grid,
                                        double tolerance, const quad::Settings& settings = {},
                                        std::size_t workers = 1) {
  if (!std::is_sorted(chi_grid.begin(), chi_grid.end())) {
    throw Error(ErrorCode::invalid_argument, "chi grid must be sorted");
  }
  for (const double chi : chi_grid) {
    if (!(chi > 0.0) || !std::isfinite(chi)) throw Error(ErrorCode::invalid_argument, "chi grid must be positive");
  }
  std::vector<ScanRecord> out(chi_grid.size());
  detail::parallel_for(chi_grid.size(), workers, [&](std::size_t i) {
    out[i] = evaluate_point(basis, chi_grid[i], tolerance, settings);
  });
  return out;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
  if (count < 2) return {lo};
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return g;
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi > 0.0)) throw Error(ErrorCode::invalid_argument, "log grid needs positive bounds");
  auto g = linear_grid(std::log(lo), std::log(hi), count);
  for (auto& v : g) v = std::exp(v);
  return g;
}

struct BoundaryResult {
  double chi_star = 1.0;
  double lo = 1.0;
  double hi = 1.0;
  int iterations = 0;
  double threshold = 0.0;
  bool monotone_in_bracket = true;
};

inline constexpr double kBoundaryRelativeWidth = 1e-3;

/// Bisects r(chi) = threshold to relative width 1e-3. The bracket is first
/// narrowed to the first of 8 interior samples at or above the threshold, so
/// non-monotone residuals yield the crossing nearest the low end.
inline BoundaryResult find_boundary(const BasisSet& basis, double threshold, double lo, double hi,
                                    const quad::Settings& settings = {}, std::size_t workers = 1) {
  if (!(lo > 0.0) || !(hi > lo)) throw Error(ErrorCode::bracket_invalid, "bracket must satisfy 0 < lo < hi");
  auto residual = [&](double chi) {
    const auto rec = evaluate_point(basis, chi, threshold, settings);
    if (!rec.converged) throw Error(ErrorCode::quadrature_failure, rec.error);
    return rec.residual;
  };

  constexpr std::size_t kInterior = 8;
  std::vector<double> points{lo};
  for (std::size_t i = 1; i <= kInterior; ++i) {
    points.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kInterior + 1));
  }
  points.push_back(hi);
  std::vector<double> values(points.size());
  detail::parallel_for(points.size(), workers, [&](std::size_t i) { values[i] = residual(points[i]); });

  if (!(values.front() < threshold) || !(threshold <= values.back())) {
    throw Error(ErrorCode::bracket_invalid, "residual does not cross the threshold in the bracket (r(lo) = " +
                                                format_number(values.front()) + ", r(hi) = " +
                                                format_number(values.back()) + ")");
  }

  BoundaryResult out;
  out.threshold = threshold;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1] - 1e-12) out.monotone_in_bracket = false;
  }
  std::size_t first = 1;
  while (values[first] < threshold) ++first;
  double a = points[first - 1];
  double b = points[first];
  int iterations = 0;
  while (b - a > kBoundaryRelativeWidth * 0.5 * (a + b)) {
    const double mid = 0.5 * (a + b);
    if (residual(mid) < threshold) {
      a = mid;
    } else {
      b = mid;
    }
    ++iterations;
  }
  out.lo = a;
  out.hi = b;
  out.chi_star = 0.5 * (a + b);
  out.iterations = iterations;
  return out;
}

struct FrequencyReport {
  double chi = 1.0;  // effective chi after applying the direction
  double mean_in = 0.0;
  double mean_out = 0.0;
  double ratio = 1.0;
  double z = 0.0;
  double delta_E_ratio = 0.0;  // (E_out - E_in) / E_in
};

inline FrequencyReport frequency_energy_report(const SpectralMode& mode, RedshiftFactor chi,
                                               Direction direction = Direction::alice_to_bob,
                                               const quad::Settings& settings = {}) {
  const RedshiftFactor effective = oriented(chi, direction);
  FrequencyReport out;
  out.chi = effective.chi();
  out.mean_in = spectra::mean_frequency(mode, settings);
  out.mean_out = spectra::mean_frequency(spectra::redshift_transform(mode, effective), settings);
  out.ratio = out.mean_out / out.mean_in;
  out.z = effective.z();
  out.delta_E_ratio = (out.mean_out - out.mean_in) / out.mean_in;
  return out;
}

// ---------------------------------------------------------------------------
// Parameter scans.

enum class Parameter { omega0_over_sigma, sigma_phi, separation_over_sigma, sigma };

inline std::string_view to_string(Parameter p) {
  switch (p) {
    case Parameter::omega0_over_sigma: return "omega0_over_sigma";
    case Parameter::sigma_phi: return "sigma_phi";
    case Parameter::separation_over_sigma: return "separation_over_sigma";
    case Parameter::sigma: return "sigma";
  }
  return "unknown";
}

inline Parameter parameter_from_string(std::string_view name) {
  for (auto p : {Parameter::omega0_over_sigma, Parameter::sigma_phi, Parameter::separation_over_sigma,
                 Parameter::sigma}) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::invalid_argument, "unknown scan parameter '" + std::string(name) + "'");
}

/// One Gaussian, or two Gaussians of equal width and phase separated by
/// `separation_over_sigma` widths.
struct BasisTemplate {
  std::size_t modes = 2;
  double omega0_over_sigma = 10.0;
  double sigma = 1.0;
  double sigma_phi = 0.0;
  double separation_over_sigma = 20.0;

  void set(Parameter p, double value) {
    switch (p) {
      case Parameter::omega0_over_sigma: omega0_over_sigma = value; break;
      case Parameter::sigma_phi: sigma_phi = value; break;
      case Parameter::separation_over_sigma: separation_over_sigma = value; break;
      case Parameter::sigma: sigma = value; break;
    }
  }

  [[nodiscard]] BasisSet build(const quad::Settings& settings = {}) const {
    if (modes != 1 && modes != 2) throw Error(ErrorCode::invalid_argument, "template supports 1 or 2 modes");
    std::vector<SpectralMode> raw;
    const double w0 = omega0_over_sigma * sigma;
    for (std::size_t i = 0; i < modes; ++i) {
      spectra::GaussianChirp g;
      g.omega0 = w0 + static_cast<double>(i) * separation_over_sigma * sigma;
      g.sigma = sigma;
      g.phi = sigma_phi / sigma;
      raw.push_back(SpectralMode::gaussian(g));
    }
    return mixer::gram_schmidt(raw, settings);
  }
};

struct ParameterRecord {
  double p1 = 0.0;
  double p2 = 0.0;
  double chi = 1.0;
  double residual = 0.0;
  bool pass = true;  // residual <= threshold
  std::vector<double> diagonal;  // |A_nn|
  bool converged = true;
  std::string error;
};

/// Row-major over (p1, p2), in input order, independent of `workers`.
inline std::vector<ParameterRecord> scan_parameters(const BasisTemplate& base, Parameter axis1,
                                                    const std::vector<double>& values1, Parameter axis2,
                                                    const std::vector<double>& values2, RedshiftFactor chi,
                                                    double threshold, const quad::Settings& settings = {},
                                                    std::size_t workers = 1) {
  for (const auto& vals : {values1, values2}) {
    for (const double v : vals) {
      if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "parameter grid must be finite");
    }
  }
  const std::size_t n2 = values2.size();
  std::vector<ParameterRecord> out(values1.size() * n2);
  detail::parallel_for(out.size(), workers, [&](std::size_t idx) {
    ParameterRecord rec;
    rec.p1 = values1[idx / n2];
    rec.p2 = values2[idx % n2];
    rec.chi = chi.chi();
    try {
      BasisTemplate t = base;
      t.set(axis1, rec.p1);
      t.set(axis2, rec.p2);
      const auto basis = t.build(settings);
      const auto point = evaluate_point(basis, chi.chi(), threshold, settings);
      if (!point.converged) throw Error(ErrorCode::quadrature_failure, point.error);
      rec.residual = point.residual;
      rec.pass = point.residual <= threshold;
      const std::size_t n = basis.size();
      for (std::size_t i = 0; i < n; ++i) rec.diagonal.push_back(point.magnitudes[i * n + i]);
    } catch (const Error& e) {
      rec.converged = false;
      rec.pass = false;
      rec.residual = std::nan("");
      rec.error = e.what();
    }
    out[idx] = std::move(rec);
  });
  return out;
}

// ---------------------------------------------------------------------------
// CSV, UTF-8, LF line endings, shortest round-trip decimals.

inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string scan_csv(const std::vector<ScanRecord>& records) {
  std::string out = "chi,residual,deficit,min_eig,converged\n";
  for (const auto& r : records) {
    out += shortest(r.chi) + ',' + shortest(r.residual) + ',' + shortest(r.deficit) + ',' +
           shortest(r.min_eigenvalue) + ',' + (r.converged ? "true" : "false") + '\n';
  }
  return out;
}

inline std::string parameters_csv(const std::vector<ParameterRecord>& records) {
  std::string out = "p1,p2,chi,residual,pass\n";
  for (const auto& r : records) {
    out += shortest(r.p1) + ',' + shortest(r.p2) + ',' + shortest(r.chi) + ',' + shortest(r.residual) + ',' +
           (r.pass ? "true" : "false") + '\n';
  }
  return out;
}

/// Two-column plot data: chi and residual, whitespace separated.
inline std::string scan_plot_data(const std::vector<ScanRecord>& records) {
  std::string out = "# chi residual\n";
  for (const auto& r : records) out += shortest(r.chi) + ' ' + shortest(r.residual) + '\n';
  return out;
}

}  // namespace qredshift::validity
