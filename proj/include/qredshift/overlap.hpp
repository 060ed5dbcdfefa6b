#pragma once

// Overlap Delta(chi) = <F'|F> between a mode and its redshifted copy, the
// spectral functionals that control its small-redshift expansion, and the
// Gaussian closed form.
//
// Sign convention (fixed by quadrature): with F ~ exp(-i phi w),
// arg Delta(1 + eps) = 2 kappa eps + O(eps^2) and kappa = -phi w0.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "qredshift/error.hpp"
#include "qredshift/inner_product.hpp"
#include "qredshift/quad.hpp"
#include "qredshift/spectra.hpp"

namespace qredshift::overlap {

using spectra::SpectralMode;

struct OverlapResult {
  double chi = 1.0;
  complex delta{1.0, 0.0};
  double magnitude = 1.0;
  double phase = 0.0;
  double error_estimate = 0.0;
};

inline OverlapResult make_result(double chi, complex delta, double error) {
  return {chi, delta, std::abs(delta), std::arg(delta), error};
}

/// Delta(chi) = <F'|F> with F' the redshifted mode.
inline OverlapResult overlap_exact(const SpectralMode& mode, RedshiftFactor chi,
                                   const quad::Settings& settings = {}) {
  const auto transformed = spectra::redshift_transform(mode, chi);
  const auto r = quad::inner_product(transformed, mode, settings);
  spectra::require_converged(r, "overlap integral");
  return make_result(chi.chi(), r.value, r.error_estimate);
}

struct SpectralFunctionals {
  complex K{-0.5, 0.0};       // int x F* dF/dx
  double kappa = 0.0;         // polar route, int x theta' rho^2
  double mu_squared = 0.25;   // int x^2 |dF/dx|^2
  double kappa_opt = 0.0;     // sqrt(mu^2 - 1/4)
  double omega_bar = 0.0;     // mean frequency
  double variance_term = 0.0; // Var(x theta') under rho^2
  double gradient_term = 0.0; // int x^2 rho'^2
  bool polar_available = true;
  double route_gap = 0.0;     // |Im K - kappa|
};

/// K, kappa, mu^2 and the polar terms. All of them are invariant under the
/// choice of frequency unit, so they are evaluated directly in w.
inline SpectralFunctionals functionals(const SpectralMode& mode, const quad::Settings& settings = {}) {
  const auto support = spectra::quadrature_pieces(mode);
  SpectralFunctionals out;

  const auto k = spectra::integrate_over(
      [&mode](double w) { return w * std::conj(mode.amplitude(w)) * mode.derivative(w); }, support,
      settings);
  spectra::require_converged(k, "K functional");
  out.K = k.value;

  const auto mu = spectra::integrate_over(
      [&mode](double w) { return complex{w * w * std::norm(mode.derivative(w)), 0.0}; }, support,
      settings);
  spectra::require_converged(mu, "mu^2 functional");
  out.mu_squared = mu.value.real();
  out.kappa_opt = std::sqrt(std::max(out.mu_squared - 0.25, 0.0));
  out.omega_bar = spectra::mean_frequency(mode, settings);

  try {
    (void)spectra::polar_decompose(mode, std::nullopt, out.omega_bar, settings);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::phase_undefined) throw;
    out.polar_available = false;
  }

  if (!out.polar_available) {
    out.kappa = out.K.imag();
    out.variance_term = std::nan("");
    out.gradient_term = std::nan("");
    out.route_gap = std::nan("");
    return out;
  }

  // Logarithmic derivative F'/F = rho'/rho + i theta'.
  auto log_derivative = [&mode](double w, double& rho2) -> complex {
    const complex f = mode.amplitude(w);
    rho2 = std::norm(f);
    if (rho2 == 0.0) return {0.0, 0.0};
    return mode.derivative(w) / f;
  };
  // Packs (x theta' rho^2, (x theta')^2 rho^2) into one complex integrand.
  const auto moments = spectra::integrate_over(
      [&](double w) {
        double rho2 = 0.0;
        const double xtheta = w * log_derivative(w, rho2).imag();
        return complex{xtheta * rho2, xtheta * xtheta * rho2};
      },
      support, settings);
  spectra::require_converged(moments, "polar kappa");
  const auto gradient = spectra::integrate_over(
      [&](double w) {
        double rho2 = 0.0;
        const double rho_dot_over_rho = log_derivative(w, rho2).real();
        return complex{w * w * rho_dot_over_rho * rho_dot_over_rho * rho2, 0.0};
      },
      support, settings);
  spectra::require_converged(gradient, "polar gradient term");

  out.kappa = moments.value.real();
  out.variance_term = moments.value.imag() - out.kappa * out.kappa;
  out.gradient_term = gradient.value.real();
  out.route_gap = std::abs(out.K.imag() - out.kappa);
  return out;
}

/// Soft validity guard for the small-redshift expansion.
inline constexpr double kPerturbativeGuard = 0.2;

struct PerturbativeOverlap {
  double epsilon = 0.0;
  complex delta_poly{1.0, 0.0};
  complex delta_exp{1.0, 0.0};
  double c2 = 0.0;  // |Delta| = 1 - c2 eps^2 + O(eps^3)
  bool outside_guard = false;

  [[nodiscard]] double magnitude_law() const { return 1.0 - c2 * epsilon * epsilon; }
};

/// Second-order expansion of Delta(1 + eps).
///
/// The polynomial form is the exact second-order Taylor polynomial of
/// chi int F*(x) F(chi^2 x) dx:
///   1 + 2 i kappa eps + (1/2 - 2 mu^2) eps^2 - i kappa eps^2.
/// The exponential form exp(2 i kappa (1 - eps/2) eps) exp(-c2 eps^2) agrees
/// with it through eps^2.
inline PerturbativeOverlap overlap_perturbative(const SpectralFunctionals& f, double epsilon) {
  if (!std::isfinite(epsilon)) throw Error(ErrorCode::invalid_argument, "epsilon must be finite");
  PerturbativeOverlap out;
  out.epsilon = epsilon;
  out.outside_guard = std::abs(epsilon) >= kPerturbativeGuard;
  const double e = epsilon;
  const double kappa = f.kappa;
  const double mu2 = f.mu_squared;
  out.c2 = 0.5 * (4.0 * mu2 - 4.0 * kappa * kappa - 1.0);
  out.delta_poly = complex{1.0 + e * e * (0.5 - 2.0 * mu2), 2.0 * e * kappa - e * e * kappa};
  out.delta_exp = std::polar(std::exp(-out.c2 * e * e), 2.0 * kappa * (1.0 - 0.5 * e) * e);
  return out;
}

/// Closed-form Delta(chi) for a Gaussian with linear phase phi (integrated
/// over the whole real line).
inline OverlapResult gaussian_closed_form(double omega0, double sigma, double phi, RedshiftFactor chi) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be positive");
  if (omega0 < spectra::kOriginGuardWidths * sigma) {
    throw Error(ErrorCode::positive_support, "closed form requires omega0 >= 5 sigma");
  }
  const double c = chi.chi();
  const double c4 = std::pow(c, 4);
  if (c4 == 1.0) return make_result(c, {1.0, 0.0}, 0.0);
  const double shape = (c * c - 1.0) * (c * c - 1.0) / (c4 + 1.0);
  const double ratio = omega0 / sigma;
  const double magnitude = std::sqrt(2.0) * c / std::sqrt(c4 + 1.0) *
                           std::exp(-0.25 * shape * ratio * ratio) *
                           std::exp(-shape * sigma * sigma * phi * phi);
  const double phase = -(c4 - 1.0) / (c4 + 1.0) * phi * omega0;
  return make_result(c, std::polar(magnitude, phase), 0.0);
}

/// (1 - |Delta(1 + eps)|) / eps^2 from quadrature.
inline double measured_second_order_coefficient(const SpectralMode& mode, double epsilon,
                                                const quad::Settings& settings = {}) {
  const auto r = overlap_exact(mode, RedshiftFactor(1.0 + epsilon), settings);
  return (1.0 - r.magnitude) / (epsilon * epsilon);
}

struct PhaseOptimization {
  double c_star = 0.0;   // optimal linear phase coefficient, time
  double c_first_order = 0.0;  // -kappa_opt / omega_bar, small-shift estimate
  OverlapResult achieved;
  OverlapResult baseline;  // c = 0
  int iterations = 0;
};

/// Maximises |Delta(chi)| of F exp(i c w) over c in [-10/s, 10/s] with s the
/// root variance: coarse scan of 41 points, then golden-section refinement
/// around the best one. Ties with c = 0 resolve to c = 0.
inline PhaseOptimization optimize_linear_phase(const SpectralMode& mode, RedshiftFactor chi,
                                               const quad::Settings& settings = {}) {
  const double width = spectra::root_variance(mode, settings);
  const double range = 10.0 / width;
  auto objective = [&](double c) {
    return overlap_exact(spectra::with_linear_phase(mode, c), chi, settings).magnitude;
  };

  PhaseOptimization out;
  out.baseline = overlap_exact(mode, chi, settings);
  const auto fun = functionals(mode, settings);
  out.c_first_order = fun.omega_bar > 0.0 ? -fun.kappa_opt / fun.omega_bar : 0.0;

  constexpr int kCoarse = 41;
  std::array<double, kCoarse> grid{}, values{};
  int best = 0;
  for (int i = 0; i < kCoarse; ++i) {
    grid[i] = -range + 2.0 * range * i / (kCoarse - 1);
    values[i] = objective(grid[i]);
    if (values[i] > values[best]) best = i;
  }

  double a = grid[std::max(best - 1, 0)];
  double b = grid[std::min(best + 1, kCoarse - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  double fa = objective(a), fb = objective(b);
  int it = 0;
  constexpr int kMaxIterations = 200;
  while (it < kMaxIterations) {
    const double top = std::max(f1, f2);
    if (std::max({top - fa, top - fb}) <= 1e-10 || (b - a) <= 1e-14 * range) break;
    if (f1 >= f2) {
      b = x2;
      fb = f2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      fa = f1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(x2);
    }
    ++it;
  }
  if (it == kMaxIterations) {
    throw Error(ErrorCode::optimization_not_converged, "golden-section search did not converge");
  }
  out.iterations = it;
  const double c_best = f1 >= f2 ? x1 : x2;
  const double f_best = std::max(f1, f2);
  if (f_best <= out.baseline.magnitude + 1e-12) {
    out.c_star = 0.0;
    out.achieved = out.baseline;
  } else {
    out.c_star = c_best;
    out.achieved = overlap_exact(spectra::with_linear_phase(mode, c_best), chi, settings);
  }
  return out;
}

struct DecayPoint {
  double chi = 1.0;
  double magnitude = 0.0;
  bool ok = true;
  std::string error;
};

/// |Delta(chi)| along a sorted grid spanning at least two decades. Quadrature
/// failures are recorded per point.
inline std::vector<DecayPoint> asymptotic_decay_check(const SpectralMode& mode,
                                                      const std::vector<double>& chi_list,
                                                      const quad::Settings& settings = {}) {
  if (chi_list.size() < 2 || !std::is_sorted(chi_list.begin(), chi_list.end()) ||
      !(chi_list.front() > 0.0) || chi_list.back() / chi_list.front() < 100.0) {
    throw Error(ErrorCode::invalid_argument, "chi list must be sorted, positive and span two decades");
  }
  std::vector<DecayPoint> out;
  out.reserve(chi_list.size());
  for (const double chi : chi_list) {
    DecayPoint p;
    p.chi = chi;
    try {
      p.magnitude = overlap_exact(mode, RedshiftFactor(chi), settings).magnitude;
    } catch (const Error& e) {
      p.ok = false;
      p.magnitude = std::nan("");
      p.error = e.what();
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace qredshift::overlap
