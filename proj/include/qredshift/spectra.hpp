#pragma once

// Spectral mode functions F(w) on the positive frequency axis.
//
// Conventions:
//   GaussianChirp  F(w) = s (2 pi sigma^2)^(-1/4) exp(-(w-w0)^2 / (4 sigma^2))
//                        * exp(-i phi w + i beta (w-w0)^2)
//   Comb           F(w) = exp(-i slope w) * sum_k weight_k g_k(w), g_k a unit-norm
//                        Gaussian of centre c_k and width w_k
//   Sampled        cubic (or linear) interpolation of magnitude and unwrapped
//                  phase on a strictly increasing grid; zero outside the grid
//   Superposition  finite linear combination of other modes (built by
//                  Gram-Schmidt)
//
// The redshift transform acts as F'(w) = chi^-1 F(chi^-2 w) (Alice to Bob).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qredshift/error.hpp"
#include "qredshift/quad.hpp"

namespace qredshift {

/// chi > 0 with chi^2 = Omega_B / Omega_A = 1 + z.
class RedshiftFactor {
 public:
  explicit RedshiftFactor(double chi) : chi_(chi) {
    if (!std::isfinite(chi) || !(chi > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "redshift factor chi must be positive and finite");
    }
  }
  static RedshiftFactor from_chi_squared(double chi_squared) {
    if (!std::isfinite(chi_squared) || !(chi_squared > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "chi^2 must be positive and finite");
    }
    return RedshiftFactor(std::sqrt(chi_squared));
  }
  static RedshiftFactor from_z(double z) { return from_chi_squared(1.0 + z); }

  [[nodiscard]] double chi() const { return chi_; }
  [[nodiscard]] double chi_squared() const { return chi_ * chi_; }
  [[nodiscard]] double z() const { return chi_ * chi_ - 1.0; }
  /// Bob-to-Alice direction.
  [[nodiscard]] RedshiftFactor inverse() const { return RedshiftFactor(1.0 / chi_); }

 private:
  double chi_;
};

/// Alice-to-Bob uses chi as given; Bob-to-Alice is the same law with 1/chi.
enum class Direction { alice_to_bob, bob_to_alice };

inline RedshiftFactor oriented(RedshiftFactor chi, Direction direction) {
  return direction == Direction::alice_to_bob ? chi : chi.inverse();
}

namespace spectra {

/// Half-width of the truncation window, in component widths.
inline constexpr double kSupportWidths = 12.0;
/// Minimum centre/width ratio accepted without an explicit override.
inline constexpr double kOriginGuardWidths = 5.0;
/// Half-width of the default phase-unwrapping window, in component widths.
inline constexpr double kPolarWidths = 8.0;

struct GaussianChirp {
  double omega0 = 0.0;
  double sigma = 1.0;
  double phi = 0.0;   // linear phase, time
  double beta = 0.0;  // quadratic chirp, time^2
  double scale = 1.0;
  bool allow_near_origin = false;
};

struct Tooth {
  double center = 0.0;
  double width = 1.0;
  complex weight{1.0, 0.0};
};

struct Comb {
  std::vector<Tooth> teeth;
  double phase_slope = 0.0;  // global linear phase, time
  bool allow_near_origin = false;
};

enum class Interpolation { cubic, linear };

constexpr std::string_view to_string(Interpolation rule) {
  return rule == Interpolation::cubic ? "cubic" : "linear";
}

namespace detail {

/// Natural cubic spline on a strictly increasing grid.
class NaturalSpline {
 public:
  NaturalSpline() = default;
  NaturalSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Thomas algorithm for the interior second derivatives.
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      const double a = h0 / 6.0;
      const double b = (h0 + h1) / 3.0;
      const double cc = h1 / 6.0;
      const double rhs = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
      const double denom = b - a * c[i - 1];
      c[i] = cc / denom;
      d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = d[i] - c[i] * m_[i + 1];
    }
  }

  [[nodiscard]] double operator()(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

  [[nodiscard]] double derivative(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h;
    const double b = (t - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h / 6.0;
  }

  [[nodiscard]] double linear(double t) const {
    const std::size_t i = segment(t);
    const double b = (t - x_[i]) / (x_[i + 1] - x_[i]);
    return (1.0 - b) * y_[i] + b * y_[i + 1];
  }

  [[nodiscard]] double linear_slope(double t) const {
    const std::size_t i = segment(t);
    return (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
  }

 private:
  [[nodiscard]] std::size_t segment(double t) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, y_, m_;
};

inline double wrap_to_nearest(double phase, double reference) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return phase + two_pi * std::round((reference - phase) / two_pi);
}

}  // namespace detail

/// Immutable sampled representation; shared between copies of a mode.
class SampledModel {
 public:
  SampledModel(std::vector<double> omega, std::vector<double> magnitude, std::vector<double> phase,
               Interpolation rule)
      : omega_(std::move(omega)), magnitude_(std::move(magnitude)), phase_(std::move(phase)),
        rule_(rule) {
    validate();
    magnitude_spline_ = detail::NaturalSpline(omega_, magnitude_);
    phase_spline_ = detail::NaturalSpline(omega_, phase_);
    // Discrete root-variance of |F|^2.
    double w0 = 0.0, w1 = 0.0, w2 = 0.0;
    for (std::size_t i = 0; i + 1 < omega_.size(); ++i) {
      const double h = omega_[i + 1] - omega_[i];
      const double p0 = magnitude_[i] * magnitude_[i];
      const double p1 = magnitude_[i + 1] * magnitude_[i + 1];
      w0 += 0.5 * h * (p0 + p1);
      w1 += 0.5 * h * (p0 * omega_[i] + p1 * omega_[i + 1]);
      w2 += 0.5 * h * (p0 * omega_[i] * omega_[i] + p1 * omega_[i + 1] * omega_[i + 1]);
    }
    const double mean = w1 / w0;
    width_ = std::sqrt(std::max(w2 / w0 - mean * mean, 0.0));
    if (!(width_ > 0.0)) width_ = (omega_.back() - omega_.front()) / 24.0;
  }

  static SampledModel from_amplitudes(std::vector<double> omega, std::span<const complex> amplitude,
                                      Interpolation rule) {
    if (omega.size() != amplitude.size()) {
      throw Error(ErrorCode::invalid_argument, "sampled grid and amplitude sizes differ");
    }
    std::vector<double> magnitude(amplitude.size()), phase(amplitude.size());
    for (std::size_t i = 0; i < amplitude.size(); ++i) {
      if (!std::isfinite(amplitude[i].real()) || !std::isfinite(amplitude[i].imag())) {
        throw Error(ErrorCode::non_finite, "sampled amplitude is not finite");
      }
      magnitude[i] = std::abs(amplitude[i]);
      const double raw = std::arg(amplitude[i]);
      phase[i] = i == 0 ? raw : detail::wrap_to_nearest(raw, phase[i - 1]);
    }
    return SampledModel(std::move(omega), std::move(magnitude), std::move(phase), rule);
  }

  [[nodiscard]] complex amplitude(double w) const {
    if (w < omega_.front() || w > omega_.back()) return {0.0, 0.0};
    if (rule_ == Interpolation::linear) {
      return std::polar(magnitude_spline_.linear(w), phase_spline_.linear(w));
    }
    return std::polar(std::abs(magnitude_spline_(w)), phase_spline_(w));
  }

  /// Exact derivative of the interpolant, zero outside the grid.
  [[nodiscard]] complex derivative(double w) const {
    if (w < omega_.front() || w > omega_.back()) return {0.0, 0.0};
    if (rule_ == Interpolation::linear) {
      const complex unit = std::polar(1.0, phase_spline_.linear(w));
      const double m = magnitude_spline_.linear(w);
      return complex{magnitude_spline_.linear_slope(w), m * phase_spline_.linear_slope(w)} * unit;
    }
    const double m = magnitude_spline_(w);
    const double sign = m < 0.0 ? -1.0 : 1.0;
    const complex unit = std::polar(1.0, phase_spline_(w));
    return complex{sign * magnitude_spline_.derivative(w), std::abs(m) * phase_spline_.derivative(w)} * unit;
  }

  /// Richardson-extrapolated central difference with h = width * 1e-5;
  /// a cross-check of derivative().
  [[nodiscard]] complex finite_difference(double w) const {
    const double h = width_ * 1e-5;
    auto central = [&](double step) {
      return (amplitude(w + step) - amplitude(w - step)) / (2.0 * step);
    };
    return (4.0 * central(0.5 * h) - central(h)) / 3.0;
  }

  [[nodiscard]] const std::vector<double>& omega() const { return omega_; }
  [[nodiscard]] const std::vector<double>& magnitude() const { return magnitude_; }
  [[nodiscard]] const std::vector<double>& phase() const { return phase_; }
  [[nodiscard]] Interpolation rule() const { return rule_; }
  [[nodiscard]] double width() const { return width_; }
  [[nodiscard]] std::vector<complex> amplitudes() const {
    std::vector<complex> out(omega_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::polar(magnitude_[i], phase_[i]);
    return out;
  }

 private:
  void validate() const {
    if (omega_.size() < 8) {
      throw Error(ErrorCode::invalid_argument, "sampled mode needs at least 8 grid points");
    }
    if (magnitude_.size() != omega_.size() || phase_.size() != omega_.size()) {
      throw Error(ErrorCode::invalid_argument, "sampled grid and amplitude sizes differ");
    }
    if (!(omega_.front() >= 0.0)) {
      throw Error(ErrorCode::negative_frequency, "sampled grid must start at a non-negative frequency");
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < omega_.size(); ++i) {
      if (!std::isfinite(omega_[i]) || !std::isfinite(magnitude_[i]) || !std::isfinite(phase_[i])) {
        throw Error(ErrorCode::non_finite, "sampled mode contains non-finite values");
      }
      if (i > 0 && !(omega_[i] > omega_[i - 1])) {
        throw Error(ErrorCode::invalid_argument, "sampled grid must be strictly increasing");
      }
      peak = std::max(peak, magnitude_[i]);
    }
    if (!(peak > 0.0)) throw Error(ErrorCode::zero_norm, "sampled mode is identically zero");
    if (magnitude_.front() > 1e-10 * peak || magnitude_.back() > 1e-10 * peak) {
      throw Error(ErrorCode::invalid_argument,
                  "sampled mode must decay to 1e-10 of its peak at both grid ends");
    }
  }

  std::vector<double> omega_, magnitude_, phase_;
  Interpolation rule_;
  detail::NaturalSpline magnitude_spline_, phase_spline_;
  double width_ = 0.0;
};

class SpectralMode;

struct Term {
  complex coefficient;
  std::shared_ptr<const SpectralMode> mode;
};

struct Superposition {
  std::vector<Term> terms;
};

class SpectralMode {
 public:
  using Variant = std::variant<GaussianChirp, Comb, std::shared_ptr<const SampledModel>, Superposition>;

  static SpectralMode gaussian(GaussianChirp g) {
    if (!std::isfinite(g.omega0) || !std::isfinite(g.sigma) || !std::isfinite(g.phi) ||
        !std::isfinite(g.beta) || !std::isfinite(g.scale)) {
      throw Error(ErrorCode::non_finite, "gaussian mode parameters must be finite");
    }
    if (!(g.sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "gaussian width sigma must be positive");
    if (!(g.scale > 0.0)) throw Error(ErrorCode::zero_norm, "gaussian scale must be positive");
    check_origin_guard(g.omega0, g.sigma, g.allow_near_origin);
    return SpectralMode(Variant{g});
  }

  static SpectralMode comb(Comb c) {
    if (c.teeth.empty()) throw Error(ErrorCode::invalid_argument, "comb needs at least one tooth");
    if (!std::isfinite(c.phase_slope)) throw Error(ErrorCode::non_finite, "comb phase slope must be finite");
    bool any_weight = false;
    for (const auto& t : c.teeth) {
      if (!std::isfinite(t.center) || !std::isfinite(t.width) || !std::isfinite(t.weight.real()) ||
          !std::isfinite(t.weight.imag())) {
        throw Error(ErrorCode::non_finite, "comb tooth parameters must be finite");
      }
      if (!(t.width > 0.0)) throw Error(ErrorCode::invalid_argument, "comb tooth width must be positive");
      check_origin_guard(t.center, t.width, c.allow_near_origin);
      any_weight = any_weight || std::abs(t.weight) > 0.0;
    }
    if (!any_weight) throw Error(ErrorCode::zero_norm, "comb has no nonzero tooth weight");
    return SpectralMode(Variant{std::move(c)});
  }

  static SpectralMode sampled(std::vector<double> omega, std::span<const complex> amplitude,
                              Interpolation rule = Interpolation::cubic) {
    return SpectralMode(Variant{std::make_shared<const SampledModel>(
        SampledModel::from_amplitudes(std::move(omega), amplitude, rule))});
  }

  static SpectralMode sampled(SampledModel model) {
    return SpectralMode(Variant{std::make_shared<const SampledModel>(std::move(model))});
  }

  static SpectralMode superposition(std::vector<Term> terms) {
    if (terms.empty()) throw Error(ErrorCode::invalid_argument, "superposition needs at least one term");
    for (const auto& t : terms) {
      if (!t.mode) throw Error(ErrorCode::invalid_argument, "superposition term without a mode");
    }
    return SpectralMode(Variant{Superposition{std::move(terms)}});
  }

  [[nodiscard]] const Variant& variant() const { return v_; }

  [[nodiscard]] std::string_view kind() const {
    switch (v_.index()) {
      case 0: return "gaussian_chirp";
      case 1: return "comb";
      case 2: return "sampled";
      default: return "superposition";
    }
  }

  /// F(w) for any real w; outside the modelled domain the amplitude is zero.
  [[nodiscard]] complex amplitude(double w) const {
    return std::visit([w](const auto& m) { return amplitude_of(m, w); }, v_);
  }

  /// dF/dw: analytic for every family; samples differentiate the interpolant.
  [[nodiscard]] complex derivative(double w) const {
    return std::visit([w](const auto& m) { return derivative_of(m, w); }, v_);
  }

  /// Effective support, padded by kSupportWidths component widths.
  [[nodiscard]] std::vector<quad::Interval> support(double widths = kSupportWidths) const {
    std::vector<quad::Interval> out;
    collect_support(widths, out);
    out = quad::merge(std::move(out));
    if (allows_near_origin()) out = quad::clip_below(std::move(out), 0.0);
    return out;
  }

  /// Interpolation knots of sampled components, sorted. Quadrature panels
  /// are split there so each one sees a single polynomial piece.
  [[nodiscard]] std::vector<double> breakpoints() const {
    std::vector<double> out;
    collect_breakpoints(out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  [[nodiscard]] bool allows_near_origin() const {
    struct V {
      bool operator()(const GaussianChirp& g) const { return g.allow_near_origin; }
      bool operator()(const Comb& c) const { return c.allow_near_origin; }
      bool operator()(const std::shared_ptr<const SampledModel>&) const { return false; }
      bool operator()(const Superposition& s) const {
        return std::any_of(s.terms.begin(), s.terms.end(),
                           [](const Term& t) { return t.mode->allows_near_origin(); });
      }
    };
    return std::visit(V{}, v_);
  }

  /// Smallest component width; sets grid resolutions.
  [[nodiscard]] double reference_width() const {
    struct V {
      double operator()(const GaussianChirp& g) const { return g.sigma; }
      double operator()(const Comb& c) const {
        double w = c.teeth.front().width;
        for (const auto& t : c.teeth) w = std::min(w, t.width);
        return w;
      }
      double operator()(const std::shared_ptr<const SampledModel>& s) const { return s->width(); }
      double operator()(const Superposition& s) const {
        double w = s.terms.front().mode->reference_width();
        for (const auto& t : s.terms) w = std::min(w, t.mode->reference_width());
        return w;
      }
    };
    return std::visit(V{}, v_);
  }

 private:
  explicit SpectralMode(Variant v) : v_(std::move(v)) {}

  static void check_origin_guard(double center, double width, bool allow) {
    if (!allow && center < kOriginGuardWidths * width) {
      throw Error(ErrorCode::positive_support,
                  "centre " + format_number(center) + " is closer than " +
                      format_number(kOriginGuardWidths) + " widths (" + format_number(width) +
                      ") to w = 0; set allow_near_origin to override");
    }
    if (allow && !(center + kSupportWidths * width > 0.0)) {
      throw Error(ErrorCode::positive_support, "component has no support on w > 0");
    }
  }

  static double gaussian_envelope(double w, double center, double width) {
    const double d = w - center;
    return std::pow(2.0 * std::numbers::pi * width * width, -0.25) *
           std::exp(-d * d / (4.0 * width * width));
  }

  static complex amplitude_of(const GaussianChirp& g, double w) {
    if (g.allow_near_origin && w < 0.0) return {0.0, 0.0};
    const double d = w - g.omega0;
    const double phase = -g.phi * w + g.beta * d * d;
    return std::polar(g.scale * gaussian_envelope(w, g.omega0, g.sigma), phase);
  }
  static complex derivative_of(const GaussianChirp& g, double w) {
    if (g.allow_near_origin && w < 0.0) return {0.0, 0.0};
    const double d = w - g.omega0;
    const complex factor{-d / (2.0 * g.sigma * g.sigma), -g.phi + 2.0 * g.beta * d};
    return amplitude_of(g, w) * factor;
  }

  static complex amplitude_of(const Comb& c, double w) {
    if (c.allow_near_origin && w < 0.0) return {0.0, 0.0};
    complex sum{0.0, 0.0};
    for (const auto& t : c.teeth) sum += t.weight * gaussian_envelope(w, t.center, t.width);
    return sum * std::polar(1.0, -c.phase_slope * w);
  }
  static complex derivative_of(const Comb& c, double w) {
    if (c.allow_near_origin && w < 0.0) return {0.0, 0.0};
    complex sum{0.0, 0.0}, dsum{0.0, 0.0};
    for (const auto& t : c.teeth) {
      const double g = gaussian_envelope(w, t.center, t.width);
      sum += t.weight * g;
      dsum += t.weight * g * (-(w - t.center) / (2.0 * t.width * t.width));
    }
    const complex carrier = std::polar(1.0, -c.phase_slope * w);
    return carrier * (dsum - complex{0.0, c.phase_slope} * sum);
  }

  static complex amplitude_of(const std::shared_ptr<const SampledModel>& s, double w) {
    return s->amplitude(w);
  }
  static complex derivative_of(const std::shared_ptr<const SampledModel>& s, double w) {
    return s->derivative(w);
  }

  static complex amplitude_of(const Superposition& s, double w) {
    complex sum{0.0, 0.0};
    for (const auto& t : s.terms) sum += t.coefficient * t.mode->amplitude(w);
    return sum;
  }
  static complex derivative_of(const Superposition& s, double w) {
    complex sum{0.0, 0.0};
    for (const auto& t : s.terms) sum += t.coefficient * t.mode->derivative(w);
    return sum;
  }

  void collect_support(double widths, std::vector<quad::Interval>& out) const {
    if (const auto* g = std::get_if<GaussianChirp>(&v_)) {
      out.push_back({g->omega0 - widths * g->sigma, g->omega0 + widths * g->sigma});
    } else if (const auto* c = std::get_if<Comb>(&v_)) {
      for (const auto& t : c->teeth) out.push_back({t.center - widths * t.width, t.center + widths * t.width});
    } else if (const auto* s = std::get_if<std::shared_ptr<const SampledModel>>(&v_)) {
      out.push_back({(*s)->omega().front(), (*s)->omega().back()});
    } else {
      for (const auto& t : std::get<Superposition>(v_).terms) t.mode->collect_support(widths, out);
    }
  }

  void collect_breakpoints(std::vector<double>& out) const {
    if (const auto* s = std::get_if<std::shared_ptr<const SampledModel>>(&v_)) {
      out.insert(out.end(), (*s)->omega().begin(), (*s)->omega().end());
    } else if (const auto* sp = std::get_if<Superposition>(&v_)) {
      for (const auto& t : sp->terms) t.mode->collect_breakpoints(out);
    }
  }

  Variant v_;
};

/// Splits each interval at the mode's breakpoints that fall inside it.
inline std::vector<quad::Interval> split_at_breakpoints(const std::vector<quad::Interval>& pieces,
                                                        const SpectralMode& mode) {
  const auto knots = mode.breakpoints();
  if (knots.empty()) return pieces;
  std::vector<quad::Interval> out;
  for (const auto& iv : pieces) {
    double lo = iv.lo;
    auto it = std::upper_bound(knots.begin(), knots.end(), lo);
    for (; it != knots.end() && *it < iv.hi; ++it) {
      out.push_back({lo, *it});
      lo = *it;
    }
    out.push_back({lo, iv.hi});
  }
  return out;
}

/// Support of the mode, split at its breakpoints.
inline std::vector<quad::Interval> quadrature_pieces(const SpectralMode& mode) {
  return split_at_breakpoints(mode.support(), mode);
}

// ---------------------------------------------------------------------------
// Integration helpers shared by every functional of a mode.

/// Integrates f over `support` according to the policy. Supports of modes
/// that allow near-origin placement are already clipped to w >= 0.
template <class Fn>
quad::Result integrate_over(Fn&& f, const std::vector<quad::Interval>& support,
                            const quad::Settings& settings) {
  if (support.empty()) return {};
  if (settings.policy == quad::SupportPolicy::map_half_line) {
    double scale = 0.0;
    for (const auto& iv : support) scale = std::max(scale, 0.5 * (iv.lo + iv.hi));
    return quad::integrate(std::forward<Fn>(f), quad::HalfLine{std::max(scale, 1e-300)}, settings);
  }
  // Many pieces already come from sampling knots and need no further split.
  const int initial_split = support.size() > 16 ? 1 : 4;
  return quad::integrate(std::forward<Fn>(f), std::span<const quad::Interval>(support), settings,
                         initial_split);
}

/// Throws QuadratureFailure unless the result converged with error at most
/// rel * |value| (or the absolute tolerance).
inline const quad::Result& require_converged(const quad::Result& r, std::string_view what,
                                             double rel = 0.0, double abs_floor = 0.0) {
  if (!r.converged) {
    throw Error(ErrorCode::quadrature_failure, std::string(what) + " did not converge (error estimate " +
                                                   format_number(r.error_estimate) + ")");
  }
  if (rel > 0.0 && r.error_estimate > std::max(abs_floor, rel * std::abs(r.value))) {
    throw Error(ErrorCode::quadrature_failure,
                std::string(what) + " missed its relative error target");
  }
  return r;
}

inline quad::Result norm_squared(const SpectralMode& mode, const quad::Settings& settings = {}) {
  try {
    return integrate_over([&mode](double w) { return complex{std::norm(mode.amplitude(w)), 0.0}; },
                          quadrature_pieces(mode), settings);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::non_finite_integrand) throw Error(ErrorCode::non_finite, e.what());
    throw;
  }
}

// ---------------------------------------------------------------------------
// Operations.

/// Complex amplitude at a non-negative frequency.
inline complex evaluate(const SpectralMode& mode, double omega) {
  if (!(omega >= 0.0)) {
    throw Error(ErrorCode::negative_frequency, "evaluate requires omega >= 0");
  }
  return mode.amplitude(omega);
}

/// Multiplies the mode by a constant factor.
inline SpectralMode scaled(const SpectralMode& mode, complex factor) {
  struct V {
    complex f;
    SpectralMode operator()(GaussianChirp g) const {
      // Gaussian scale is real; a phase factor would need a separate field,
      // so fold |f| into the scale and keep the global phase in a superposition.
      g.scale *= std::abs(f);
      auto base = SpectralMode::gaussian(g);
      const complex unit = std::abs(f) > 0.0 ? f / std::abs(f) : complex{1.0, 0.0};
      if (unit == complex{1.0, 0.0}) return base;
      return SpectralMode::superposition({Term{unit, std::make_shared<const SpectralMode>(base)}});
    }
    SpectralMode operator()(Comb c) const {
      for (auto& t : c.teeth) t.weight *= f;
      return SpectralMode::comb(std::move(c));
    }
    SpectralMode operator()(const std::shared_ptr<const SampledModel>& s) const {
      auto amplitudes = s->amplitudes();
      for (auto& a : amplitudes) a *= f;
      return SpectralMode::sampled(s->omega(), amplitudes, s->rule());
    }
    SpectralMode operator()(Superposition sp) const {
      for (auto& t : sp.terms) t.coefficient *= f;
      return SpectralMode::superposition(std::move(sp.terms));
    }
  };
  return std::visit(V{factor}, mode.variant());
}

/// Rescales the mode to unit L2 norm. Shape and phase are unchanged.
inline SpectralMode normalize(const SpectralMode& mode, const quad::Settings& settings = {}) {
  const auto n2 = norm_squared(mode, settings);
  require_converged(n2, "normalization integral");
  const double value = n2.value.real();
  if (!std::isfinite(value)) throw Error(ErrorCode::non_finite, "mode norm is not finite");
  if (value < 1e-300) throw Error(ErrorCode::zero_norm, "mode has zero L2 norm");
  return scaled(mode, complex{1.0 / std::sqrt(value), 0.0});
}

/// F'(w) = chi^-1 F(chi^-2 w).
inline SpectralMode redshift_transform(const SpectralMode& mode, RedshiftFactor chi) {
  const double c2 = chi.chi_squared();
  struct V {
    double c2;
    double chi;
    SpectralMode operator()(GaussianChirp g) const {
      g.omega0 *= c2;
      g.sigma *= c2;
      g.phi /= c2;
      g.beta /= c2 * c2;
      return SpectralMode::gaussian(g);
    }
    SpectralMode operator()(Comb c) const {
      for (auto& t : c.teeth) {
        t.center *= c2;
        t.width *= c2;
      }
      c.phase_slope /= c2;
      return SpectralMode::comb(std::move(c));
    }
    SpectralMode operator()(const std::shared_ptr<const SampledModel>& s) const {
      std::vector<double> omega = s->omega();
      std::vector<double> magnitude = s->magnitude();
      for (auto& w : omega) w *= c2;
      for (auto& m : magnitude) m /= chi;
      return SpectralMode::sampled(SampledModel(std::move(omega), std::move(magnitude), s->phase(), s->rule()));
    }
    SpectralMode operator()(const Superposition& sp) const {
      std::vector<Term> terms;
      terms.reserve(sp.terms.size());
      for (const auto& t : sp.terms) {
        terms.push_back({t.coefficient, std::make_shared<const SpectralMode>(redshift_transform(*t.mode, RedshiftFactor(chi)))});
      }
      return SpectralMode::superposition(std::move(terms));
    }
  };
  if (chi.chi() == 1.0) return mode;
  return std::visit(V{c2, chi.chi()}, mode.variant());
}

/// F(w) * exp(i c w).
inline SpectralMode with_linear_phase(const SpectralMode& mode, double c) {
  struct V {
    double c;
    SpectralMode operator()(GaussianChirp g) const {
      g.phi -= c;
      return SpectralMode::gaussian(g);
    }
    SpectralMode operator()(Comb comb) const {
      comb.phase_slope -= c;
      return SpectralMode::comb(std::move(comb));
    }
    SpectralMode operator()(const std::shared_ptr<const SampledModel>& s) const {
      std::vector<double> phase = s->phase();
      for (std::size_t i = 0; i < phase.size(); ++i) phase[i] += c * s->omega()[i];
      return SpectralMode::sampled(SampledModel(s->omega(), s->magnitude(), std::move(phase), s->rule()));
    }
    SpectralMode operator()(const Superposition& sp) const {
      std::vector<Term> terms;
      for (const auto& t : sp.terms) {
        terms.push_back({t.coefficient, std::make_shared<const SpectralMode>(with_linear_phase(*t.mode, c))});
      }
      return SpectralMode::superposition(std::move(terms));
    }
  };
  if (c == 0.0) return mode;
  return std::visit(V{c}, mode.variant());
}

/// Mean frequency int w |F(w)|^2 dw of a normalized mode.
inline double mean_frequency(const SpectralMode& mode, const quad::Settings& settings = {}) {
  const auto r = integrate_over(
      [&mode](double w) { return complex{w * std::norm(mode.amplitude(w)), 0.0}; }, quadrature_pieces(mode),
      settings);
  require_converged(r, "mean frequency", 1e-8, settings.abs_tol);
  return r.value.real();
}

/// Root variance of |F|^2; the natural frequency scale of any mode.
inline double root_variance(const SpectralMode& mode, const quad::Settings& settings = {}) {
  const double mean = mean_frequency(mode, settings);
  const auto r = integrate_over(
      [&mode, mean](double w) {
        const double d = w - mean;
        return complex{d * d * std::norm(mode.amplitude(w)), 0.0};
      },
      quadrature_pieces(mode), settings);
  require_converged(r, "frequency variance");
  return std::sqrt(std::max(r.value.real(), 0.0));
}

/// |F(0)|^2 * width: how much of the mode leaks to the origin.
inline double origin_leakage(const SpectralMode& mode) {
  return std::norm(mode.amplitude(0.0)) * mode.reference_width();
}

/// F(x) = exp(i theta(x)) rho(x) sampled on the dimensionless axis x = w / sigma.
struct PolarDecomposition {
  double sigma = 1.0;  // reference scale used for x
  std::vector<double> x;
  std::vector<double> rho;    // |F(sigma x)| sqrt(sigma)
  std::vector<double> theta;  // unwrapped phase, radians

  [[nodiscard]] complex reconstruct(std::size_t i) const { return std::polar(rho[i], theta[i]); }

  /// Trapezoid estimate of int rho^2 dx.
  [[nodiscard]] double norm_squared() const {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      sum += 0.5 * (x[i + 1] - x[i]) * (rho[i] * rho[i] + rho[i + 1] * rho[i + 1]);
    }
    return sum;
  }
};

/// Default window for phase unwrapping: hull of the component windows of
/// half-width kPolarWidths, clipped to w >= 0.
inline quad::Interval polar_window(const SpectralMode& mode) {
  const auto pieces = mode.support(kPolarWidths);
  quad::Interval hull{pieces.front().lo, pieces.back().hi};
  hull.lo = std::max(hull.lo, 0.0);
  if (std::holds_alternative<std::shared_ptr<const SampledModel>>(mode.variant())) {
    // Samples decay to ~1e-10 at the ends; keep the part above 1e-8 of the peak.
    const auto& s = *std::get<std::shared_ptr<const SampledModel>>(mode.variant());
    const auto& m = s.magnitude();
    const double peak = *std::max_element(m.begin(), m.end());
    std::size_t first = 0, last = m.size() - 1;
    while (first < last && m[first] < 1e-8 * peak) ++first;
    while (last > first && m[last] < 1e-8 * peak) --last;
    hull = {s.omega()[first], s.omega()[last]};
  }
  return hull;
}

/// Polar form on a grid of step <= width/100. `sigma` is the reference
/// scale for x (the root variance when not given).
inline PolarDecomposition polar_decompose(const SpectralMode& mode,
                                          std::optional<quad::Interval> window = std::nullopt,
                                          std::optional<double> sigma = std::nullopt,
                                          const quad::Settings& settings = {}) {
  const quad::Interval win = window.value_or(polar_window(mode));
  if (win.empty()) throw Error(ErrorCode::invalid_argument, "empty polar window");
  const double ref = sigma.value_or(root_variance(mode, settings));
  if (!(ref > 0.0)) throw Error(ErrorCode::invalid_argument, "reference scale must be positive");
  const double step_limit = mode.reference_width() / 100.0;
  const auto n = static_cast<std::size_t>(std::ceil(win.length() / step_limit)) + 1;

  PolarDecomposition out;
  out.sigma = ref;
  out.x.resize(n);
  out.rho.resize(n);
  out.theta.resize(n);
  std::vector<complex> values(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = win.lo + win.length() * static_cast<double>(i) / static_cast<double>(n - 1);
    values[i] = mode.amplitude(w);
    out.x[i] = w / ref;
    peak = std::max(peak, std::abs(values[i]));
  }
  const double root = std::sqrt(ref);
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::abs(values[i]);
    if (mag < 1e-12 * peak) {
      throw Error(ErrorCode::phase_undefined,
                  "|F| drops below 1e-12 of its peak at w = " + format_number(out.x[i] * ref) +
                      "; restrict the window to individual components");
    }
    out.rho[i] = mag * root;
    const double raw = std::arg(values[i]);
    out.theta[i] = i == 0 ? raw : detail::wrap_to_nearest(raw, out.theta[i - 1]);
  }
  return out;
}

}  // namespace spectra
}  // namespace qredshift
