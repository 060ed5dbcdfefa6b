#pragma once

// Adaptive Gauss-Kronrod (G10/K21) integration of complex-valued integrands.
//
// Panels are kept in positional order; every refinement step bisects the
// panel with the largest local error, lowest index first on ties, so the
// sequence of evaluations is fully deterministic.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qredshift/error.hpp"

namespace qredshift {

using complex = std::complex<double>;

namespace quad {

enum class SupportPolicy {
  truncate,       // integrate over the union of effective supports
  map_half_line,  // map [0, inf) onto [0, 1) through w = s t / (1 - t)
};

struct Settings {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int max_subdivisions = 200;
  SupportPolicy policy = SupportPolicy::truncate;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "quadrature tolerances must be positive");
    }
    if (max_subdivisions < 0) {
      throw Error(ErrorCode::invalid_argument, "max_subdivisions must be non-negative");
    }
  }
};

struct Result {
  complex value{0.0, 0.0};
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double length() const { return hi - lo; }
  [[nodiscard]] bool empty() const { return !(hi > lo); }
};

/// Half-line [0, inf) with a characteristic frequency used by the mapping.
struct HalfLine {
  double scale = 1.0;
};

/// Sorts and merges overlapping intervals; drops empty ones.
inline std::vector<Interval> merge(std::vector<Interval> pieces) {
  std::erase_if(pieces, [](const Interval& iv) { return iv.empty(); });
  std::sort(pieces.begin(), pieces.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& iv : pieces) {
    if (!out.empty() && iv.lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

/// Pairwise intersection of two interval unions.
inline std::vector<Interval> intersect(std::span<const Interval> a, std::span<const Interval> b) {
  std::vector<Interval> out;
  for (const auto& x : a) {
    for (const auto& y : b) {
      Interval iv{std::max(x.lo, y.lo), std::min(x.hi, y.hi)};
      if (!iv.empty()) out.push_back(iv);
    }
  }
  return merge(std::move(out));
}

inline std::vector<Interval> clip_below(std::vector<Interval> pieces, double floor) {
  for (auto& iv : pieces) iv.lo = std::max(iv.lo, floor);
  return merge(std::move(pieces));
}

namespace detail {

// QUADPACK qk21 abscissae/weights. Odd indices of kXgk are the Gauss points.
inline constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208745046649, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double lo;
  double hi;
  complex value;
  double error;
};

template <class Fn>
complex checked_call(Fn& f, double x) {
  const complex y = f(x);
  if (!std::isfinite(y.real()) || !std::isfinite(y.imag())) {
    throw Error(ErrorCode::non_finite_integrand,
                "integrand is not finite at x = " + format_number(x));
  }
  return y;
}

template <class Fn>
Panel kronrod21(Fn& f, double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  const complex fc = checked_call(f, center);
  complex kronrod = kWgk[10] * fc;
  complex gauss{0.0, 0.0};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    const complex pair = checked_call(f, center - dx) + checked_call(f, center + dx);
    kronrod += kWgk[j] * pair;
    if (j % 2 == 1) gauss += kWg[j / 2] * pair;
  }
  kronrod *= half;
  gauss *= half;
  return {lo, hi, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Integrates f over a union of intervals. Each interval starts as
/// `initial_split` equal panels.
template <class Fn>
Result integrate(Fn&& f, std::span<const Interval> pieces, const Settings& settings,
                 int initial_split = 4) {
  settings.validate();
  std::vector<detail::Panel> panels;
  Result result;
  for (const auto& iv : pieces) {
    if (iv.empty()) continue;
    const int n = std::max(1, initial_split);
    for (int k = 0; k < n; ++k) {
      const double a = iv.lo + iv.length() * k / n;
      const double b = (k + 1 == n) ? iv.hi : iv.lo + iv.length() * (k + 1) / n;
      panels.push_back(detail::kronrod21(f, a, b));
      result.evaluations += 21;
    }
  }
  if (panels.empty()) return result;

  auto totals = [&panels] {
    complex v{0.0, 0.0};
    double e = 0.0;
    for (const auto& p : panels) {
      v += p.value;
      e += p.error;
    }
    return std::pair{v, e};
  };

  int subdivisions = 0;
  for (;;) {
    const auto [value, error] = totals();
    result.value = value;
    result.error_estimate = error;
    if (error <= std::max(settings.abs_tol, settings.rel_tol * std::abs(value))) {
      result.converged = true;
      return result;
    }
    if (subdivisions >= settings.max_subdivisions) break;

    std::size_t worst = 0;
    for (std::size_t i = 1; i < panels.size(); ++i) {
      if (panels[i].error > panels[worst].error) worst = i;
    }
    const auto target = panels[worst];
    const double mid = 0.5 * (target.lo + target.hi);
    if (!(mid > target.lo && mid < target.hi)) break;  // cannot split further
    panels[worst] = detail::kronrod21(f, target.lo, mid);
    panels.insert(panels.begin() + static_cast<std::ptrdiff_t>(worst) + 1,
                  detail::kronrod21(f, mid, target.hi));
    result.evaluations += 42;
    ++subdivisions;
  }
  result.converged = false;
  return result;
}

template <class Fn>
Result integrate(Fn&& f, Interval window, const Settings& settings, int initial_split = 4) {
  const std::array<Interval, 1> one{window};
  return integrate(std::forward<Fn>(f), std::span<const Interval>(one), settings, initial_split);
}

/// Integrates f over [0, inf) after the substitution w = s t / (1 - t).
template <class Fn>
Result integrate(Fn&& f, HalfLine line, const Settings& settings) {
  if (!(line.scale > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "half-line scale must be positive");
  }
  const double s = line.scale;
  auto mapped = [&f, s](double t) -> complex {
    const double one_minus = 1.0 - t;
    const double w = s * t / one_minus;
    if (!std::isfinite(w)) return {0.0, 0.0};
    const complex y = f(w);
    if (y == complex{0.0, 0.0}) return y;
    return y * (s / (one_minus * one_minus));
  };
  return integrate(mapped, Interval{0.0, 1.0}, settings, 16);
}

}  // namespace quad
}  // namespace qredshift
