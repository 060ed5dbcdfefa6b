#pragma once

#include <cmath>
#include <vector>

#include "qredshift/quad.hpp"
#include "qredshift/spectra.hpp"

namespace qredshift::quad {

/// <F, G> = int conj(F(w)) G(w) dw. The integrand vanishes outside the
/// intersection of the two effective supports, which is all that is
/// integrated under the truncation policy.
inline Result inner_product(const spectra::SpectralMode& f, const spectra::SpectralMode& g,
                            const Settings& settings = {}) {
  auto integrand = [&f, &g](double w) { return std::conj(f.amplitude(w)) * g.amplitude(w); };
  const auto fs = f.support();
  const auto gs = g.support();
  if (settings.policy == SupportPolicy::map_half_line) {
    auto both = fs;
    both.insert(both.end(), gs.begin(), gs.end());
    return spectra::integrate_over(integrand, merge(std::move(both)), settings);
  }
  const auto pieces = spectra::split_at_breakpoints(spectra::split_at_breakpoints(intersect(fs, gs), f), g);
  return spectra::integrate_over(integrand, pieces, settings);
}

/// sqrt(int |F - G|^2 dw).
inline double l2_distance(const spectra::SpectralMode& f, const spectra::SpectralMode& g,
                          const Settings& settings = {}) {
  auto support = f.support();
  const auto gs = g.support();
  support.insert(support.end(), gs.begin(), gs.end());
  const auto r = spectra::integrate_over(
      [&f, &g](double w) { return complex{std::norm(f.amplitude(w) - g.amplitude(w)), 0.0}; },
      spectra::split_at_breakpoints(spectra::split_at_breakpoints(merge(std::move(support)), f), g), settings);
  spectra::require_converged(r, "L2 distance");
  return std::sqrt(std::max(r.value.real(), 0.0));
}

}  // namespace qredshift::quad
