#pragma once

// N modes of interest plus one environment mode: the (N+1)x(N+1) mixing
// matrix U with U_nm = <F_n'|F_m> in the upper-left block.
//
// The block A can be completed with a single environment mode exactly when
// the Gram deficit G = I - A A^dagger (PSD, since every row of A has norm
// at most one) has rank <= 1. The completion residual
//
//     r = (sum_{i >= 2} lambda_i) / (N - 1)
//
// is the mean weight of G outside its leading eigenvector, i.e. the
// probability that would have to leak into additional environment modes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "qredshift/error.hpp"
#include "qredshift/inner_product.hpp"
#include "qredshift/overlap.hpp"
#include "qredshift/parallel.hpp"
#include "qredshift/spectra.hpp"

namespace qredshift::mixer {

using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using spectra::SpectralMode;

inline constexpr double kOrthonormalTolerance = 1e-8;
inline constexpr double kUnitaryTolerance = 1e-8;

/// ||U U^dagger - I||_F.
inline double unitarity_deficit(const Matrix& u) {
  if (u.rows() != u.cols()) throw Error(ErrorCode::invalid_argument, "unitarity_deficit needs a square matrix");
  return (u * u.adjoint() - Matrix::Identity(u.rows(), u.cols())).norm();
}

/// Pairwise overlap matrix <F_j, F_k>.
inline Matrix gram_matrix(const std::vector<SpectralMode>& modes, const quad::Settings& settings,
                          std::size_t workers = 1) {
  const auto n = static_cast<Eigen::Index>(modes.size());
  Matrix g(n, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> upper;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j; k < n; ++k) upper.emplace_back(j, k);
  detail::parallel_for(upper.size(), workers, [&](std::size_t i) {
    const auto [j, k] = upper[i];
    const auto r = quad::inner_product(modes[j], modes[k], settings);
    spectra::require_converged(r, "basis overlap");
    g(j, k) = r.value;
  });
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) g(j, k) = std::conj(g(k, j));
  }
  return g;
}

class BasisSet {
 public:
  /// Validates |<F_j, F_k> - delta_jk| <= 1e-8.
  static BasisSet from_orthonormal(std::vector<SpectralMode> modes, const quad::Settings& settings = {}) {
    if (modes.empty()) throw Error(ErrorCode::invalid_argument, "basis needs at least one mode");
    Matrix g = gram_matrix(modes, settings);
    const double error = (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
    if (error > kOrthonormalTolerance) {
      throw Error(ErrorCode::not_orthonormal,
                  "basis modes deviate from orthonormality by " + std::to_string(error));
    }
    return BasisSet(std::move(modes), std::move(g));
  }

  [[nodiscard]] std::size_t size() const { return modes_.size(); }
  [[nodiscard]] const std::vector<SpectralMode>& modes() const { return modes_; }
  [[nodiscard]] const SpectralMode& operator[](std::size_t i) const { return modes_[i]; }
  [[nodiscard]] const Matrix& overlaps() const { return overlaps_; }

 private:
  BasisSet(std::vector<SpectralMode> modes, Matrix overlaps)
      : modes_(std::move(modes)), overlaps_(std::move(overlaps)) {}

  std::vector<SpectralMode> modes_;
  Matrix overlaps_;
};

/// Modified Gram-Schmidt with one reorthogonalization pass, carried out on
/// coefficient vectors in the metric of the raw Gram matrix. Output modes are
/// superpositions of the raw modes; the first is the normalized first input.
inline BasisSet gram_schmidt(const std::vector<SpectralMode>& raw, const quad::Settings& settings = {}) {
  if (raw.empty()) throw Error(ErrorCode::invalid_argument, "gram_schmidt needs at least one mode");
  const auto n = static_cast<Eigen::Index>(raw.size());
  const Matrix g = gram_matrix(raw, settings);

  Eigen::SelfAdjointEigenSolver<Matrix> spectrum(0.5 * (g + g.adjoint()), Eigen::EigenvaluesOnly);
  const double lo = spectrum.eigenvalues().minCoeff();
  const double hi = spectrum.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12) {
    throw Error(ErrorCode::linear_dependence, "raw modes are numerically linearly dependent");
  }

  auto inner = [&g](const Vector& a, const Vector& b) { return (a.adjoint() * g * b)(0, 0); };
  std::vector<Vector> basis;
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector v = Vector::Unit(n, k);
    const double original = std::sqrt(std::max(inner(v, v).real(), 0.0));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& e : basis) v -= inner(e, v) * e;
    }
    const double residual = std::sqrt(std::max(inner(v, v).real(), 0.0));
    if (residual < 1e-10 * original) {
      throw Error(ErrorCode::linear_dependence,
                  "mode " + std::to_string(k) + " lies in the span of the previous modes");
    }
    basis.push_back(v / residual);
  }

  std::vector<SpectralMode> modes;
  for (const auto& coeffs : basis) {
    const double largest = coeffs.cwiseAbs().maxCoeff();
    std::vector<spectra::Term> terms;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(coeffs(i)) > 1e-16 * largest) {
        terms.push_back({coeffs(i), std::make_shared<const SpectralMode>(raw[static_cast<std::size_t>(i)])});
      }
    }
    if (terms.size() == 1) {
      modes.push_back(spectra::scaled(*terms.front().mode, terms.front().coefficient));
    } else {
      modes.push_back(SpectralMode::superposition(std::move(terms)));
    }
  }
  return BasisSet::from_orthonormal(std::move(modes), settings);
}

/// A_nm = <F_n'|F_m>, F_n' the redshifted basis mode.
inline Matrix overlap_block(const BasisSet& basis, RedshiftFactor chi, const quad::Settings& settings = {},
                            std::size_t workers = 1) {
  const auto n = basis.size();
  std::vector<SpectralMode> transformed;
  transformed.reserve(n);
  for (const auto& m : basis.modes()) transformed.push_back(spectra::redshift_transform(m, chi));
  Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  detail::parallel_for(n * n, workers, [&](std::size_t idx) {
    const std::size_t row = idx / n, col = idx % n;
    const auto r = quad::inner_product(transformed[row], basis[col], settings);
    spectra::require_converged(r, "overlap block entry");
    a(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = r.value;
  });
  return a;
}

struct GramDeficit {
  Matrix G;
  std::vector<double> eigenvalues;  // descending
  Vector leading_vector;
  double rank1_residual = 0.0;      // mean non-leading eigenvalue
  double relative_residual = 0.0;   // non-leading fraction of the trace
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double hermiticity_error = 0.0;
  bool rank_ambiguous = false;
};

inline GramDeficit gram_deficit(const Matrix& a) {
  const auto n = a.rows();
  GramDeficit out;
  Matrix g = Matrix::Identity(n, n) - a * a.adjoint();
  out.hermiticity_error = (g - g.adjoint()).norm();
  out.G = 0.5 * (g + g.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(out.G);
  const auto& values = solver.eigenvalues();  // ascending
  for (Eigen::Index i = n - 1; i >= 0; --i) out.eigenvalues.push_back(values(i));
  out.leading_vector = solver.eigenvectors().col(n - 1);
  out.max_eigenvalue = out.eigenvalues.front();
  out.min_eigenvalue = out.eigenvalues.back();

  double trace = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < out.eigenvalues.size(); ++i) {
    const double lambda = std::max(out.eigenvalues[i], 0.0);
    trace += lambda;
    if (i > 0) tail += lambda;
  }
  out.rank1_residual = n > 1 ? std::min(tail / static_cast<double>(n - 1), 1.0) : 0.0;
  out.relative_residual = tail / std::max(trace, 1e-300);
  return out;
}

struct MixerMatrix {
  double chi = 1.0;
  Matrix entries;
  double deficit = 0.0;
  double completion_residual = 0.0;
  bool completed = false;
  bool rank_ambiguous = false;
  GramDeficit gram;

  [[nodiscard]] Eigen::Index modes() const { return entries.rows() - 1; }
};

using Completion = std::variant<MixerMatrix, GramDeficit>;

/// Builds U from A using the leading eigenpair of G for the environment
/// column, regardless of the residual. The last row spans the orthogonal
/// complement of the first N rows, with U_perp,perp real and non-negative.
inline MixerMatrix forced_completion(const Matrix& a, const GramDeficit& gd, double chi = 1.0) {
  const auto n = a.rows();
  Vector b = std::sqrt(std::max(gd.max_eigenvalue, 0.0)) * gd.leading_vector;
  Eigen::Index pivot = 0;
  b.cwiseAbs().maxCoeff(&pivot);
  if (std::abs(b(pivot)) > 0.0) b *= std::conj(b(pivot)) / std::abs(b(pivot));

  Matrix top(n, n + 1);
  top.leftCols(n) = a;
  top.col(n) = b;

  Eigen::HouseholderQR<Matrix> qr(top.adjoint());
  const Matrix q = qr.householderQ() * Matrix::Identity(n + 1, n + 1);
  Vector last = q.col(n).conjugate();
  if (std::abs(last(n)) > 1e-14) {
    last *= std::conj(last(n)) / std::abs(last(n));
  } else {
    Eigen::Index big = 0;
    last.cwiseAbs().maxCoeff(&big);
    last *= -std::conj(last(big)) / std::abs(last(big));
  }

  MixerMatrix out;
  out.chi = chi;
  out.entries.resize(n + 1, n + 1);
  out.entries.topRows(n) = top;
  out.entries.row(n) = last.transpose();
  out.deficit = unitarity_deficit(out.entries);
  out.completion_residual = gd.rank1_residual;
  out.completed = out.deficit <= kUnitaryTolerance;
  out.rank_ambiguous = gd.rank_ambiguous;
  out.gram = gd;
  return out;
}

/// Completes A with one environment mode when r <= tolerance; otherwise the
/// Gram deficit is returned as the failure report.
inline Completion complete_with_environment(const Matrix& a, double tolerance, double chi = 1.0) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorCode::invalid_argument, "overlap block must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (a.row(i).norm() > 1.0 + 1e-9) {
      throw Error(ErrorCode::invalid_argument, "overlap block row " + std::to_string(i) + " has norm > 1");
    }
  }
  GramDeficit gd = gram_deficit(a);
  gd.rank_ambiguous = std::abs(gd.rank1_residual - tolerance) <= 1e-12;
  if (gd.rank1_residual > tolerance) return gd;
  return forced_completion(a, gd, chi);
}

/// Angles of U = e^{i psi} [[cos t, e^{i p1} sin t], [-e^{i p2} sin t, e^{i(p1-p2)} cos t]].
struct SingleModeMatrix {
  MixerMatrix matrix;
  double theta = 0.0;
  double psi = 0.0;
  double phi1 = 0.0;
  double phi2 = 0.0;
};

inline SingleModeMatrix single_mode_matrix(const SpectralMode& mode, RedshiftFactor chi,
                                           const quad::Settings& settings = {}) {
  const auto delta = overlap::overlap_exact(mode, chi, settings);
  Matrix a(1, 1);
  // |Delta| <= 1 holds analytically; quadrature can overshoot by rounding.
  a(0, 0) = delta.magnitude > 1.0 ? delta.delta / delta.magnitude : delta.delta;
  auto completion = complete_with_environment(a, 0.0, chi.chi());
  SingleModeMatrix out;
  out.matrix = std::get<MixerMatrix>(std::move(completion));
  const auto& u = out.matrix.entries;
  out.theta = std::acos(std::clamp(std::abs(u(0, 0)), 0.0, 1.0));
  out.psi = std::abs(u(0, 0)) > 0.0 ? std::arg(u(0, 0)) : 0.0;
  out.phi1 = std::arg(u(0, 1)) - out.psi;
  out.phi2 = std::arg(-u(1, 0)) - out.psi;
  return out;
}

struct Generator {
  Matrix M;
  double anti_hermiticity_defect = 0.0;  // ||M + M^dagger||_F / ||M||_F
  std::vector<double> epsilons;
};

/// Extracts U(1 + eps) ~ 1 + eps M by a least-squares fit of
/// (U(1 + eps) - I)/eps = M + eps M2 over the given eps values.
inline Generator perturbative_generator(const BasisSet& basis, std::vector<double> epsilons = {1e-4, 2e-4, 4e-4},
                                        double tolerance = 1e-3, const quad::Settings& settings = {},
                                        std::size_t workers = 1) {
  if (epsilons.empty()) throw Error(ErrorCode::invalid_argument, "need at least one epsilon");
  const auto dim = static_cast<Eigen::Index>(basis.size()) + 1;
  std::vector<Matrix> slopes;
  for (const double eps : epsilons) {
    if (!(eps != 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::invalid_argument, "epsilon must be nonzero");
    const RedshiftFactor chi(1.0 + eps);
    auto completion = complete_with_environment(overlap_block(basis, chi, settings, workers), tolerance, chi.chi());
    if (const auto* failure = std::get_if<GramDeficit>(&completion)) {
      throw Error(ErrorCode::completion_failed, "completion failed at eps = " + format_number(eps) +
                                                    " (residual " + format_number(failure->rank1_residual) + ")");
    }
    const auto& u = std::get<MixerMatrix>(completion).entries;
    slopes.push_back((u - Matrix::Identity(dim, dim)) / eps);
  }

  Generator out;
  out.epsilons = epsilons;
  if (epsilons.size() == 1) {
    out.M = slopes.front();
  } else {
    double mean_eps = 0.0;
    Matrix mean_y = Matrix::Zero(dim, dim);
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
      mean_eps += epsilons[k];
      mean_y += slopes[k];
    }
    mean_eps /= static_cast<double>(epsilons.size());
    mean_y /= static_cast<double>(epsilons.size());
    double sxx = 0.0;
    Matrix sxy = Matrix::Zero(dim, dim);
    for (std::size_t k = 0; k < epsilons.size(); ++k) {
      const double dx = epsilons[k] - mean_eps;
      sxx += dx * dx;
      sxy += dx * (slopes[k] - mean_y);
    }
    const Matrix trend = sxx > 0.0 ? Matrix(sxy / sxx) : Matrix(Matrix::Zero(dim, dim));
    out.M = mean_y - mean_eps * trend;
  }
  const double norm = out.M.norm();
  out.anti_hermiticity_defect = norm > 0.0 ? (out.M + out.M.adjoint()).norm() / norm : 0.0;
  return out;
}

}  // namespace qredshift::mixer
