#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "family.hpp"
#include "qredshift/mixer.hpp"

namespace qredshift {
namespace {

using mixer::BasisSet;
using mixer::GramDeficit;
using mixer::Matrix;
using mixer::MixerMatrix;
using spectra::SpectralMode;
using testing::gaussian;

BasisSet pair_at(double w1, double w2, double sigma) {
  return mixer::gram_schmidt({gaussian(w1, sigma), gaussian(w2, sigma)});
}

std::vector<BasisSet> bases() {
  using namespace std::complex_literals;
  return {
      mixer::gram_schmidt({gaussian(10.0, 1.0)}),
      pair_at(10.0, 30.0, 1.0),
      mixer::gram_schmidt({gaussian(10.0, 1.0, 0.2), gaussian(12.0, 1.0, -0.1, 0.2)}),
      mixer::gram_schmidt({gaussian(10.0, 1.0), gaussian(16.0, 1.0, 0.3), gaussian(22.0, 1.5)}),
      mixer::gram_schmidt({testing::comb({{10.0, 1.0, 1.0}, {13.0, 1.0, 0.6i}}), gaussian(20.0, 1.0)}),
  };
}

TEST(GramSchmidt, SeparatedPairUnchanged) {
  const std::vector<SpectralMode> raw{gaussian(10.0, 1.0), gaussian(30.0, 1.0)};
  const auto basis = mixer::gram_schmidt(raw);
  ASSERT_EQ(basis.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(quad::l2_distance(basis[i], raw[i]), 1e-10);
}

TEST(GramSchmidt, SingleModeIsNormalized) {
  const auto doubled = SpectralMode::gaussian({10.0, 1.0, 0.3, 0.0, 2.0});
  const auto basis = mixer::gram_schmidt({doubled});
  ASSERT_EQ(basis.size(), 1u);
  EXPECT_NEAR(spectra::norm_squared(basis[0]).value.real(), 1.0, 1e-9);
  EXPECT_LE(quad::l2_distance(basis[0], gaussian(10.0, 1.0, 0.3)), 1e-9);
}

TEST(GramSchmidt, IdenticalModesAreDependent) {
  try {
    (void)mixer::gram_schmidt({gaussian(10.0, 1.0), gaussian(10.0, 1.0)});
    FAIL() << "expected LinearDependence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::linear_dependence);
  }
}

TEST(GramSchmidt, OverlappingModesBecomeOrthonormal) {
  const std::vector<SpectralMode> raw{gaussian(10.0, 1.0), gaussian(11.0, 1.0, 0.2), gaussian(12.5, 1.2)};
  const auto basis = mixer::gram_schmidt(raw);
  const Matrix g = mixer::gram_matrix(basis.modes(), {});
  EXPECT_LE((g - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(quad::l2_distance(basis[0], raw[0]), 1e-10);
}

TEST(GramSchmidt, RejectsNonOrthonormalBasis) {
  try {
    (void)BasisSet::from_orthonormal({gaussian(10.0, 1.0), gaussian(11.0, 1.0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_orthonormal);
  }
}

TEST(OverlapBlock, IdentityAtChiOne) {
  for (const auto& basis : bases()) {
    const Matrix a = mixer::overlap_block(basis, RedshiftFactor(1.0));
    EXPECT_LE((a - Matrix::Identity(a.rows(), a.cols())).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(OverlapBlock, VanishesForExtremeRedshift) {
  const Matrix a = mixer::overlap_block(pair_at(10.0, 30.0, 1.0), RedshiftFactor(50.0));
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OverlapBlock, SingleModeMatchesOverlap) {
  const auto g = gaussian(10.0, 1.0, 0.2);
  for (const double chi : {0.7, 1.01, 1.4}) {
    const Matrix a = mixer::overlap_block(mixer::gram_schmidt({g}), RedshiftFactor(chi));
    const auto d = overlap::overlap_exact(g, RedshiftFactor(chi));
    EXPECT_LE(std::abs(a(0, 0) - d.delta), 1e-10);
  }
}

TEST(OverlapBlock, RowNormsBounded) {
  for (const auto& basis : bases()) {
    for (const double chi : {0.5, 0.95, 1.05, 1.73, 3.0}) {
      const Matrix a = mixer::overlap_block(basis, RedshiftFactor(chi));
      for (Eigen::Index i = 0; i < a.rows(); ++i) EXPECT_LE(a.row(i).norm(), 1.0 + 1e-9);
    }
  }
}

TEST(OverlapBlock, WorkerCountDoesNotMatter) {
  const auto basis = bases()[3];
  const Matrix a = mixer::overlap_block(basis, RedshiftFactor(1.2), {}, 1);
  const Matrix b = mixer::overlap_block(basis, RedshiftFactor(1.2), {}, 4);
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Complete, SingleModeAlwaysCompletes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.0, 1.0), ph(-3.1, 3.1);
  for (int i = 0; i < 50; ++i) {
    Matrix a(1, 1);
    a(0, 0) = std::polar(mag(rng), ph(rng));
    const auto c = mixer::complete_with_environment(a, 1e-3);
    ASSERT_TRUE(std::holds_alternative<MixerMatrix>(c));
    const auto& u = std::get<MixerMatrix>(c);
    EXPECT_LE(u.deficit, 1e-10);
    EXPECT_EQ(u.entries(0, 0), a(0, 0));
    EXPECT_NEAR(std::norm(u.entries(0, 1)), 1.0 - std::norm(a(0, 0)), 1e-12);
    EXPECT_GE(u.entries(1, 1).real(), 0.0);
  }
}

TEST(Complete, IdentityBlock) {
  const auto c = mixer::complete_with_environment(Matrix::Identity(3, 3), 1e-3);
  ASSERT_TRUE(std::holds_alternative<MixerMatrix>(c));
  const auto& u = std::get<MixerMatrix>(c);
  EXPECT_LE((u.entries - Matrix::Identity(4, 4)).norm(), 1e-14);
  EXPECT_EQ(u.completion_residual, 0.0);
}

TEST(Complete, ZeroBlockFails) {
  const auto c = mixer::complete_with_environment(Matrix::Zero(2, 2), 1e-3);
  ASSERT_TRUE(std::holds_alternative<GramDeficit>(c));
  const auto& g = std::get<GramDeficit>(c);
  EXPECT_LE((g.G - Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_NEAR(g.eigenvalues[0], 1.0, 1e-15);
  EXPECT_NEAR(g.eigenvalues[1], 1.0, 1e-15);
  EXPECT_NEAR(g.relative_residual, 0.5, 1e-15);
  EXPECT_NEAR(g.rank1_residual, 1.0, 1e-15);
  // The forced completion cannot be unitary.
  const auto forced = mixer::forced_completion(Matrix::Zero(2, 2), g);
  EXPECT_FALSE(forced.completed);
  EXPECT_GE(forced.deficit, 1.0);
}

TEST(Complete, RankOneDeficitIsExact) {
  // A = diag(c, 1): G has rank one, so completion is exact.
  Matrix a = Matrix::Identity(2, 2);
  a(0, 0) = std::polar(0.6, 0.4);
  const auto c = mixer::complete_with_environment(a, 1e-3);
  ASSERT_TRUE(std::holds_alternative<MixerMatrix>(c));
  const auto& u = std::get<MixerMatrix>(c);
  EXPECT_LE(u.deficit, 1e-14);
  EXPECT_LE((u.entries.topLeftCorner(2, 2) - a).norm(), 0.0);
  for (Eigen::Index i = 0; i < 2; ++i) {
    EXPECT_NEAR(std::norm(u.entries(i, 2)), 1.0 - a.row(i).squaredNorm(), 1e-14);
  }
}

TEST(Complete, AmbiguityFlag) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = std::sqrt(0.5);
  // G = diag(0, 1/2): one nonzero eigenvalue, r = 0.
  const auto c = mixer::complete_with_environment(a, 0.0);
  EXPECT_TRUE(std::get<MixerMatrix>(c).rank_ambiguous);
}

TEST(Complete, RejectsOversizedRows) {
  Matrix a = Matrix::Identity(2, 2) * 1.1;
  EXPECT_THROW((void)mixer::complete_with_environment(a, 1e-3), Error);
}

TEST(SingleMode, IdentityAtChiOne) {
  const auto s = mixer::single_mode_matrix(gaussian(10.0, 1.0, 0.4), RedshiftFactor(1.0));
  EXPECT_LE((s.matrix.entries - Matrix::Identity(2, 2)).norm(), 1e-9);
  EXPECT_NEAR(s.theta, 0.0, 1e-4);
}

TEST(SingleMode, ExtremeLimit) {
  const auto s = mixer::single_mode_matrix(gaussian(10.0, 1.0, 0.4), RedshiftFactor(100.0));
  const auto& u = s.matrix.entries;
  EXPECT_LE(std::abs(u(0, 0)), 1e-12);
  EXPECT_LE(std::abs(u(1, 1)), 1e-12);
  EXPECT_NEAR(std::abs(u(0, 1)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(u(1, 0)), 1.0, 1e-12);
  EXPECT_NEAR(s.theta, std::numbers::pi / 2.0, 1e-12);
}

TEST(SingleMode, ChiSquaredTwo) {
  const auto s = mixer::single_mode_matrix(gaussian(10.0, 1.0), RedshiftFactor::from_chi_squared(2.0));
  EXPECT_NEAR(std::cos(s.theta), 2.0 / std::sqrt(5.0) * std::exp(-5.0), 1e-12);
  EXPECT_LE(s.matrix.deficit, 1e-10);
}

TEST(SingleMode, AnglesReproduceMatrix) {
  for (const auto& [name, mode] : testing::core_family()) {
    for (const double chi : {0.8, 1.02, 1.3}) {
      const auto s = mixer::single_mode_matrix(mode, RedshiftFactor(chi));
      const auto& u = s.matrix.entries;
      const complex g = std::polar(1.0, s.psi);
      EXPECT_LE(std::abs(u(0, 0) - g * std::cos(s.theta)), 1e-12) << name;
      EXPECT_LE(std::abs(u(0, 1) - g * std::polar(std::sin(s.theta), s.phi1)), 1e-12) << name;
      EXPECT_LE(std::abs(u(1, 0) + g * std::polar(std::sin(s.theta), s.phi2)), 1e-12) << name;
      EXPECT_LE(std::abs(u(1, 1) - g * std::polar(std::cos(s.theta), s.phi1 - s.phi2)), 1e-12) << name;
      EXPECT_GE(s.theta, 0.0);
      EXPECT_LE(s.theta, std::numbers::pi / 2.0);
      EXPECT_LE(s.matrix.deficit, 1e-10);
    }
  }
}

TEST(Generator, SingleGaussianStructure) {
  const auto gen = mixer::perturbative_generator(mixer::gram_schmidt({gaussian(10.0, 1.0)}));
  const double norm = gen.M.norm();
  EXPECT_LE(std::abs(gen.M(0, 0)), 1e-4 * norm);
  EXPECT_LE(std::abs(gen.M(1, 1).real()), 1e-4 * norm);
  EXPECT_LE(gen.anti_hermiticity_defect, 1e-3);
}

TEST(Generator, PhasedGaussianDiagonal) {
  // M_11 = 2 i kappa for a single mode.
  const auto g = gaussian(10.0, 1.0, 0.3);
  const auto gen = mixer::perturbative_generator(mixer::gram_schmidt({g}));
  const auto f = overlap::functionals(g);
  EXPECT_NEAR(gen.M(0, 0).imag(), 2.0 * f.kappa, 1e-3 * std::abs(f.kappa));
  EXPECT_LE(std::abs(gen.M(0, 0).real()), 1e-4 * gen.M.norm());
}

TEST(Generator, TwoModeStructure) {
  for (const auto& basis : {pair_at(10.0, 30.0, 1.0), pair_at(10.0, 13.0, 1.0)}) {
    const auto gen = mixer::perturbative_generator(basis);
    const double norm = gen.M.norm();
    for (Eigen::Index i = 0; i < gen.M.rows(); ++i) EXPECT_LE(std::abs(gen.M(i, i).real()), 1e-4 * norm);
    EXPECT_LE(gen.anti_hermiticity_defect, 1e-3);
  }
}

TEST(Generator, FailsWhenCompletionFails) {
  try {
    (void)mixer::perturbative_generator(pair_at(10.0, 30.0, 1.0), {0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::completion_failed);
  }
}

TEST(UnitarityDeficit, Basics) {
  EXPECT_EQ(mixer::unitarity_deficit(Matrix::Identity(3, 3)), 0.0);
  // Extreme two-mode matrix: zero block, unit environment column entries
  // and U_perp,perp = 0.
  Matrix u = Matrix::Zero(3, 3);
  u(0, 2) = 1.0;
  u(1, 2) = 1.0;
  u(2, 0) = 1.0;
  EXPECT_GE(mixer::unitarity_deficit(u), 1.0);
  EXPECT_THROW((void)mixer::unitarity_deficit(Matrix::Zero(2, 3)), Error);
}

TEST(Properties, OneModeCompletesEverywhere) {
  for (const auto& mode : {gaussian(10.0, 1.0), gaussian(20.0, 2.0, 0.3), gaussian(15.0, 1.0, 0.2, 0.3)}) {
    const auto basis = mixer::gram_schmidt({mode});
    for (double chi = 0.2; chi <= 5.0 + 1e-12; chi += 0.2) {
      const auto c = mixer::complete_with_environment(mixer::overlap_block(basis, RedshiftFactor(chi)), 1e-3, chi);
      ASSERT_TRUE(std::holds_alternative<MixerMatrix>(c));
      EXPECT_LE(std::get<MixerMatrix>(c).deficit, 1e-10) << chi;
    }
  }
}

TEST(Properties, GramDeficitIsPsdHermitian) {
  for (const auto& basis : bases()) {
    for (const double chi : {0.3, 0.9, 1.0, 1.001, 1.1, 1.732, 2.5, 8.0}) {
      const auto gd = mixer::gram_deficit(mixer::overlap_block(basis, RedshiftFactor(chi)));
      EXPECT_LE(gd.hermiticity_error, 1e-10);
      EXPECT_GE(gd.min_eigenvalue, -1e-9);
      EXPECT_GE(gd.rank1_residual, 0.0);
      EXPECT_LE(gd.rank1_residual, 1.0);
      if (chi == 1.0) {
        EXPECT_LE(gd.rank1_residual, 1e-10);
      }
    }
  }
}

TEST(Properties, PermutationInvariance) {
  const std::vector<SpectralMode> raw{gaussian(10.0, 1.0), gaussian(16.0, 1.0, 0.3), gaussian(22.0, 1.5)};
  const auto basis = mixer::gram_schmidt(raw);
  std::vector<SpectralMode> permuted{basis[2], basis[0], basis[1]};
  const auto pbasis = BasisSet::from_orthonormal(permuted);
  for (const double chi : {0.9, 1.05, 1.3}) {
    const auto a = mixer::gram_deficit(mixer::overlap_block(basis, RedshiftFactor(chi)));
    const auto b = mixer::gram_deficit(mixer::overlap_block(pbasis, RedshiftFactor(chi)));
    EXPECT_NEAR(a.rank1_residual, b.rank1_residual, 1e-12);
    EXPECT_NEAR(a.relative_residual, b.relative_residual, 1e-12);
  }
}

TEST(Properties, CompletionKeepsBlock) {
  for (const auto& basis : bases()) {
    for (const double chi : {0.999, 1.0005, 1.002}) {
      const Matrix a = mixer::overlap_block(basis, RedshiftFactor(chi));
      const auto c = mixer::complete_with_environment(a, 1e-3, chi);
      ASSERT_TRUE(std::holds_alternative<MixerMatrix>(c));
      const auto& u = std::get<MixerMatrix>(c);
      EXPECT_EQ((u.entries.topLeftCorner(a.rows(), a.cols()) - a).cwiseAbs().maxCoeff(), 0.0);
      EXPECT_GE(u.entries(a.rows(), a.rows()).real(), 0.0);
      EXPECT_NEAR(u.entries(a.rows(), a.rows()).imag(), 0.0, 1e-15);
      if (u.completed) {
        EXPECT_LE(u.deficit, 1e-8);
      }
    }
  }
}

}  // namespace
}  // namespace qredshift
