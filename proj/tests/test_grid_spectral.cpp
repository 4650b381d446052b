#include "besselmp/grid_spectral.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace besselmp;

namespace {

constexpr double pi = std::numbers::pi;

Field cosine_mode(const Grid& g, int k, int axis = 0) {
  return Field::from_function(g, [&](auto x) { return std::cos(2.0 * pi * k * x[axis] / g.length[axis]); });
}

double max_abs_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(MakeGrid, CellVolumes) {
  const Grid g1 = make_grid(1, 64, 20.0);
  EXPECT_DOUBLE_EQ(g1.cell_volume(), 0.3125);
  EXPECT_EQ(g1.size(), 64u);

  const Grid g2 = make_grid(2, 32, 10.0);
  EXPECT_EQ(g2.size(), 1024u);
  EXPECT_DOUBLE_EQ(g2.cell_volume(), 0.09765625);
}

TEST(MakeGrid, NonPowerOfTwoUsesExactDft) {
  const Grid g = make_grid(1, 7, 20.0);
  EXPECT_EQ(g.size(), 7u);
  EXPECT_FALSE(g.power_of_two());
  CounterRng rng(3);
  std::vector<double> v(7);
  for (double& x : v) x = rng.normal();
  const Field u(g, v);
  const auto fast = transform(u).coefficients;
  const auto slow = oracle::naive_dft(u);
  for (std::size_t k = 0; k < 7; ++k) EXPECT_NEAR(std::abs(fast[k] - slow[k]), 0.0, 1e-12);
}

TEST(MakeGrid, RejectsBadArguments) {
  EXPECT_THROW(make_grid(0, 16, 1.0), std::invalid_argument);
  EXPECT_THROW(make_grid(4, 16, 1.0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 0, 1.0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 16, 0.0), std::invalid_argument);
  EXPECT_THROW(make_grid(2, 16, -3.0), std::invalid_argument);
}

TEST(Transform, ConstantConcentratesAtZeroFrequency) {
  const Grid g = make_grid(1, 32, 10.0);
  const Spectrum s = transform(Field::constant(g, 2.0));
  EXPECT_NEAR(s.coefficients[0].real(), 2.0 * 10.0, 1e-12);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_LT(std::abs(s.coefficients[k]), 1e-12);
}

TEST(Transform, PureCosineHasTwoModes) {
  const Grid g = make_grid(1, 64, 20.0);
  const Spectrum s = transform(cosine_mode(g, 1));
  for (std::size_t k = 0; k < g.size(); ++k) {
    const long w = Grid::wavenumber(k, g.n);
    if (w == 1 || w == -1)
      EXPECT_NEAR(std::abs(s.coefficients[k]), 10.0, 1e-12);
    else
      EXPECT_LT(std::abs(s.coefficients[k]), 1e-12);
  }
}

TEST(Transform, MatchesNaiveDftIn2d) {
  const Grid g = make_grid(2, 8, {3.0, 5.0, 0.0});
  const Field u = random_field(g, CounterRng(11), 3);
  const auto fast = transform(u).coefficients;
  const auto slow = oracle::naive_dft(u);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(std::abs(fast[k] - slow[k]), 0.0, 1e-12);
}

TEST(Transform, RoundTripAndHermitianSymmetry) {
  for (int dim = 1; dim <= 3; ++dim) {
    const Grid g = make_grid(dim, dim == 3 ? 8 : 32, 7.0);
    CounterRng rng(17, dim);
    std::vector<double> v(g.size());
    for (double& x : v) x = rng.normal();
    const Field u(g, v);
    const Spectrum s = transform(u);
    EXPECT_LT(s.hermitian_defect(), 1e-13);
    EXPECT_LE(max_abs_diff(inverse_transform(s), u), 1e-12);
  }
}

TEST(Transform, GridMismatchIsRejected) {
  Field a(make_grid(1, 16, 1.0));
  Field b(make_grid(1, 16, 2.0));
  EXPECT_THROW(a += b, grid_mismatch);
  EXPECT_THROW(inner(a, b), grid_mismatch);
}

TEST(ApplyMultiplier, ConstantIsFixed) {
  const Grid g = make_grid(2, 16, 5.0);
  const Field c = Field::constant(g, 1.7);
  for (double s : {-1.3, 0.25, 0.75, 2.0}) EXPECT_LT(max_abs_diff(apply_multiplier(c, s), c), 1e-13);
}

TEST(ApplyMultiplier, CosineIsEigenfunction) {
  const Grid g = make_grid(1, 64, 20.0);
  const double alpha = 0.75;
  const Field u = cosine_mode(g, 1);
  const double factor = std::pow(1.0 + std::pow(2.0 * pi / 20.0, 2), alpha);
  EXPECT_LT(max_abs_diff(apply_multiplier(u, alpha), factor * u), 1e-13);
}

TEST(ApplyMultiplier, InverseAndSemigroup) {
  const Grid g = make_grid(1, 128, 40.0);
  for (int trial = 0; trial < 10; ++trial) {
    CounterRng rng(5, trial);
    std::vector<double> v(g.size());
    for (double& x : v) x = rng.normal();
    const Field u(g, v);
    const double s = rng.uniform(-1.0, 1.0), t = rng.uniform(-1.0, 1.0);
    EXPECT_LT(max_abs_diff(apply_multiplier(apply_multiplier(u, s), -s), u), 1e-12);
    const Field st = apply_multiplier(apply_multiplier(u, s), t);
    const Field direct = apply_multiplier(u, s + t);
    EXPECT_LT(max_abs_diff(st, direct), 1e-10 * max_abs(direct));
  }
}

TEST(ApplyMultiplier, RejectsNonFiniteExponent) {
  const Field u(make_grid(1, 16, 1.0));
  EXPECT_THROW(apply_multiplier(u, std::nan("")), std::invalid_argument);
}

TEST(BesselNorm, Constant) {
  const Grid g = make_grid(2, 16, 4.0);
  EXPECT_NEAR(bessel_norm_sq(Field::constant(g, 3.0), 0.6), 9.0 * 16.0, 1e-11);
}

TEST(BesselNorm, SingleMode) {
  const Grid g = make_grid(1, 64, 20.0);
  const double a = 1.3, alpha = 0.4;
  const double expected = std::pow(1.0 + std::pow(2.0 * pi / 20.0, 2), alpha) * a * a * 20.0 / 2.0;
  EXPECT_NEAR(bessel_norm_sq(a * cosine_mode(g, 1), alpha), expected, 1e-11 * expected);
}

TEST(BesselNorm, MatchesIndependentSpectralSum) {
  for (int dim = 1; dim <= 2; ++dim) {
    const Grid g = make_grid(dim, dim == 1 ? 64 : 12, 9.0);
    CounterRng rng(23, dim);
    std::vector<double> v(g.size());
    for (double& x : v) x = rng.normal();
    const Field u(g, v);
    for (double alpha : {0.25, 0.75, 1.5}) {
      const double expected = oracle::naive_bessel_norm_sq(u, alpha);
      EXPECT_NEAR(bessel_norm_sq(u, alpha), expected, 1e-10 * expected);
      const double via_half_power = std::pow(lp_norm(apply_multiplier(u, alpha / 2), 2.0), 2);
      EXPECT_NEAR(bessel_norm_sq(u, alpha), via_half_power, 1e-10 * expected);
    }
  }
}

TEST(Parseval, HoldsForRandomFields) {
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 3;
    const Grid g = make_grid(dim, dim == 3 ? 8 : 16, 3.0 + trial);
    CounterRng rng(29, trial);
    std::vector<double> v(g.size());
    for (double& x : v) x = rng.normal();
    const Field u(g, v);
    const Spectrum s = transform(u);
    double power = 0.0;
    for (const auto& c : s.coefficients) power += std::norm(c);
    power /= g.volume();
    const double l2 = std::pow(lp_norm(u, 2.0), 2);
    EXPECT_NEAR(l2, power, 1e-10 * l2);
    EXPECT_NEAR(bessel_norm_sq(u, 0.0), l2, 1e-10 * l2);
  }
}

TEST(WeightedNorm, Cases) {
  const Grid g = make_grid(1, 64, 10.0);
  const Field V = Field::from_function(g, [](auto x) { return 1.0 + x[0] * x[0]; });
  const Field zero(g);
  EXPECT_EQ(weighted_norm_sq(zero, V, 2.0, 0.5), 0.0);

  const Field u = random_field(g, CounterRng(31), 8);
  EXPECT_NEAR(weighted_norm_sq(u, Field(g), 7.0, 0.5), bessel_norm_sq(u, 0.5), 1e-14);
  EXPECT_GT(weighted_norm_sq(u, V, 2.0, 0.5), weighted_norm_sq(u, V, 1.0, 0.5));

  EXPECT_THROW(weighted_norm_sq(u, V, -1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(weighted_norm_sq(u, -1.0 * V, 1.0, 0.5), std::invalid_argument);
}

// With V >= 0 the Bessel norm is dominated by the weighted norm with constant 1.
TEST(WeightedNorm, DominatesBesselNormForNonNegativePotential) {
  const Grid g = make_grid(1, 128, 40.0);
  for (int trial = 0; trial < 50; ++trial) {
    CounterRng rng(37, trial);
    const Field u = random_field(g, rng, 32);
    const Field V = Field::from_function(g, [&](auto x) { return std::pow(std::sin(x[0] + trial), 2); });
    const double lambda = rng.uniform(1e-3, 1e3);
    EXPECT_LE(bessel_norm_sq(u, 0.75), weighted_norm_sq(u, V, lambda, 0.75));
  }
}

TEST(LpNorm, Cases) {
  const Grid g = make_grid(1, 64, 20.0);
  EXPECT_NEAR(lp_norm(Field::constant(g, 1.0), 2.0), std::sqrt(20.0), 1e-14);
  EXPECT_EQ(lp_norm(Field(g), 3.0), 0.0);
  EXPECT_THROW(lp_norm(Field(g), 0.5), std::invalid_argument);

  const Grid wide = make_grid(1, 512, 40.0);
  const Field gauss = Field::from_function(wide, [](auto x) { return std::exp(-x[0] * x[0]); });
  EXPECT_NEAR(lp_norm(gauss, 2.0), std::pow(pi / 2.0, 0.25), 1e-8);
}

TEST(SpectralDerivative, SineAndMixedAxes) {
  const Grid g = make_grid(2, 32, {2.0 * pi, 4.0 * pi, 0.0});
  const Field u = Field::from_function(g, [](auto x) { return std::sin(x[0]) * std::cos(0.5 * x[1]); });
  const Field dx = spectral_derivative(u, 0);
  const Field dyy = spectral_derivative(u, 1, 2);
  const Field ex = Field::from_function(g, [](auto x) { return std::cos(x[0]) * std::cos(0.5 * x[1]); });
  const Field eyy = Field::from_function(g, [](auto x) { return -0.25 * std::sin(x[0]) * std::cos(0.5 * x[1]); });
  EXPECT_LT(max_abs_diff(dx, ex), 1e-12);
  EXPECT_LT(max_abs_diff(dyy, eyy), 1e-12);
}

TEST(Translate, ShiftsBandLimitedFieldExactly) {
  const Grid g = make_grid(1, 64, 2.0 * pi);
  const Field u = Field::from_function(g, [](auto x) { return std::cos(3.0 * x[0]) + std::sin(x[0]); });
  const double s = 0.37;
  const Field expected = Field::from_function(g, [&](auto x) { return std::cos(3.0 * (x[0] - s)) + std::sin(x[0] - s); });
  EXPECT_LT(max_abs_diff(translate(u, s), expected), 1e-12);
}

TEST(RandomField, SameContinuousFieldOnRefinedGrid) {
  const Grid coarse = make_grid(1, 64, 10.0);
  const Grid fine = make_grid(1, 128, 10.0);
  const CounterRng rng(41);
  const Field a = random_field(coarse, rng, 16);
  const Field b = random_field(fine, rng, 16);
  EXPECT_NEAR(lp_norm(a, 2.0), 1.0, 1e-12);
  for (std::size_t i = 0; i < coarse.n; ++i) EXPECT_NEAR(a[i], b[2 * i], 1e-12);
}

TEST(TrigInterpolant, ReproducesSamplesAndBandLimitedValues) {
  const Grid g = make_grid(1, 32, 2.0 * pi);
  const Field u = Field::from_function(g, [](auto x) { return std::cos(2.0 * x[0]) + 0.5 * std::sin(5.0 * x[0]); });
  const TrigInterpolant interp(u);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_NEAR(interp(g.coordinate(0, i)), u[i], 1e-13);
  const double x = 0.123;
  EXPECT_NEAR(interp(x), std::cos(2.0 * x) + 0.5 * std::sin(5.0 * x), 1e-13);
}

TEST(CriticalExponent, VacuousBelowTwiceAlpha) {
  EXPECT_TRUE(std::isinf(critical_exponent(1, 0.75)));
  EXPECT_NEAR(critical_exponent(1, 0.25), 4.0, 1e-15);
  EXPECT_NEAR(critical_exponent(3, 0.5), 3.0, 1e-15);
}
