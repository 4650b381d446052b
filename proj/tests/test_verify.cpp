#include "besselmp/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace besselmp;

namespace {

// |f|^tau / |u|^tau = |u|^{(q-2) tau} against (1/2 - 1/q) |u|^q for the power model.
double power_model_threshold(double q, double tau) {
  return std::pow(0.5 - 1.0 / q, -1.0 / (q - (q - 2.0) * tau));
}

ProblemSpec power_spec(double q) {
  ProblemParams p;
  p.nonlinearity = PowerNonlinearity{q};
  return ProblemSpec(make_grid(1, 64, 20.0), p);
}

}  // namespace

TEST(SuperquadraticBound, ModelThresholdIsFour) {
  const auto res = check_superquadratic_bound(canonical_coercive_spec(), 1.5, 1e-3, 1e3);
  ASSERT_TRUE(res.pass);
  EXPECT_NEAR(res.R / 4.0, 1.0, 0.01);
  EXPECT_TRUE(res.record.pass);
  EXPECT_EQ(res.record.checker, "superquadratic_bound");
}

TEST(SuperquadraticBound, MatchesClosedFormAcrossExponents) {
  for (auto [q, tau] : {std::pair{4.0, 1.2}, {3.0, 2.0}, {3.0, 2.5}, {5.0, 1.4}}) {
    const auto res = check_superquadratic_bound(power_spec(q), tau, 1e-3, 1e4);
    ASSERT_TRUE(res.pass) << "q=" << q << " tau=" << tau;
    EXPECT_NEAR(res.R / power_model_threshold(q, tau), 1.0, 1e-6) << "q=" << q << " tau=" << tau;
  }
}

TEST(SuperquadraticBound, RejectsTauOutsideWindow) {
  const ProblemSpec spec = canonical_coercive_spec();
  EXPECT_THROW(check_superquadratic_bound(spec, 2.0, 1e-3, 1e3), std::invalid_argument);
  EXPECT_THROW(check_superquadratic_bound(spec, 1.0, 1e-3, 1e3), std::invalid_argument);
  EXPECT_THROW(check_superquadratic_bound(spec, 2.5, 1e-3, 1e3), std::invalid_argument);
}

TEST(SuperquadraticBound, WindowLowerEdgeFollowsDimension) {
  ProblemParams p;
  p.alpha = 0.6;
  const ProblemSpec spec(make_grid(2, 16, 10.0), p);
  const auto [lo, hi] = tau_window(2, 0.6, 4.0);
  EXPECT_NEAR(lo, 2.0 / 1.2, 1e-15);
  EXPECT_DOUBLE_EQ(hi, 2.0);
  EXPECT_THROW(check_superquadratic_bound(spec, 1.5, 1e-3, 1e3), std::invalid_argument);
  EXPECT_NO_THROW(check_superquadratic_bound(spec, 1.8, 1e-3, 1e3));
}

TEST(SuperquadraticBound, RangeBelowThresholdFails) {
  const auto res = check_superquadratic_bound(canonical_coercive_spec(), 1.5, 0.1, 3.0);
  EXPECT_FALSE(res.pass);
  EXPECT_FALSE(res.record.diagnostic.empty());
  EXPECT_TRUE(std::isnan(res.R));
}

TEST(MassSplit, ZeroFieldIsEquality) {
  const ProblemSpec spec = canonical_well_spec();
  const auto t = mass_split_terms(spec, Field(spec.grid()), 10.0);
  EXPECT_EQ(t.lhs, 0.0);
  EXPECT_EQ(t.slack(), 0.0);
}

TEST(MassSplit, FieldOutsideSublevelSetNeedsOnlyNormTerm) {
  const ProblemSpec spec = canonical_well_spec();
  const double b = 10.0;
  const Field d = Field::from_function(spec.grid(), [](auto x) {
    const double r = std::abs(x[0]);
    return r > 3.0 && r < 7.0 ? std::pow(std::sin(std::numbers::pi * (r - 3.0) / 4.0), 4) : 0.0;
  });
  const auto t = mass_split_terms(spec, d, b);
  EXPECT_EQ(t.sublevel_term, 0.0);
  EXPECT_GT(t.lhs, 0.0);
  EXPECT_LE(t.lhs, t.norm_term);
}

TEST(MassSplit, RandomFieldsNeverViolate) {
  const auto res = check_mass_split(canonical_well_spec(), 100.0, 10.0, 100, 11);
  EXPECT_EQ(res.trials, 100u);
  EXPECT_EQ(res.violations, 0u);
  EXPECT_GE(res.min_slack, 0.0);
  EXPECT_TRUE(res.pass);
  EXPECT_EQ(res.record.seed, 11u);
}

TEST(MassSplit, RejectsLevelAboveBarrier) {
  EXPECT_THROW(check_mass_split(canonical_well_spec(), 100.0, 60.0, 10), std::invalid_argument);
  EXPECT_THROW(check_mass_split(canonical_well_spec(), 100.0, 0.0, 10), std::invalid_argument);
}

TEST(Splitting, ZeroSecondBumpGivesZeroDeviation) {
  const ProblemSpec spec = canonical_coercive_spec();
  const Field u0 = Field::from_function(spec.grid(), [](auto x) { return std::exp(-x[0] * x[0]); });
  const auto res = check_splitting(spec, u0, Field(spec.grid()), {0.0, 5.0, 10.0});
  for (const auto& row : res.rows) {
    EXPECT_EQ(row.total, 0.0);
    EXPECT_EQ(row.f_term, 0.0);
    EXPECT_EQ(row.xi_term, 0.0);
  }
}

TEST(Splitting, CoincidentBumpsMeasureNonlinearity) {
  const ProblemSpec spec = canonical_coercive_spec();
  const Field u0 = Field::from_function(spec.grid(), [](auto x) { return std::exp(-x[0] * x[0]); });
  const auto res = check_splitting(spec, u0, u0, {0.0});
  const double expected = std::abs(energy(spec, 2.0 * u0).total - 2.0 * energy(spec, u0).total);
  EXPECT_GT(expected, 0.0);
  EXPECT_NEAR(res.rows[0].total, expected, 1e-12 * expected);
}

TEST(Splitting, SeparatedGaussiansDecouple) {
  const ProblemSpec spec = canonical_coercive_spec();
  const Field u0 = Field::from_function(spec.grid(), [](auto x) { return std::exp(-x[0] * x[0]); });
  const Field w = Field::from_function(spec.grid(), [](auto x) { return 0.7 * std::exp(-x[0] * x[0] / 1.5); });
  std::vector<double> seps;
  for (double s = 0.0; s <= 15.0; s += 0.5) seps.push_back(s);
  const auto res = check_splitting(spec, u0, w, seps);
  EXPECT_TRUE(res.monotone);
  EXPECT_LT(res.rows.back().total, 1e-3);
  EXPECT_TRUE(res.pass);
  EXPECT_GT(res.rows.front().total, res.rows.back().total);
}

TEST(Splitting, RejectsSupportsAtBoundary) {
  const ProblemSpec spec = canonical_coercive_spec();
  const Field u0 = Field::from_function(spec.grid(), [](auto x) { return std::exp(-x[0] * x[0]); });
  const Field wide = Field::from_function(spec.grid(), [](auto x) { return std::exp(-x[0] * x[0] / 100.0); });
  EXPECT_THROW(check_splitting(spec, u0, wide, {0.0, 5.0}), std::invalid_argument);
  EXPECT_THROW(check_splitting(spec, u0, u0, {0.0, 18.0}), std::invalid_argument);
}

TEST(Coercivity, QuadraticPotentialDecaysUnderEnvelope) {
  const std::vector<double> radii{1.0, 2.0, 4.0, 8.0, 16.0};
  const auto res = coercivity_probe(CoercivePotential{}, 1, radii);
  ASSERT_TRUE(res.positive);
  EXPECT_TRUE(res.pass);
  for (const auto& row : res.rows) {
    const double y = row.radius;
    EXPECT_NEAR(row.inverse_integral, std::atan(y + 1.0) - std::atan(y - 1.0), 1e-10);
    EXPECT_LE(row.inverse_integral, 2.0 / (1.0 + (y - 1.0) * (y - 1.0)));
    EXPECT_EQ(row.sublevel_measure, 0.0);
  }
}

TEST(Coercivity, ConstantPotentialFails) {
  const auto res = coercivity_probe(ConstantPotential{1.0}, 1, {0.0, 5.0, 10.0}, 2.0);
  EXPECT_FALSE(res.pass);
  for (const auto& row : res.rows) {
    EXPECT_NEAR(row.inverse_integral, 2.0, 1e-12);
    EXPECT_NEAR(row.sublevel_measure, 2.0, 1e-3);
  }
}

TEST(Coercivity, WellReportsVanishingPotential) {
  const auto res = coercivity_probe(WellPotential{}, 1, {0.0, 4.0, 8.0}, 50.0);
  EXPECT_FALSE(res.positive);
  EXPECT_FALSE(res.pass);
  EXPECT_NE(res.record.diagnostic.find("V1"), std::string::npos);
  // B(0,1) lies inside the zero set; B(4e_1,1) sits on the barrier
  EXPECT_NEAR(res.rows[0].sublevel_measure, 2.0, 1e-3);
  EXPECT_EQ(res.rows[1].sublevel_measure, 0.0);
}

TEST(SublevelMeasure, QuadraticPotentialAtOne) {
  const ProblemSpec spec = canonical_coercive_spec();
  EXPECT_EQ(superlevel_measure(spec.potential(), 1.0), 0.0);
}

TEST(SublevelMeasure, WellAtBarrierHeight) {
  const ProblemSpec spec = canonical_well_spec();
  EXPECT_NEAR(superlevel_measure(spec.potential(), 50.0), 4.0, spec.grid().spacing(0));
  EXPECT_EQ(superlevel_measure(spec.potential(), 0.0), 0.0);
  EXPECT_EQ(superlevel_measure(spec.potential(), -1.0), 0.0);
}

TEST(Holder, ConstantFieldHasZeroQuotient) {
  const Field c = Field::constant(make_grid(1, 64, 20.0), 3.0);
  for (double beta : {0.3, 1.0, 1.7}) EXPECT_EQ(holder_estimate(c, beta), 0.0);
}

TEST(Holder, LinearFieldHasUnitLipschitzQuotient) {
  const Field u = Field::from_function(make_grid(1, 128, 20.0), [](auto x) { return x[0]; });
  EXPECT_NEAR(holder_estimate(u, 1.0, 1.0), 1.0, 1e-12);
}

TEST(Holder, AboveOneUsesDerivative) {
  const Grid g = make_grid(1, 128, 20.0);
  const double w = 2.0 * std::numbers::pi / 20.0;
  const Field u = Field::from_function(g, [=](auto x) { return std::sin(w * x[0]); });
  const Field du = Field::from_function(g, [=](auto x) { return w * std::cos(w * x[0]); });
  EXPECT_NEAR(holder_estimate(u, 1.4), holder_estimate(du, 0.4), 1e-10);
}

TEST(Holder, RejectsExponentOutsideRange) {
  const Field u = Field::constant(make_grid(1, 16, 10.0), 1.0);
  EXPECT_THROW(holder_estimate(u, 0.0), std::invalid_argument);
  EXPECT_THROW(holder_estimate(u, 2.0), std::invalid_argument);
  EXPECT_THROW(holder_estimate(u, -0.5), std::invalid_argument);
}

TEST(Embedding, L2ConstantAtMostOne) {
  const auto res = estimate_embedding_constants(0.75, make_grid(1, 128, 40.0), {2.0}, 200);
  EXPECT_LE(res.rows[0].gamma, 1.0);
  EXPECT_GT(res.rows[0].gamma, 0.0);
}

TEST(Embedding, MoreTrialsNeverLowerEstimate) {
  const Grid g = make_grid(1, 128, 40.0);
  const auto few = estimate_embedding_constants(0.75, g, {2.0, 4.0, 6.0}, 100, 5);
  const auto many = estimate_embedding_constants(0.75, g, {2.0, 4.0, 6.0}, 1000, 5);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_GE(many.rows[j].gamma, few.rows[j].gamma);
}

TEST(Embedding, StableUnderRefinementForFixedBand) {
  const std::size_t band = 128 / 4;
  const auto coarse = estimate_embedding_constants(0.75, make_grid(1, 128, 40.0), {4.0}, 1000, 1, band);
  const auto fine = estimate_embedding_constants(0.75, make_grid(1, 256, 40.0), {4.0}, 1000, 1, band);
  EXPECT_LT(std::abs(fine.rows[0].gamma / coarse.rows[0].gamma - 1.0), 0.1);
}

TEST(Embedding, RejectsExponentOutsideRange) {
  const Grid g2 = make_grid(2, 16, 10.0);
  EXPECT_THROW(estimate_embedding_constants(0.75, g2, {9.0}, 10), std::invalid_argument);
  EXPECT_THROW(estimate_embedding_constants(0.75, g2, {1.5}, 10), std::invalid_argument);
  EXPECT_NO_THROW(estimate_embedding_constants(0.75, g2, {7.5}, 10));
}

TEST(Records, DeterministicForSeed) {
  const ProblemSpec spec = canonical_well_spec();
  EXPECT_EQ(check_mass_split(spec, 100.0, 10.0, 20, 3).record.to_json(),
            check_mass_split(spec, 100.0, 10.0, 20, 3).record.to_json());
  const auto j = check_mass_split(spec, 100.0, 10.0, 20, 3).record.to_json();
  for (const char* key : {"checker", "params", "seed", "pass", "witnesses"}) EXPECT_TRUE(j.contains(key)) << key;
}
