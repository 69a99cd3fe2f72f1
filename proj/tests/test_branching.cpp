#include <gtest/gtest.h>

#include <cmath>

#include "bmc/branching.hpp"
#include "bmc/kernel.hpp"
#include "oracles.hpp"

using namespace bmc;

TEST(GWLaw, ValidatesAndParses) {
  EXPECT_THROW(GWLaw({{0, 0.5}, {2, 0.4}}), std::invalid_argument);
  EXPECT_THROW(GWLaw({{-1, 1.0}}), std::invalid_argument);
  EXPECT_THROW(GWLaw({{1, -0.1}, {2, 1.1}}), std::invalid_argument);
  const auto law = GWLaw::parse("2:0.75, 0:0.25");
  EXPECT_EQ(law, GWLaw({{0, 0.25}, {2, 0.75}}));
  EXPECT_DOUBLE_EQ(law.mean(), 1.5);
  EXPECT_DOUBLE_EQ(law.prob(1), 0.0);
  EXPECT_EQ(GWLaw({{1, 0.5}, {1, 0.5}}).support().size(), 1u);
  EXPECT_THROW(GWLaw::parse("2-0.5"), std::invalid_argument);
}

TEST(GWLaw, InverseCdfSampling) {
  const GWLaw law({{0, 0.25}, {2, 0.75}});
  EXPECT_EQ(law.sample(0.0), 0);
  EXPECT_EQ(law.sample(0.2499), 0);
  EXPECT_EQ(law.sample(0.25), 2);
  EXPECT_EQ(law.sample(0.999999), 2);
}

TEST(OffspringLaw, RequiresAtLeastOneChild) {
  EXPECT_THROW(OffspringLaw({{0, 0.5}, {2, 0.5}}), std::invalid_argument);
  const auto two = OffspringLaw::with_mean(1.3);
  EXPECT_NEAR(two.mean(), 1.3, 1e-15);
  EXPECT_NEAR(two.as_gw().prob(1), 0.7, 1e-15);
  EXPECT_EQ(OffspringLaw::with_mean(2.0).support().size(), 1u);
  EXPECT_THROW(OffspringLaw::with_mean(0.9), std::invalid_argument);
}

TEST(OffspringLawField, ConstantMeanDetection) {
  const auto a = OffspringLaw({{1, 0.5}, {2, 0.5}});
  const auto b = OffspringLaw({{1, 0.75}, {3, 0.25}});  // also mean 1.5
  const auto c = OffspringLaw({{2, 1.0}});
  EXPECT_EQ(OffspringLawField(a, {{StateId{0}, b}}).constant_mean(), 1.5);
  const OffspringLawField mixed(a, {{StateId{0}, c}});
  EXPECT_FALSE(mixed.constant_mean());
  EXPECT_DOUBLE_EQ(mixed.max_mean(), 2.0);
  EXPECT_DOUBLE_EQ(mixed.mean_at(StateId{0}), 2.0);
  EXPECT_DOUBLE_EQ(mixed.mean_at(StateId{7}), 1.5);
}

TEST(Pgf, Values) {
  const GWLaw law({{0, 0.25}, {2, 0.75}});
  EXPECT_DOUBLE_EQ(pgf(law, 0.0), 0.25);
  EXPECT_DOUBLE_EQ(pgf(law, 1.0), 1.0);
  EXPECT_NEAR(pgf(law, 1.0 / 3.0), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(pgf(GWLaw({{1, 0.2}, {3, 0.8}}), 1.0), 1.0);
}

TEST(Pgf, NondecreasingAndConvex) {
  const GWLaw law({{0, 0.1}, {1, 0.3}, {4, 0.6}});
  double prev = -1.0, prev_slope = -1.0;
  for (int i = 0; i < 100; ++i) {
    const double s = i / 100.0, h = 0.01;
    const double v = pgf(law, s);
    const double slope = (pgf(law, s + h) - v) / h;
    EXPECT_GE(v, prev);
    EXPECT_GE(slope, prev_slope - 1e-12);
    prev = v;
    prev_slope = slope;
  }
}

TEST(Extinction, QuadraticLaw) {
  const GWLaw law({{0, 0.25}, {2, 0.75}});
  const double q = gw_extinction_probability(law);
  EXPECT_NEAR(q, 1.0 / 3.0, 1e-9);
  EXPECT_NEAR(q, oracle::quadratic_extinction(0.25, 0.0, 0.75), 1e-9);
  EXPECT_LT(std::abs(q - pgf(law, q)), 1e-11);
}

TEST(Extinction, SubcriticalAndDegenerate) {
  EXPECT_DOUBLE_EQ(gw_extinction_probability(GWLaw({{0, 0.5}, {2, 0.5}})), 1.0);
  EXPECT_DOUBLE_EQ(gw_extinction_probability(GWLaw({{0, 0.6}, {1, 0.4}})), 1.0);
  EXPECT_DOUBLE_EQ(gw_extinction_probability(GWLaw({{1, 1.0}})), 0.0);
  EXPECT_DOUBLE_EQ(gw_extinction_probability(GWLaw({{1, 0.5}, {2, 0.5}})), 0.0);
}

TEST(Extinction, FixedPointAcrossLaws) {
  for (double a : {0.05, 0.1, 0.2, 0.3}) {
    for (double b : {0.0, 0.2, 0.4}) {
      const double c = 1.0 - a - b;
      const GWLaw law({{0, a}, {1, b}, {2, c}});
      const double q = gw_extinction_probability(law);
      EXPECT_LT(std::abs(q - pgf(law, q)), 1e-11);
      if (law.mean() > 1.0) EXPECT_NEAR(q, oracle::quadratic_extinction(a, b, c), 1e-9);
    }
  }
}

TEST(Extinction, MonotoneWhenMassMovesFromZeroToTwo) {
  double prev = 2.0;
  for (int i = 0; i <= 10; ++i) {
    const double shift = 0.04 * i;
    const double q = gw_extinction_probability(GWLaw({{0, 0.45 - shift}, {1, 0.1}, {2, 0.45 + shift}}));
    EXPECT_LE(q, prev + 1e-12);
    prev = q;
  }
}

TEST(Extinction, SimulationAgrees) {
  const GWLaw law({{0, 0.25}, {2, 0.75}});
  const auto sim = simulate_gw_extinction(law, 10000, 100000, 7);
  EXPECT_EQ(sim.trials, 10000u);
  EXPECT_NEAR(sim.frequency, 1.0 / 3.0, 0.02);
  const auto again = simulate_gw_extinction(law, 10000, 100000, 7);
  EXPECT_EQ(again.extinct, sim.extinct);
}

TEST(EmbeddedMean, Values) {
  const auto k = z_walk(0.5);
  const Truncation t{StateId{0}, 10};
  EXPECT_NEAR(embedded_gw_mean(k, StateId{0}, 2, 1.5, t).value, 1.125, 1e-15);
  EXPECT_DOUBLE_EQ(embedded_gw_mean(k, StateId{0}, 3, 1.5, t).value, 0.0);
  EXPECT_DOUBLE_EQ(embedded_gw_mean(k, StateId{0}, 2, 1.0, t).value, 0.5);
  EXPECT_FALSE(embedded_gw_mean(k, StateId{0}, 6, 1.5, Truncation{StateId{0}, 2}).exact);
}

TEST(SupercriticalK, Values) {
  const auto k = z_walk(0.5);
  EXPECT_EQ(find_supercritical_k(k, StateId{0}, 1.2, 20), 8);
  EXPECT_EQ(find_supercritical_k(k, StateId{0}, 2.0, 2), 2);
  EXPECT_FALSE(find_supercritical_k(k, StateId{0}, 1.2, 6));
  EXPECT_THROW(find_supercritical_k(k, StateId{0}, 0.99, 20), std::invalid_argument);
  EXPECT_THROW(find_supercritical_k(k, StateId{0}, 1.2, 0), std::invalid_argument);
}

TEST(SupercriticalK, MinimalAndSupercritical) {
  for (double p : {0.5, 0.6, 0.7}) {
    const auto kern = z_walk(p);
    const double rho = 2.0 * std::sqrt(p * (1 - p));
    for (double m : {1.05, 1.1, 1.3, 2.0}) {
      const auto k = find_supercritical_k(kern, StateId{0}, m, 40);
      const Truncation t{StateId{0}, 40};
      if (!k) {
        // consistent with the threshold: either subcritical or k_max too small
        for (int j = 1; j <= 40; ++j) EXPECT_LE(embedded_gw_mean(kern, StateId{0}, j, m, t).value, 1.0);
        continue;
      }
      EXPECT_GT(m, 1.0 / rho);
      EXPECT_GT(embedded_gw_mean(kern, StateId{0}, *k, m, t).value, 1.0);
      for (int j = 1; j < *k; ++j) EXPECT_LE(embedded_gw_mean(kern, StateId{0}, j, m, t).value, 1.0);
      // independent check through the binomial formula
      EXPECT_GT(oracle::z_walk_n_step(p, 0, 0, *k), std::pow(m, -*k));
    }
  }
}

TEST(SupercriticalK, NoneBelowThreshold) {
  // p = 0.7: 1/rho ~ 1.0911, and p^(k)(0,0) <= rho^k forbids any k
  EXPECT_FALSE(find_supercritical_k(z_walk(0.7), StateId{0}, 1.05, 60));
}
