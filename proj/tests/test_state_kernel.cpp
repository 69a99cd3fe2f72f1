#include <gtest/gtest.h>

#include <sstream>

#include "bmc/kernel.hpp"
#include "bmc/state.hpp"
#include "oracles.hpp"

using namespace bmc;

TEST(StateId, ParseAndFormat) {
  EXPECT_EQ(StateId::parse("3"), StateId({3}));
  EXPECT_EQ(StateId::parse(" -2 , 5 "), StateId({-2, 5}));
  EXPECT_EQ(StateId({-2, 5}).to_string(), "-2,5");
  EXPECT_THROW(StateId::parse(""), std::invalid_argument);
  EXPECT_THROW(StateId::parse("1,,2"), std::invalid_argument);
  EXPECT_THROW(StateId::parse("1,2,3,4,5"), std::invalid_argument);
  EXPECT_THROW(StateId::parse("x"), std::invalid_argument);
}

TEST(StateId, OrderAndHashAreConsistent) {
  const StateId a{1, 2}, b{1, 2}, c{2, -1};
  EXPECT_EQ(a, b);
  EXPECT_EQ(StateHash{}(a), StateHash{}(b));
  EXPECT_LT(a, c);
  EXPECT_LT(StateId({5}), StateId({0, 0}));  // dimension orders first
  EXPECT_EQ(a + c - c, a);
}

TEST(Kernel, VerifyStochasticPassesOnPresets) {
  const auto k = z_walk(0.7);
  const std::vector<StateId> states{StateId{-1}, StateId{0}, StateId{1}};
  EXPECT_TRUE(verify_stochastic(k, states).ok);

  const std::vector<AxisDrift> sym{{0.25, 0.25}, {0.25, 0.25}};
  const auto k2 = lattice_walk(sym);
  const Window ball(k2, Truncation{StateId{0, 0}, 2});
  EXPECT_EQ(ball.size(), 13u);
  EXPECT_TRUE(verify_stochastic(k2, ball.states()).ok);
}

TEST(Kernel, VerifyStochasticReportsDeficientRow) {
  std::istringstream edges("0 1 0.5\n0 -1 0.4\n1 0 1\n-1 0 1\n");
  const auto k = load_edge_list(edges);
  const std::vector<StateId> states{StateId{1}, StateId{0}};
  const auto r = verify_stochastic(k, states);
  EXPECT_FALSE(r.ok);
  ASSERT_TRUE(r.offending);
  EXPECT_EQ(*r.offending, StateId{0});
  EXPECT_NEAR(r.row_sum, 0.9, 1e-15);
  EXPECT_THROW(verify_stochastic(k, std::vector<StateId>{}), std::invalid_argument);
}

TEST(Kernel, EdgeListRejectsMalformedInput) {
  std::istringstream bad_prob("0 1 1.5\n");
  EXPECT_THROW(load_edge_list(bad_prob), std::invalid_argument);
  std::istringstream bad_dim("0 1,0 1\n");
  EXPECT_THROW(load_edge_list(bad_dim), std::invalid_argument);
  std::istringstream short_line("0 1\n");
  EXPECT_THROW(load_edge_list(short_line), std::invalid_argument);
  std::istringstream two_d("# comment\n0,0 1,0 1\n\n1,0 0,0 1\n");
  const auto k = load_edge_list(two_d);
  EXPECT_EQ(k.dimension(), 2u);
  EXPECT_EQ(k.neighbors(StateId{0, 0}).size(), 1u);
}

TEST(Kernel, LatticeWalkValidatesProbabilities) {
  const std::vector<AxisDrift> bad{{0.3, 0.3}};
  EXPECT_THROW(lattice_walk(bad), std::invalid_argument);
  EXPECT_THROW(z_walk(1.5), std::invalid_argument);
  // p = 1 drops the zero-probability move
  EXPECT_EQ(z_walk(1.0).neighbors(StateId{0}).size(), 1u);
}

TEST(NStep, MatchesPathEnumeration) {
  const auto k = z_walk(0.5);
  const Truncation t{StateId{0}, 4};
  EXPECT_DOUBLE_EQ(n_step_probability(k, StateId{0}, StateId{0}, 2, t).value, 0.5);
  EXPECT_DOUBLE_EQ(n_step_probability(k, StateId{0}, StateId{0}, 0, t).value, 1.0);
  EXPECT_DOUBLE_EQ(n_step_probability(k, StateId{0}, StateId{0}, 3, t).value, 0.0);

  const auto k7 = z_walk(0.7);
  const Window w(k7, Truncation{StateId{0}, 30});
  for (int n = 0; n <= 12; ++n) {
    for (long y = -6; y <= 6; ++y) {
      const double expect = oracle::z_walk_n_step_paths(0.7, 0, y, n);
      const auto got = n_step_probability(w, StateId{0}, StateId{y}, n);
      EXPECT_NEAR(got.value, expect, 1e-14) << "n=" << n << " y=" << y;
      EXPECT_TRUE(got.exact);
    }
  }
}

TEST(NStep, FlagsInexactWindowsAndOutsideStates) {
  const auto k = z_walk(0.5);
  const Truncation t{StateId{0}, 1};
  const auto r = n_step_probability(k, StateId{0}, StateId{0}, 4, t);
  EXPECT_FALSE(r.exact);
  EXPECT_DOUBLE_EQ(r.value, 0.25);  // only paths confined to {-1, 0, 1}
  EXPECT_LT(r.value, oracle::z_walk_n_step(0.5, 0, 0, 4));
  EXPECT_THROW(n_step_probability(k, StateId{0}, StateId{2}, 1, t), OutOfWindow);
  EXPECT_THROW(n_step_probability(k, StateId{0}, StateId{0}, -1, t), std::invalid_argument);
}

TEST(NStep, ChapmanKolmogorovOnExactWindows) {
  const std::vector<AxisDrift> drift{{0.3, 0.1}, {0.4, 0.2}};
  const auto k = lattice_walk(drift);
  const Window w(k, Truncation{StateId{0, 0}, 8});
  const StateId x{0, 0}, y{1, 1};
  for (int a = 0; a <= 3; ++a) {
    for (int b = 0; b <= 3; ++b) {
      double sum = 0.0;
      for (const auto& z : w.states()) {
        if (w.distance(*w.index_of(z)) > a) continue;
        sum += n_step_probability(w, x, z, a).value * n_step_probability(w, z, y, b).value;
      }
      EXPECT_NEAR(n_step_probability(w, x, y, a + b).value, sum, 1e-12);
    }
  }
}

TEST(NStep, TruncationMonotoneInRadius) {
  const auto k = z_walk(0.6);
  double prev = -1.0;
  for (int r = 0; r <= 12; ++r) {
    const double v = n_step_probability(k, StateId{0}, StateId{0}, 10, Truncation{StateId{0}, r}).value;
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_NEAR(prev, oracle::z_walk_n_step(0.6, 0, 0, 10), 1e-15);
}

TEST(Green, PartialSums) {
  const auto k = z_walk(0.5);
  const Truncation t{StateId{0}, 10};
  EXPECT_DOUBLE_EQ(green_partial_sum(k, StateId{0}, StateId{0}, 3.0, 0, t).value, 1.0);
  EXPECT_NEAR(green_partial_sum(k, StateId{0}, StateId{0}, 1.0, 4, t).value, 1.875, 1e-15);
  EXPECT_NEAR(green_partial_sum(k, StateId{0}, StateId{0}, 0.5, 4, t).value, 1.1484375, 1e-15);
  double prev = 0.0;
  for (int n = 0; n <= 10; ++n) {
    const double g = green_partial_sum(k, StateId{0}, StateId{1}, 0.9, n, t).value;
    EXPECT_GE(g, prev);
    prev = g;
  }
  EXPECT_THROW(green_partial_sum(k, StateId{0}, StateId{0}, 0.0, 2, t), std::invalid_argument);
}
