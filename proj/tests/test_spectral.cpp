#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "bmc/kernel.hpp"
#include "bmc/spectral.hpp"
#include "oracles.hpp"

using namespace bmc;

namespace {

std::vector<StateId> ball(const Kernel& k, const StateId& c, int r) { return Window(k, Truncation{c, r}).states(); }

StateFunction geometric_1d(double lambda, const std::vector<StateId>& states) {
  const std::vector<double> l{lambda};
  return geometric_function(l, states);
}

}  // namespace

TEST(ClosedForm, LatticeValues) {
  const std::vector<AxisDrift> half{{0.5, 0.5}}, skew{{0.9, 0.1}}, plane(2, AxisDrift{0.25, 0.25});
  EXPECT_DOUBLE_EQ(rho_closed_form_lattice(half).value, 1.0);
  EXPECT_NEAR(rho_closed_form_lattice(skew).value, 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(rho_closed_form_lattice(plane).value, 1.0);
  const auto e = rho_closed_form_lattice(skew);
  EXPECT_EQ(e.method, RhoMethod::ClosedForm);
  EXPECT_FALSE(e.is_lower_bound);
}

TEST(ClosedForm, RejectsInvalidDrift) {
  const std::vector<AxisDrift> unnormalized{{0.5, 0.4}}, zero_side{{1.0, 0.0}};
  EXPECT_THROW(rho_closed_form_lattice(unnormalized), std::invalid_argument);
  EXPECT_THROW(rho_closed_form_lattice(zero_side), std::invalid_argument);
}

TEST(PowerIteration, SymmetricWalkNearOne) {
  const auto e = rho_power_iteration(z_walk(0.5), Truncation{StateId{0}, 200});
  EXPECT_GE(e.value, 0.99);
  EXPECT_LE(e.value, 1.0);
  EXPECT_TRUE(e.is_lower_bound);
  // Kill-truncated path of 401 states: cos(pi / 402)
  EXPECT_NEAR(e.value, std::cos(M_PI / 402.0), 1e-9);
}

TEST(PowerIteration, DriftedWalkBelowClosedForm) {
  const double closed = 2.0 * std::sqrt(0.21);
  const auto e = rho_power_iteration(z_walk(0.7), Truncation{StateId{0}, 200});
  EXPECT_GE(e.value, 0.98 * closed);
  EXPECT_LE(e.value, closed);
}

TEST(PowerIteration, MatchesPathGraphEigenvalue) {
  // Truncated drifted walk on 2r+1 states is similar to a symmetric tridiagonal
  // matrix with off-diagonal sqrt(p(1-p)): top eigenvalue rho cos(pi/(2r+2)).
  for (int r : {1, 3, 10}) {
    const auto e = rho_power_iteration(z_walk(0.7), Truncation{StateId{0}, r});
    EXPECT_NEAR(e.value, 2.0 * std::sqrt(0.21) * std::cos(M_PI / (2.0 * r + 2.0)), 1e-10) << "r=" << r;
  }
}

TEST(PowerIteration, RadiusZeroIsDegenerate) {
  EXPECT_THROW(rho_power_iteration(z_walk(0.5), Truncation{StateId{0}, 0}), DegenerateWindow);
}

TEST(PowerIteration, ReportsNonConvergence) {
  PowerIterationOptions opts;
  opts.max_iters = 3;
  try {
    rho_power_iteration(z_walk(0.5), Truncation{StateId{0}, 50}, opts);
    FAIL() << "expected NotConverged";
  } catch (const NotConverged& e) {
    EXPECT_EQ(e.iterations, 3);
    EXPECT_TRUE(std::isfinite(e.previous));
    EXPECT_TRUE(std::isfinite(e.last));
  }
}

TEST(PowerIteration, NondecreasingInRadius) {
  const std::vector<AxisDrift> drift{{0.3, 0.1}, {0.4, 0.2}};
  const auto k = lattice_walk(drift);
  double prev = 0.0;
  for (int r : {1, 2, 4, 8, 12}) {
    const double v = rho_power_iteration(k, Truncation{StateId{0, 0}, r}).value;
    EXPECT_GE(v, prev - 1e-12) << "r=" << r;
    prev = v;
  }
}

TEST(DiagonalReturn, Values) {
  const auto k = z_walk(0.5);
  EXPECT_NEAR(rho_diagonal_return(k, StateId{0}, 2, Truncation{StateId{0}, 2}).value, std::sqrt(0.5), 1e-15);
  const auto e = rho_diagonal_return(k, StateId{0}, 50, Truncation{StateId{0}, 50});
  EXPECT_GE(e.value, 0.95);
  EXPECT_TRUE(e.is_lower_bound);
  // the maximum is attained at n = 50 since C(2n,n)4^-n decays like n^-1/2
  EXPECT_NEAR(e.value, std::pow(oracle::z_walk_n_step(0.5, 0, 0, 50), 1.0 / 50.0), 1e-12);
}

TEST(DiagonalReturn, PeriodicChainSkipsZeros) {
  std::istringstream edges("0 1 1\n1 0 1\n");
  const auto k = load_edge_list(edges);
  const auto e = rho_diagonal_return(k, StateId{0}, 7, Truncation{StateId{0}, 1});
  EXPECT_DOUBLE_EQ(e.value, 1.0);
}

TEST(DiagonalReturn, ErrorsWithoutReturns) {
  EXPECT_THROW(rho_diagonal_return(z_walk(1.0), StateId{0}, 10, Truncation{StateId{0}, 10}), std::runtime_error);
  EXPECT_THROW(rho_diagonal_return(z_walk(0.5), StateId{0}, 1, Truncation{StateId{0}, 10}), std::invalid_argument);
}

TEST(Sandwich, DiagonalBelowPowerBelowClosed) {
  struct Case {
    std::vector<AxisDrift> drift;
  };
  const std::vector<Case> cases{{{{0.5, 0.5}}}, {{{0.7, 0.3}}}, {{{0.25, 0.25}, {0.25, 0.25}}},
                                {{{0.3, 0.1}, {0.4, 0.2}}}};
  for (const auto& c : cases) {
    const auto k = lattice_walk(c.drift);
    const StateId o = StateId::origin(c.drift.size());
    const int r = c.drift.size() == 1 ? 60 : 14;
    const Truncation t{o, r};
    const double diag = rho_diagonal_return(k, o, r, t).value;
    const double power = rho_power_iteration(k, t).value;
    const double closed = rho_closed_form_lattice(c.drift).value;
    EXPECT_LE(diag, power + 1e-12);
    EXPECT_LE(power, closed + 1e-9);
  }
}

TEST(Superharmonic, GeometricCertificateAtRho) {
  const auto k = z_walk(0.7);
  const auto states = ball(k, StateId{0}, 200);
  const Certificate cert(geometric_1d(std::sqrt(3.0 / 7.0), states), 2.0 * std::sqrt(0.21), StateId{0});
  const auto r = check_superharmonic(k, cert);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.worst_margin, 0.0, 1e-12);
  EXPECT_EQ(r.checked, 399u);
  EXPECT_EQ(r.excluded, 2u);
}

TEST(Superharmonic, ConstantFunction) {
  const auto k = z_walk(0.5);
  const auto f = StateFunction::tabulate(ball(k, StateId{0}, 5), [](const StateId&) { return 1.0; });
  EXPECT_TRUE(check_superharmonic(k, Certificate(f, 1.0, StateId{0})).pass);
  const auto bad = check_superharmonic(k, Certificate(f, 0.9, StateId{0}));
  EXPECT_FALSE(bad.pass);
  EXPECT_NEAR(bad.worst_margin, -0.1, 1e-15);
  ASSERT_TRUE(bad.argmin);
}

TEST(Superharmonic, MonotoneInLevelAndSlack) {
  const auto k = z_walk(0.7);
  const auto f = geometric_1d(0.8, ball(k, StateId{0}, 20));
  // Pf/f = 0.7 * 0.8 + 0.3 / 0.8 = 0.935
  EXPECT_FALSE(check_superharmonic(k, Certificate(f, 0.934, StateId{0})).pass);
  for (double t : {0.935, 0.94, 1.0, 2.0}) EXPECT_TRUE(check_superharmonic(k, Certificate(f, t, StateId{0})).pass);
  EXPECT_FALSE(check_superharmonic(k, Certificate(f, 0.935, StateId{0}), 0.01).pass);
  EXPECT_TRUE(check_superharmonic(k, Certificate(f, 0.95, StateId{0}), 0.01).pass);
}

TEST(Superharmonic, AllStatesExcludedIsAnError) {
  const auto k = z_walk(0.5);
  StateFunction f;
  f.set(StateId{0}, 1.0);
  EXPECT_THROW(check_superharmonic(k, Certificate(f, 1.0, StateId{0})), std::invalid_argument);
}

TEST(Certificate, NormalizesAtBase) {
  const auto k = z_walk(0.7);
  const auto f = geometric_1d(0.5, ball(k, StateId{0}, 3)).scaled(7.0);
  const Certificate cert(f, 1.0, StateId{2});
  EXPECT_DOUBLE_EQ(cert.f.at(StateId{2}), 1.0);
  EXPECT_DOUBLE_EQ(cert.f.at(StateId{0}), 4.0);
  EXPECT_THROW(cert.f.at(StateId{9}), OutOfWindow);
  EXPECT_THROW(Certificate(f, 1.0, StateId{9}), std::exception);
}

TEST(Lyapunov, CriticalCertificatePasses) {
  const auto k = z_walk(0.7);
  const double m = 1.0 / (2.0 * std::sqrt(0.21));
  const auto f = geometric_1d(std::sqrt(3.0 / 7.0), ball(k, StateId{0}, 200));
  const auto r = lyapunov_transience_check(k, f, OffspringLawField::constant(OffspringLaw::with_mean(m)));
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.inequality_holds);
  EXPECT_TRUE(r.has_supercritical_site);
  EXPECT_GE(r.worst_margin, -1e-12);
}

TEST(Lyapunov, FailsAboveCriticalMean) {
  const auto k = z_walk(0.7);
  const auto f = geometric_1d(std::sqrt(3.0 / 7.0), ball(k, StateId{0}, 50));
  const auto r = lyapunov_transience_check(k, f, OffspringLawField::constant(OffspringLaw::with_mean(1.2)));
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.inequality_holds);
  EXPECT_NEAR(r.worst_margin, 1.0 / 1.2 - 2.0 * std::sqrt(0.21), 1e-12);
}

TEST(Lyapunov, FlagsMissingSupercriticalSite) {
  const auto k = z_walk(0.7);
  const auto f = geometric_1d(std::sqrt(3.0 / 7.0), ball(k, StateId{0}, 10));
  const auto r = lyapunov_transience_check(k, f, OffspringLawField::constant(OffspringLaw({{1, 1.0}})));
  EXPECT_TRUE(r.inequality_holds);
  EXPECT_FALSE(r.has_supercritical_site);
  EXPECT_FALSE(r.pass);
}

TEST(Lyapunov, ScalingInvariance) {
  const auto k = z_walk(0.7);
  const auto f = geometric_1d(std::sqrt(3.0 / 7.0), ball(k, StateId{0}, 30));
  for (double m : {1.05, 1.0 / (2.0 * std::sqrt(0.21)), 1.2}) {
    const auto laws = OffspringLawField::constant(OffspringLaw::with_mean(m));
    const auto base = lyapunov_transience_check(k, f, laws);
    for (double c : {1e-30, 0.5, 3.0, 1e40}) {
      const auto scaled = lyapunov_transience_check(k, f.scaled(c), laws);
      EXPECT_EQ(scaled.pass, base.pass);
      EXPECT_NEAR(scaled.worst_margin, base.worst_margin, 1e-12);
      const auto sh = check_superharmonic(k, Certificate(f.scaled(c), 0.92, StateId{0}));
      EXPECT_EQ(sh.pass, check_superharmonic(k, Certificate(f, 0.92, StateId{0})).pass);
    }
  }
}

TEST(GeometricFit, RecoversOptimalLambda) {
  const auto fit = fit_geometric_certificate(z_walk(0.7), StateId{0});
  ASSERT_EQ(fit.lambda.size(), 1u);
  EXPECT_NEAR(fit.lambda[0], std::sqrt(3.0 / 7.0), 1e-6);
  EXPECT_NEAR(fit.level, 2.0 * std::sqrt(0.21), 1e-12);

  const std::vector<AxisDrift> drift{{0.3, 0.1}, {0.4, 0.2}};
  const auto fit2 = fit_geometric_certificate(lattice_walk(drift), StateId{0, 0});
  EXPECT_NEAR(fit2.level, 2.0 * (std::sqrt(0.03) + std::sqrt(0.08)), 1e-12);
}

TEST(StateFunction, LoadsFromText) {
  std::istringstream in("# f\n0 1\n1 0.5\n-1 2\n");
  const auto f = load_state_function(in);
  EXPECT_EQ(f.size(), 3u);
  EXPECT_DOUBLE_EQ(f.at(StateId{-1}), 2.0);
  std::istringstream bad("0 -1\n");
  EXPECT_THROW(load_state_function(bad), std::invalid_argument);
}
