#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bmc/branching.hpp"
#include "bmc/kernel.hpp"
#include "bmc/state.hpp"

namespace bmc {

enum class RhoMethod { ClosedForm, PowerIteration, DiagonalReturn };

std::string to_string(RhoMethod m);

/// Estimate of the spectral radius rho(P). Truncation-based methods only see
/// a substochastic block of P and therefore return lower bounds.
struct SpectralEstimate {
  double value = 0.0;
  RhoMethod method = RhoMethod::ClosedForm;
  int radius_used = 0;
  bool is_lower_bound = false;
  long iterations = 0;
};

/// Exact rho for the nearest-neighbor lattice walk: 2 * sum_i sqrt(p_i^+ p_i^-).
SpectralEstimate rho_closed_form_lattice(std::span<const AxisDrift> drift);

class NotConverged : public std::runtime_error {
 public:
  NotConverged(double previous, double last, long iterations);
  double previous;
  double last;
  long iterations;
};

class DegenerateWindow : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct PowerIterationOptions {
  long max_iters = 2'000'000;
  double tol = 1e-13;
};

/// Dominant eigenvalue of the truncated operator. Iterates the lazy operator
/// (I + P)/2, which has the same Perron vector but no competing eigenvalue of
/// equal modulus on bipartite windows, from the uniform vector with max-norm
/// renormalization; the estimate is the ratio at the center state. Stops once
/// the min and max of the componentwise ratios agree within tol.
SpectralEstimate rho_power_iteration(const Kernel& kernel, const Truncation& trunc, PowerIterationOptions opts = {});

/// max over n <= n_max with p^(n)(x, x) > 0 of p^(n)(x, x)^(1/n). Steps with
/// zero return probability (periodicity) are skipped.
SpectralEstimate rho_diagonal_return(const Kernel& kernel, const StateId& x, int n_max, const Truncation& trunc);

/// A strictly positive function tabulated on a finite set of states.
class StateFunction {
 public:
  StateFunction() = default;

  static StateFunction tabulate(std::span<const StateId> states, const std::function<double(const StateId&)>& fn);

  void set(const StateId& x, double value);
  bool contains(const StateId& x) const { return values_.count(x) != 0; }
  double at(const StateId& x) const;
  std::size_t size() const { return values_.size(); }
  /// Domain in sorted order.
  std::vector<StateId> states() const;
  StateFunction scaled(double c) const;

 private:
  std::unordered_map<StateId, double, StateHash> values_;
};

/// f(x) = prod_i lambda_i^(x_i).
StateFunction geometric_function(std::span<const double> lambda, std::span<const StateId> states);

/// Reads "state value" lines.
StateFunction load_state_function(std::istream& in);
StateFunction load_state_function_file(const std::string& path);

/// Claim P f <= t f on a window, with f normalized so that f(base) = 1.
struct Certificate {
  Certificate(StateFunction f, double level, StateId base);

  StateFunction f;
  double level;
  StateId base;
};

/// Outcome of checking a pointwise inequality on the interior of a window.
/// Margins are relative to f(x) so that rescaling f leaves them unchanged:
/// for the superharmonic check the margin at x is t - Pf(x)/f(x).
struct InequalityCheck {
  bool pass = false;
  double worst_margin = 0.0;
  std::optional<StateId> argmin;
  std::size_t checked = 0;
  /// States whose neighbors leave the domain of f; Pf is undefined there.
  std::size_t excluded = 0;
};

/// Passes iff Pf(x) <= t f(x) (margin >= slack - kProbTol) on every interior
/// state. Throws if no state is interior.
InequalityCheck check_superharmonic(const Kernel& kernel, const Certificate& cert, double slack = 0.0);

struct LyapunovCheck : InequalityCheck {
  bool inequality_holds = false;
  bool has_supercritical_site = false;
};

/// Sufficient condition for transience: Pf(x) <= f(x)/m(x) on the interior of
/// f's domain and m(y) > 1 somewhere in it. Margin at x is 1/m(x) - Pf(x)/f(x).
LyapunovCheck lyapunov_transience_check(const Kernel& kernel, const StateFunction& f, const OffspringLawField& laws,
                                        double slack = 0.0);

struct GeometricFit {
  std::vector<double> lambda;
  /// max Pf/f over the probe state for f = prod lambda_i^(x_i).
  double level = 0.0;
};

/// Searches lambda_i over a log-spaced grid (grid_points per axis, coordinate
/// sweeps) and polishes each coordinate by golden-section search inside the
/// winning grid cell. Evaluated at `probe`, so meaningful for
/// translation-invariant kernels.
GeometricFit fit_geometric_certificate(const Kernel& kernel, const StateId& probe, int grid_points = 401,
                                       double log_extent = 12.0);

}  // namespace bmc
