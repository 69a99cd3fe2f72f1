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

#include "bmc/state.hpp"

namespace bmc {

/// Tolerance used for every sum-to-one and symmetry comparison.
inline constexpr double kProbTol = 1e-12;

struct Transition {
  StateId to;
  double prob = 0.0;
};

using TransitionList = std::vector<Transition>;

/// Thrown when a query references a state outside a materialized window.
class OutOfWindow : public std::out_of_range {
 public:
  explicit OutOfWindow(const StateId& s)
      : std::out_of_range("state " + s.to_string() + " lies outside the truncation window"), state(s) {}
  StateId state;
};

/// Transition kernel P on a countable state space, accessed lazily through a
/// neighbor generator. Immutable after construction.
class Kernel {
 public:
  using NeighborFn = std::function<TransitionList(const StateId&)>;

  Kernel(std::string name, NeighborFn neighbors, std::optional<std::size_t> dimension = std::nullopt);

  /// Outgoing transitions of `x` with strictly positive probability, in a
  /// fixed order.
  TransitionList neighbors(const StateId& x) const { return neighbors_(x); }

  const std::string& name() const { return name_; }
  std::optional<std::size_t> dimension() const { return dimension_; }

 private:
  std::string name_;
  NeighborFn neighbors_;
  std::optional<std::size_t> dimension_;
};

/// Forward/backward step probabilities along one lattice axis.
struct AxisDrift {
  double plus = 0.0;
  double minus = 0.0;
};

/// Nearest-neighbor walk on Z^d with p(x, x ± e_i) = p_i^±. Zero-probability
/// moves are omitted from the neighbor list.
Kernel lattice_walk(std::span<const AxisDrift> drift, std::string name = "");

/// Walk on Z with p(x, x+1) = p and p(x, x-1) = 1 - p.
Kernel z_walk(double p);

/// Kernel read from a sparse edge list: one "x y p" line per edge, states as
/// "i" or "i,j". Blank lines and lines starting with '#' are skipped. States
/// that never appear as a source have no outgoing transitions.
Kernel load_edge_list(std::istream& in, std::string name = "edge_list");
Kernel load_edge_list_file(const std::string& path);

struct StochasticCheck {
  bool ok = true;
  std::optional<StateId> offending;
  double row_sum = 1.0;
  std::string message;
};

/// Every listed row must sum to 1 within kProbTol with each entry in (0, 1].
StochasticCheck verify_stochastic(const Kernel& kernel, std::span<const StateId> states);

enum class BoundaryPolicy { Kill };

/// Graph-distance ball around `center` in the transition graph of a kernel.
/// Mass leaving the ball is dropped, so every truncated quantity is a lower
/// bound on its untruncated counterpart.
struct Truncation {
  StateId center;
  int radius = 0;
  BoundaryPolicy boundary = BoundaryPolicy::Kill;
};

/// Truncated kernel materialized as a sparse substochastic matrix over the
/// states of a Truncation ball. States are stored in sorted order; distance is
/// the hop count from the center, so a single transition moves at most one
/// unit of distance.
class Window {
 public:
  Window(const Kernel& kernel, const Truncation& trunc);

  std::size_t size() const { return states_.size(); }
  const std::vector<StateId>& states() const { return states_; }
  const Truncation& truncation() const { return trunc_; }

  std::optional<std::size_t> index_of(const StateId& s) const;
  std::size_t require_index(const StateId& s) const;
  int distance(std::size_t idx) const { return distance_[idx]; }

  /// True when no transition out of this state leaves the window.
  bool interior(std::size_t idx) const { return escaped_[idx] == 0.0; }
  double escaped_mass(std::size_t idx) const { return escaped_[idx]; }

  /// out = P f restricted to the window (right action).
  void apply(std::span<const double> f, std::span<double> out) const;
  /// out = mu P restricted to the window (left action on measures).
  void propagate(std::span<const double> mu, std::span<double> out) const;

  /// Whether n-step quantities started at `from` are unaffected by killing.
  bool exact_for(const StateId& from, int steps) const;

 private:
  Truncation trunc_;
  std::vector<StateId> states_;
  std::unordered_map<StateId, std::size_t, StateHash> index_;
  std::vector<int> distance_;
  std::vector<double> escaped_;
  // CSR rows
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> col_;
  std::vector<double> val_;
};

/// A probability computed on a truncated kernel. When `exact` is false the
/// value is only a lower bound on the untruncated quantity.
struct WindowedValue {
  double value = 0.0;
  bool exact = true;
};

WindowedValue n_step_probability(const Kernel& kernel, const StateId& x, const StateId& y, int n,
                                 const Truncation& trunc);
WindowedValue n_step_probability(const Window& window, const StateId& x, const StateId& y, int n);

/// p^(k)(x, x) for k = 0..n_max on a window; exactness refers to n_max.
std::vector<double> return_probabilities(const Window& window, const StateId& x, int n_max);

/// Partial sum of the Green function, sum_{n=0}^{N} p^(n)(x, y) z^n.
WindowedValue green_partial_sum(const Kernel& kernel, const StateId& x, const StateId& y, double z, int terms,
                                const Truncation& trunc);

}  // namespace bmc
