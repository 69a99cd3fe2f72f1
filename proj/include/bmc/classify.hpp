#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bmc/branching.hpp"
#include "bmc/kernel.hpp"
#include "bmc/simulate.hpp"
#include "bmc/spectral.hpp"
#include "bmc/state.hpp"

namespace bmc {

/// The three regimes of the visit probability alpha, plus Unknown when the
/// available evidence decides nothing. Weak recurrence (0 < alpha < 1) is
/// never asserted: Recurrent means "alpha > 0", StronglyRecurrent "alpha = 1".
enum class Regime { Transient, Recurrent, StronglyRecurrent, Unknown };

enum class EvidenceTag { ClosedFormRho, RhoLowerBound, InfiniteMean, Certificate, QuasiTransitive, Simulation };

std::string to_string(Regime r);
std::string to_string(EvidenceTag t);

struct Evidence {
  EvidenceTag tag;
  std::string note;
  std::vector<std::pair<std::string, double>> values;
};

struct Verdict {
  Regime regime = Regime::Unknown;
  std::vector<Evidence> basis;
  /// m lies within tol of 1/rho.
  bool critical = false;
};

/// Constant mean offspring; `infinite` models m = infinity.
struct MeanOffspring {
  double value = 0.0;
  bool infinite = false;

  static MeanOffspring finite(double m) { return {m, false}; }
  static MeanOffspring unbounded() { return {0.0, true}; }
};

inline constexpr double kDefaultCriticalTol = 1e-9;

/// Transient iff m <= 1/rho, recurrent iff m > 1/rho. A lower-bound rho can
/// only prove recurrence. Throws for finite m <= 1.
Verdict classify_constant_mean(MeanOffspring m, const SpectralEstimate& rho, double tol = kDefaultCriticalTol);

using StateMap = std::function<StateId(const StateId&)>;

/// Declared automorphisms of (X, P, mu). Orbit count nullopt means infinite.
struct SymmetrySpec {
  std::vector<StateMap> generators;
  std::vector<std::string> names;
  std::function<std::string(const StateId&)> orbit_of;
  std::optional<std::size_t> orbit_count;
};

/// Translation generators e_1..e_d of Z^d with a single orbit.
SymmetrySpec lattice_translations(std::size_t dim);
/// Shift by a fixed vector.
StateMap shift_by(const StateId& offset);
/// Exchange of coordinates i and j.
StateMap swap_axes(std::size_t i, std::size_t j);

struct SymmetryCheck {
  bool pass = false;
  std::size_t checked = 0;
  std::vector<std::string> violations;
  std::optional<std::size_t> orbit_count;
};

/// Checks p(gx, gy) = p(x, y) and mu(gx) = mu(x) for every generator g and
/// every state x of the window.
SymmetryCheck verify_symmetry(const Kernel& kernel, const OffspringLawField& laws, const SymmetrySpec& sym,
                              const Truncation& window);

/// As classify_constant_mean; when the symmetry check passed with finitely
/// many orbits, Recurrent is upgraded to StronglyRecurrent.
Verdict classify_quasi_transitive(MeanOffspring m, const SpectralEstimate& rho, const SymmetryCheck& sym,
                                  double tol = kDefaultCriticalTol);

/// Transient when the Lyapunov certificate check passes (including the
/// supercritical-site condition), otherwise Unknown. A failing certificate
/// never implies recurrence.
Verdict transience_by_certificate(const Kernel& kernel, const StateFunction& f, const OffspringLawField& laws,
                                  LyapunovCheck* details = nullptr);

struct InvarianceCheck {
  bool pass = false;
  double max_difference = 0.0;
  int worst_generation = 0;
  std::vector<std::map<std::uint64_t, double>> lhs;
  std::vector<std::map<std::uint64_t, double>> rhs;
};

/// Compares, for n <= n_max, the exact law of the count at y started from x
/// with the law of the count at gamma(y) started from gamma(x).
InvarianceCheck verify_visitlaw_invariance(const Kernel& kernel, const OffspringLawField& laws, const StateMap& gamma,
                                           const StateId& x, const StateId& y, int n_max,
                                           double tol = 1e-10);

enum class Agreement { Consistent, Inconclusive, Contradiction };
std::string to_string(Agreement a);

struct ReconcilePolicy {
  /// Transient verdict contradicted when the pessimistic estimate exceeds this.
  double transient_contradiction = 0.5;
  /// Recurrent verdicts are called consistent at or above this pessimistic
  /// estimate (strong) ...
  double strong_consistent = 0.9;
  /// ... or this optimistic estimate (plain recurrence).
  double recurrent_consistent = 0.05;
};

struct Reconciliation {
  Agreement agreement = Agreement::Inconclusive;
  std::string note;
  /// Heuristic annotation; never an analytic claim.
  bool weakly_recurrent_consistent = false;
};

/// Annotates an analytic verdict with Monte Carlo evidence; never overrides it.
/// Finite horizons and particle caps cannot refute recurrence, so low estimates
/// under a recurrent verdict are reported as inconclusive.
Reconciliation reconcile(const Verdict& analytic, const AlphaEstimate& mc, const ReconcilePolicy& policy = {});

}  // namespace bmc
