#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bmc/kernel.hpp"
#include "bmc/state.hpp"

namespace bmc {

/// Finite-support distribution on {0, 1, 2, ...}. Used directly as the
/// offspring law of a Galton-Watson process, where extinction (k = 0) is
/// allowed.
class GWLaw {
 public:
  using Atom = std::pair<int, double>;

  /// Atoms are merged by k and sorted. Throws unless every probability is
  /// nonnegative and they sum to 1 within kProbTol; input is never
  /// renormalized.
  explicit GWLaw(std::vector<Atom> atoms);

  /// Parses "k1:p1, k2:p2, ...".
  static GWLaw parse(std::string_view text);

  const std::vector<Atom>& support() const { return atoms_; }
  double mean() const { return mean_; }
  double prob(int k) const;
  bool is_point_mass_at_one() const;

  /// Inverse-CDF sample for u in [0, 1).
  int sample(double u) const;

  std::string to_string() const;

  friend bool operator==(const GWLaw& a, const GWLaw& b) { return a.atoms_ == b.atoms_; }

 private:
  std::vector<Atom> atoms_;
  std::vector<double> cdf_;
  double mean_ = 0.0;
};

/// Offspring law of a branching Markov chain: every particle leaves at least
/// one child, so all atoms satisfy k >= 1.
class OffspringLaw {
 public:
  explicit OffspringLaw(std::vector<GWLaw::Atom> atoms);
  explicit OffspringLaw(GWLaw law);

  static OffspringLaw parse(std::string_view text);

  /// Two-point law on {floor(m), floor(m)+1} with mean m (m >= 1).
  static OffspringLaw with_mean(double m);

  const std::vector<GWLaw::Atom>& support() const { return law_.support(); }
  double mean() const { return law_.mean(); }
  int max_offspring() const { return law_.support().back().first; }
  int sample(double u) const { return law_.sample(u); }
  const GWLaw& as_gw() const { return law_; }
  std::string to_string() const { return law_.to_string(); }

  /// Equal atoms and probabilities within kProbTol.
  bool approx_equal(const OffspringLaw& other) const;

 private:
  GWLaw law_;
};

/// Assignment x -> mu(x): a default law with per-site overrides.
class OffspringLawField {
 public:
  explicit OffspringLawField(OffspringLaw default_law);
  OffspringLawField(OffspringLaw default_law, std::map<StateId, OffspringLaw> overrides);

  static OffspringLawField constant(OffspringLaw law) { return OffspringLawField(std::move(law)); }

  const OffspringLaw& at(const StateId& x) const;
  double mean_at(const StateId& x) const { return at(x).mean(); }

  /// Set when every assigned law has the same mean within kProbTol.
  std::optional<double> constant_mean() const { return constant_mean_; }
  /// Largest mean over all assigned laws.
  double max_mean() const;

  const OffspringLaw& default_law() const { return default_; }
  const std::map<StateId, OffspringLaw>& overrides() const { return overrides_; }

 private:
  OffspringLaw default_;
  std::map<StateId, OffspringLaw> overrides_;
  std::optional<double> constant_mean_;
};

/// Probability generating function sum_k mu_k s^k for s in [0, 1].
double pgf(const GWLaw& law, double s);

struct ExtinctionOptions {
  double tol = 1e-12;
  long max_iters = 1'000'000;
};

/// Smallest fixed point of q = pgf(q), by iteration from q = 0.
double gw_extinction_probability(const GWLaw& law, ExtinctionOptions opts = {});

struct GWSimulation {
  std::uint64_t trials = 0;
  std::uint64_t extinct = 0;
  std::uint64_t reached_cap = 0;
  double frequency = 0.0;
  double standard_error = 0.0;
};

/// Monte Carlo extinction frequency over independent trees. Trees whose
/// generation size exceeds `cap` are counted as surviving.
GWSimulation simulate_gw_extinction(const GWLaw& law, std::uint64_t trials, std::uint64_t cap,
                                    std::uint64_t seed);

/// p^(k)(x0, x0) * m^k: the mean of the Galton-Watson process obtained by
/// observing the BMC every k steps and killing particles away from x0.
WindowedValue embedded_gw_mean(const Kernel& kernel, const StateId& x0, int k, double m, const Truncation& trunc);

/// Smallest k in 1..k_max with p^(k)(x0, x0) > m^(-k). Requires m > 1.
/// Return probabilities are computed on `trunc`, which should be exact for
/// k_max steps from x0.
std::optional<int> find_supercritical_k(const Kernel& kernel, const StateId& x0, double m, int k_max,
                                        const Truncation& trunc);
/// Same, on a ball of radius k_max around x0.
std::optional<int> find_supercritical_k(const Kernel& kernel, const StateId& x0, double m, int k_max);

}  // namespace bmc
