#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "bmc/branching.hpp"
#include "bmc/kernel.hpp"
#include "bmc/spectral.hpp"
#include "bmc/state.hpp"

namespace bmc {

struct SimConfig {
  int horizon = 100;
  std::uint64_t particle_cap = 1'000'000;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 20061;
  std::uint64_t visit_threshold = 10;
  /// Worker threads for independent trials; results do not depend on it.
  unsigned threads = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Particle configuration at one generation, stored as a multiset: sorted
/// (site, multiplicity) pairs. In BMC* mode particles frozen at the origin
/// are kept only as a counter.
class ParticleCloud {
 public:
  using Site = std::pair<StateId, std::uint64_t>;

  static ParticleCloud single(const StateId& x);

  const std::vector<Site>& sites() const { return sites_; }
  /// Number of live (non-frozen) particles.
  std::uint64_t size() const { return size_; }
  int generation() const { return generation_; }
  std::uint64_t absorbed_at_origin() const { return absorbed_; }
  const std::optional<StateId>& origin() const { return origin_; }
  bool censored() const { return censored_; }
  std::uint64_t count_at(const StateId& x) const;

 private:
  friend class CloudBuilder;
  std::vector<Site> sites_;
  std::uint64_t size_ = 0;
  int generation_ = 0;
  std::uint64_t absorbed_ = 0;
  std::optional<StateId> origin_;
  bool censored_ = false;
};

/// Draw identity for one trial; particle draws are keyed by
/// (seed, trial, generation, ordinal) where ordinals enumerate particles in
/// site order.
struct TrialKey {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
};

/// One BMC generation: each particle at x is replaced by k ~ mu(x) children,
/// each of which makes one independent P-step. The result is marked censored
/// when its size exceeds `cap`; it still holds every particle, but a censored
/// cloud must not be stepped again.
ParticleCloud step_bmc(const ParticleCloud& cloud, const Kernel& kernel, const OffspringLawField& laws,
                       const TrialKey& key, std::uint64_t cap);

/// One BMC* generation with absorbing origin x0. Particles landing on x0 (at
/// any time >= 1) are frozen: removed from the cloud and added to
/// absorbed_at_origin. A starting particle at x0 branches and moves normally.
ParticleCloud step_bmc_star(const ParticleCloud& cloud, const Kernel& kernel, const OffspringLawField& laws,
                            const StateId& x0, const TrialKey& key, std::uint64_t cap);

struct TrialSummary {
  /// Index = generation. BMC: particles at the target. BMC*: particles newly
  /// absorbed at the origin.
  std::vector<std::uint64_t> visits;
  std::vector<std::uint64_t> cloud_size;
  std::optional<std::uint64_t> nu_sample;
  bool censored = false;
  std::uint64_t final_size = 0;

  friend bool operator==(const TrialSummary&, const TrialSummary&) = default;
};

TrialSummary run_bmc_trial(const Kernel& kernel, const OffspringLawField& laws, const StateId& start,
                           const StateId& target, const SimConfig& cfg, std::uint64_t trial_index);

/// BMC* from `start` (defaults to x0); nu_sample is the absorbed count at the
/// horizon, a censored observation of nu(start).
TrialSummary run_bmc_star_trial(const Kernel& kernel, const OffspringLawField& laws, const StateId& x0,
                                const SimConfig& cfg, std::uint64_t trial_index,
                                std::optional<StateId> start = std::nullopt);

std::vector<TrialSummary> run_bmc_trials(const Kernel& kernel, const OffspringLawField& laws, const StateId& start,
                                         const StateId& target, const SimConfig& cfg);
std::vector<TrialSummary> run_bmc_star_trials(const Kernel& kernel, const OffspringLawField& laws,
                                              const StateId& x0, const SimConfig& cfg,
                                              std::optional<StateId> start = std::nullopt);

/// CSV with columns trial,generation,visits,cloud_size,censored.
void write_trials_csv(std::ostream& out, const std::vector<TrialSummary>& trials);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% Wilson score interval.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials);

struct AlphaEstimate {
  std::uint64_t trials = 0;
  std::uint64_t reached = 0;
  std::uint64_t censored_unresolved = 0;
  /// Censored trials that had not reached V count as successes.
  double optimistic = 0.0;
  /// ... and as failures.
  double pessimistic = 0.0;
  Interval optimistic_ci;
  Interval pessimistic_ci;
  double censoring_rate = 0.0;
};

/// Probability that x, started from x, collects at least V = visit_threshold
/// visits (generations >= 1) before the horizon. A trial stops as soon as it
/// reaches V since its outcome is then decided.
AlphaEstimate estimate_alpha(const Kernel& kernel, const OffspringLawField& laws, const StateId& x,
                             const SimConfig& cfg);

/// Q(n) = sum_i f(x_i(n)); frozen particles contribute f(origin) each.
double lyapunov_statistic(const ParticleCloud& cloud, const StateFunction& f);

struct LyapunovTrace {
  std::vector<double> mean;
  std::vector<double> standard_error;
  /// Mean and standard error of Q(n+1) - Q(n), paired within trials.
  std::vector<double> increment_mean;
  std::vector<double> increment_se;
  std::uint64_t trials = 0;
  std::uint64_t censored = 0;
};

/// Sample mean of Q(n), n = 0..horizon, over BMC* trials from x0. Censored
/// trials keep their last value.
LyapunovTrace trace_lyapunov_statistic(const Kernel& kernel, const OffspringLawField& laws, const StateId& x0,
                                       const StateFunction& f, const SimConfig& cfg);

struct NuEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t censored = 0;
};

NuEstimate summarize_nu(const std::vector<TrialSummary>& trials);

// ---------------------------------------------------------------------------
// Repeated embedded Galton-Watson construction.

enum class CascadeKPolicy {
  /// smallest admissible k (find_supercritical_k)
  Smallest,
  /// admissible k <= k_max with the largest embedded mean p^(k) m^k
  LargestMean,
};

struct CascadeOptions {
  int k_max = 20;
  int max_restarts = 20;
  CascadeKPolicy policy = CascadeKPolicy::Smallest;
};

struct CascadeReport {
  bool available = false;
  std::string message;
  int k = 0;
  double embedded_mean = 0.0;
  std::uint64_t meta_trials = 0;
  /// Meta-trials in which some process survived within max_restarts restarts.
  std::uint64_t survived = 0;
  double success_rate = 0.0;
  /// restarts_histogram[r] = meta-trials whose surviving process was the
  /// (r+1)-th one started.
  std::vector<std::uint64_t> restarts_histogram;
  /// Per start index i: processes started and processes extinct.
  std::vector<std::uint64_t> started;
  std::vector<std::uint64_t> extinct;
};

/// Simulates the thinned process: observe the BMC every k steps and kill
/// particles off the base point. When it dies out a new one is started at a
/// site occupied at extinction time. A process counts as surviving once it
/// lasts cfg.horizon BMC steps or its population exceeds the particle cap.
CascadeReport run_xi_cascade(const Kernel& kernel, const OffspringLawField& laws, const StateId& start,
                             const SimConfig& cfg, const CascadeOptions& opts = {});

struct ThinnedExtinction {
  std::uint64_t trials = 0;
  std::uint64_t extinct = 0;
  double frequency = 0.0;
  double standard_error = 0.0;
};

/// Extinction frequency of a single thinned process started at `base`.
ThinnedExtinction thinned_extinction_frequency(const Kernel& kernel, const OffspringLawField& laws,
                                               const StateId& base, int k, const SimConfig& cfg);

}  // namespace bmc
