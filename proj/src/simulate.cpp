#include "bmc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "bmc/rng.hpp"

namespace bmc {

void SimConfig::validate() const {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (particle_cap == 0) throw std::invalid_argument("particle_cap must be positive");
  if (trials == 0) throw std::invalid_argument("trials must be positive");
  if (trials > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("trials must fit in 32 bits");
  if (visit_threshold == 0) throw std::invalid_argument("visit_threshold must be positive");
  if (threads == 0) throw std::invalid_argument("threads must be positive");
}

std::uint64_t ParticleCloud::count_at(const StateId& x) const {
  auto it = std::lower_bound(sites_.begin(), sites_.end(), x,
                             [](const Site& s, const StateId& v) { return s.first < v; });
  return (it != sites_.end() && it->first == x) ? it->second : 0;
}

class CloudBuilder {
 public:
  static ParticleCloud make(std::vector<ParticleCloud::Site> sites, int generation, std::uint64_t absorbed,
                            std::optional<StateId> origin, std::uint64_t cap) {
    ParticleCloud c;
    std::sort(sites.begin(), sites.end());
    for (const auto& s : sites) c.size_ += s.second;
    c.sites_ = std::move(sites);
    c.generation_ = generation;
    c.absorbed_ = absorbed;
    c.origin_ = std::move(origin);
    c.censored_ = c.size_ > cap;
    return c;
  }
};

ParticleCloud ParticleCloud::single(const StateId& x) {
  return CloudBuilder::make({{x, 1}}, 0, 0, std::nullopt, std::numeric_limits<std::uint64_t>::max());
}

namespace {

ParticleCloud advance(const ParticleCloud& cloud, const Kernel& kernel, const OffspringLawField& laws,
                      const std::optional<StateId>& absorbing, const TrialKey& key, std::uint64_t cap) {
  if (cloud.censored()) throw std::logic_error("cannot step a censored particle cloud");
  if (key.trial > std::numeric_limits<std::uint32_t>::max() ||
      cloud.generation() >= std::numeric_limits<std::int32_t>::max()) {
    throw std::out_of_range("trial index or generation exceeds the RNG counter range");
  }
  const auto trial = static_cast<std::uint32_t>(key.trial);
  const auto generation = static_cast<std::uint32_t>(cloud.generation());

  std::unordered_map<StateId, std::uint64_t, StateHash> next;
  std::uint64_t ordinal = 0;
  std::vector<double> cdf;
  std::vector<std::uint64_t> tally;
  for (const auto& [site, count] : cloud.sites()) {
    const auto& law = laws.at(site);
    const auto moves = kernel.neighbors(site);
    if (moves.empty()) throw std::runtime_error("state " + site.to_string() + " has no outgoing transitions");
    cdf.clear();
    double acc = 0.0;
    for (const auto& t : moves) cdf.push_back(acc += t.prob);
    tally.assign(moves.size(), 0);
    if (ordinal + count > std::numeric_limits<std::uint32_t>::max()) {
      throw std::out_of_range("particle ordinal exceeds the RNG counter range");
    }
    for (std::uint64_t i = 0; i < count; ++i, ++ordinal) {
      const rng::ParticleStream stream(key.seed, trial, generation, static_cast<std::uint32_t>(ordinal));
      const int children = law.sample(stream.uniform(0));
      for (int j = 1; j <= children; ++j) {
        const double u = stream.uniform(static_cast<std::uint32_t>(j));
        std::size_t idx = 0;
        while (idx + 1 < cdf.size() && u >= cdf[idx]) ++idx;
        ++tally[idx];
      }
    }
    for (std::size_t idx = 0; idx < moves.size(); ++idx) {
      if (tally[idx]) next[moves[idx].to] += tally[idx];
    }
  }

  std::uint64_t absorbed = cloud.absorbed_at_origin();
  if (absorbing) {
    auto it = next.find(*absorbing);
    if (it != next.end()) {
      absorbed += it->second;
      next.erase(it);
    }
  }
  std::vector<ParticleCloud::Site> sites(next.begin(), next.end());
  return CloudBuilder::make(std::move(sites), cloud.generation() + 1, absorbed, absorbing ? absorbing : cloud.origin(),
                            cap);
}

template <class Fn>
void parallel_trials(std::uint64_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::uint64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::uint64_t i = next++; i < n && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ParticleCloud step_bmc(const ParticleCloud& cloud, const Kernel& kernel, const OffspringLawField& laws,
                       const TrialKey& key, std::uint64_t cap) {
  return advance(cloud, kernel, laws, std::nullopt, key, cap);
}

ParticleCloud step_bmc_star(const ParticleCloud& cloud, const Kernel& kernel, const OffspringLawField& laws,
                            const StateId& x0, const TrialKey& key, std::uint64_t cap) {
  return advance(cloud, kernel, laws, x0, key, cap);
}

TrialSummary run_bmc_trial(const Kernel& kernel, const OffspringLawField& laws, const StateId& start,
                           const StateId& target, const SimConfig& cfg, std::uint64_t trial_index) {
  cfg.validate();
  const TrialKey key{cfg.seed, trial_index};
  TrialSummary out;
  auto cloud = ParticleCloud::single(start);
  out.visits.push_back(cloud.count_at(target));
  out.cloud_size.push_back(cloud.size());
  for (int g = 1; g <= cfg.horizon && !cloud.censored(); ++g) {
    cloud = step_bmc(cloud, kernel, laws, key, cfg.particle_cap);
    out.visits.push_back(cloud.count_at(target));
    out.cloud_size.push_back(cloud.size());
  }
  out.censored = cloud.censored();
  out.final_size = cloud.size();
  return out;
}

TrialSummary run_bmc_star_trial(const Kernel& kernel, const OffspringLawField& laws, const StateId& x0,
                                const SimConfig& cfg, std::uint64_t trial_index, std::optional<StateId> start) {
  cfg.validate();
  const TrialKey key{cfg.seed, trial_index};
  TrialSummary out;
  auto cloud = ParticleCloud::single(start.value_or(x0));
  out.visits.push_back(0);
  out.cloud_size.push_back(cloud.size());
  for (int g = 1; g <= cfg.horizon && !cloud.censored() && cloud.size() > 0; ++g) {
    const auto before = cloud.absorbed_at_origin();
    cloud = step_bmc_star(cloud, kernel, laws, x0, key, cfg.particle_cap);
    out.visits.push_back(cloud.absorbed_at_origin() - before);
    out.cloud_size.push_back(cloud.size());
  }
  out.censored = cloud.censored();
  out.final_size = cloud.size();
  out.nu_sample = cloud.absorbed_at_origin();
  return out;
}

std::vector<TrialSummary> run_bmc_trials(const Kernel& kernel, const OffspringLawField& laws, const StateId& start,
                                         const StateId& target, const SimConfig& cfg) {
  cfg.validate();
  std::vector<TrialSummary> out(cfg.trials);
  parallel_trials(cfg.trials, cfg.threads,
                  [&](std::uint64_t i) { out[i] = run_bmc_trial(kernel, laws, start, target, cfg, i); });
  return out;
}

std::vector<TrialSummary> run_bmc_star_trials(const Kernel& kernel, const OffspringLawField& laws,
                                              const StateId& x0, const SimConfig& cfg,
                                              std::optional<StateId> start) {
  cfg.validate();
  std::vector<TrialSummary> out(cfg.trials);
  parallel_trials(cfg.trials, cfg.threads,
                  [&](std::uint64_t i) { out[i] = run_bmc_star_trial(kernel, laws, x0, cfg, i, start); });
  return out;
}

void write_trials_csv(std::ostream& out, const std::vector<TrialSummary>& trials) {
  out << "trial,generation,visits,cloud_size,censored\n";
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const auto& s = trials[t];
    for (std::size_t g = 0; g < s.visits.size(); ++g) {
      const bool censored_here = s.censored && g + 1 == s.visits.size();
      out << t << ',' << g << ',' << s.visits[g] << ',' << s.cloud_size[g] << ',' << (censored_here ? 1 : 0) << '\n';
    }
  }
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

AlphaEstimate estimate_alpha(const Kernel& kernel, const OffspringLawField& laws, const StateId& x,
                             const SimConfig& cfg) {
  cfg.validate();
  enum class Outcome : std::uint8_t { Reached, Censored, Failed };
  std::vector<Outcome> outcome(cfg.trials);
  parallel_trials(cfg.trials, cfg.threads, [&](std::uint64_t i) {
    const TrialKey key{cfg.seed, i};
    auto cloud = ParticleCloud::single(x);
    std::uint64_t visits = 0;
    for (int g = 1; g <= cfg.horizon; ++g) {
      cloud = step_bmc(cloud, kernel, laws, key, cfg.particle_cap);
      visits += cloud.count_at(x);
      if (visits >= cfg.visit_threshold) {
        outcome[i] = Outcome::Reached;
        return;
      }
      if (cloud.censored()) {
        outcome[i] = Outcome::Censored;
        return;
      }
    }
    outcome[i] = Outcome::Failed;
  });

  AlphaEstimate est;
  est.trials = cfg.trials;
  for (auto o : outcome) {
    if (o == Outcome::Reached) ++est.reached;
    if (o == Outcome::Censored) ++est.censored_unresolved;
  }
  const double n = static_cast<double>(cfg.trials);
  est.pessimistic = static_cast<double>(est.reached) / n;
  est.optimistic = static_cast<double>(est.reached + est.censored_unresolved) / n;
  est.pessimistic_ci = wilson_interval(est.reached, cfg.trials);
  est.optimistic_ci = wilson_interval(est.reached + est.censored_unresolved, cfg.trials);
  est.censoring_rate = static_cast<double>(est.censored_unresolved) / n;
  return est;
}

double lyapunov_statistic(const ParticleCloud& cloud, const StateFunction& f) {
  double q = 0.0;
  for (const auto& [site, count] : cloud.sites()) q += static_cast<double>(count) * f.at(site);
  if (cloud.absorbed_at_origin() > 0) {
    if (!cloud.origin()) throw std::logic_error("absorbed particles without an origin");
    q += static_cast<double>(cloud.absorbed_at_origin()) * f.at(*cloud.origin());
  }
  return q;
}

LyapunovTrace trace_lyapunov_statistic(const Kernel& kernel, const OffspringLawField& laws, const StateId& x0,
                                       const StateFunction& f, const SimConfig& cfg) {
  cfg.validate();
  const auto len = static_cast<std::size_t>(cfg.horizon) + 1;
  std::vector<std::vector<double>> q(cfg.trials);
  std::vector<char> censored(cfg.trials, 0);
  parallel_trials(cfg.trials, cfg.threads, [&](std::uint64_t i) {
    const TrialKey key{cfg.seed, i};
    auto cloud = ParticleCloud::single(x0);
    auto& series = q[i];
    series.reserve(len);
    series.push_back(lyapunov_statistic(cloud, f));
    for (int g = 1; g <= cfg.horizon; ++g) {
      if (cloud.censored()) {
        censored[i] = 1;
        series.push_back(series.back());
        continue;
      }
      cloud = step_bmc_star(cloud, kernel, laws, x0, key, cfg.particle_cap);
      series.push_back(lyapunov_statistic(cloud, f));
    }
  });

  LyapunovTrace out;
  out.trials = cfg.trials;
  out.censored = static_cast<std::uint64_t>(std::count(censored.begin(), censored.end(), 1));
  std::vector<double> column(cfg.trials), diff(cfg.trials);
  for (std::size_t n = 0; n < len; ++n) {
    for (std::size_t i = 0; i < cfg.trials; ++i) column[i] = q[i][n];
    const double m = mean_of(column);
    out.mean.push_back(m);
    out.standard_error.push_back(standard_error_of(column, m));
    if (n + 1 < len) {
      for (std::size_t i = 0; i < cfg.trials; ++i) diff[i] = q[i][n + 1] - q[i][n];
      const double dm = mean_of(diff);
      out.increment_mean.push_back(dm);
      out.increment_se.push_back(standard_error_of(diff, dm));
    }
  }
  return out;
}

NuEstimate summarize_nu(const std::vector<TrialSummary>& trials) {
  if (trials.empty()) throw std::invalid_argument("summarize_nu: no trials");
  std::vector<double> nu;
  NuEstimate out;
  for (const auto& t : trials) {
    if (!t.nu_sample) throw std::invalid_argument("summarize_nu: trial without a nu sample");
    nu.push_back(static_cast<double>(*t.nu_sample));
    if (t.censored) ++out.censored;
  }
  out.trials = trials.size();
  out.mean = mean_of(nu);
  out.standard_error = standard_error_of(nu, out.mean);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct ThinnedOutcome {
  bool survived = false;
  StateId restart_site;
};

// Runs one thinned process from `base`; `generation` is the running step
// counter of the meta-trial so that draws never repeat across restarts.
ThinnedOutcome run_thinned(const Kernel& kernel, const OffspringLawField& laws, const StateId& base, int k,
                           const SimConfig& cfg, const TrialKey& key, int& generation) {
  auto xi = CloudBuilder::make({{base, 1}}, generation, 0, std::nullopt, cfg.particle_cap);
  int steps = 0;
  while (steps < cfg.horizon) {
    ParticleCloud cloud = xi;
    for (int j = 0; j < k; ++j) {
      cloud = step_bmc(cloud, kernel, laws, key, cfg.particle_cap);
      if (cloud.censored()) return {true, base};
    }
    generation = cloud.generation();
    steps += k;
    const std::uint64_t at_base = cloud.count_at(base);
    if (at_base == 0) return {false, cloud.sites().front().first};
    xi = CloudBuilder::make({{base, at_base}}, generation, 0, std::nullopt, cfg.particle_cap);
    if (xi.censored()) return {true, base};
  }
  return {true, base};
}

std::optional<int> choose_k(const Kernel& kernel, const StateId& base, double m, const CascadeOptions& opts,
                            double* mean_out) {
  const Window window(kernel, Truncation{base, opts.k_max});
  const auto ret = return_probabilities(window, base, opts.k_max);
  std::optional<int> chosen;
  double best = 0.0;
  for (int k = 1; k <= opts.k_max; ++k) {
    const double mean = ret[static_cast<std::size_t>(k)] * std::pow(m, k);
    if (!(mean > 1.0)) continue;
    if (!chosen || (opts.policy == CascadeKPolicy::LargestMean && mean > best)) {
      chosen = k;
      best = mean;
      if (opts.policy == CascadeKPolicy::Smallest) break;
    }
  }
  if (mean_out) *mean_out = best;
  return chosen;
}

}  // namespace

CascadeReport run_xi_cascade(const Kernel& kernel, const OffspringLawField& laws, const StateId& start,
                             const SimConfig& cfg, const CascadeOptions& opts) {
  cfg.validate();
  if (opts.k_max < 1 || opts.max_restarts < 0) throw std::invalid_argument("cascade: k_max >= 1 and max_restarts >= 0");
  const auto m = laws.constant_mean();
  if (!m || !(*m > 1.0)) throw std::invalid_argument("cascade: requires a constant mean offspring m > 1");

  CascadeReport report;
  const auto k0 = find_supercritical_k(kernel, start, *m, opts.k_max);
  if (!k0) {
    report.message = "construction unavailable: no k <= " + std::to_string(opts.k_max) +
                     " with p^(k)(x0,x0) > m^(-k) (consistent with m <= 1/rho)";
    return report;
  }
  report.available = true;

  std::unordered_map<StateId, int, StateHash> k_cache;
  auto k_at = [&](const StateId& base) {
    auto it = k_cache.find(base);
    if (it != k_cache.end()) return it->second;
    double mean = 0.0;
    const auto k = choose_k(kernel, base, *m, opts, &mean);
    if (!k) throw std::runtime_error("cascade: no admissible k at restart site " + base.to_string());
    if (base == start) {
      report.k = *k;
      report.embedded_mean = mean;
    }
    return k_cache[base] = *k;
  };
  k_at(start);

  const auto slots = static_cast<std::size_t>(opts.max_restarts) + 1;
  report.meta_trials = cfg.trials;
  report.restarts_histogram.assign(slots, 0);
  report.started.assign(slots, 0);
  report.extinct.assign(slots, 0);
  for (std::uint64_t t = 0; t < cfg.trials; ++t) {
    const TrialKey key{cfg.seed, t};
    StateId base = start;
    int generation = 0;
    for (std::size_t i = 0; i < slots; ++i) {
      ++report.started[i];
      const auto outcome = run_thinned(kernel, laws, base, k_at(base), cfg, key, generation);
      if (outcome.survived) {
        ++report.survived;
        ++report.restarts_histogram[i];
        break;
      }
      ++report.extinct[i];
      base = outcome.restart_site;
    }
  }
  report.success_rate = static_cast<double>(report.survived) / static_cast<double>(cfg.trials);
  return report;
}

ThinnedExtinction thinned_extinction_frequency(const Kernel& kernel, const OffspringLawField& laws,
                                               const StateId& base, int k, const SimConfig& cfg) {
  cfg.validate();
  if (k < 1) throw std::invalid_argument("thinned_extinction_frequency: k must be positive");
  ThinnedExtinction out;
  out.trials = cfg.trials;
  for (std::uint64_t t = 0; t < cfg.trials; ++t) {
    int generation = 0;
    if (!run_thinned(kernel, laws, base, k, cfg, TrialKey{cfg.seed, t}, generation).survived) ++out.extinct;
  }
  const double n = static_cast<double>(out.trials);
  out.frequency = static_cast<double>(out.extinct) / n;
  out.standard_error = std::sqrt(out.frequency * (1.0 - out.frequency) / n);
  return out;
}

}  // namespace bmc
