#include "bmc/branching.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bmc/rng.hpp"

namespace bmc {

GWLaw::GWLaw(std::vector<Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("offspring law: empty support");
  std::sort(atoms.begin(), atoms.end());
  for (const auto& [k, p] : atoms) {
    if (k < 0) throw std::invalid_argument("offspring law: negative offspring count " + std::to_string(k));
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("offspring law: probability of k=" + std::to_string(k) + " outside [0, 1]");
    }
    if (p == 0.0) continue;
    if (!atoms_.empty() && atoms_.back().first == k) {
      atoms_.back().second += p;
    } else {
      atoms_.emplace_back(k, p);
    }
  }
  if (atoms_.empty()) throw std::invalid_argument("offspring law: all probabilities are zero");
  double total = 0.0;
  for (const auto& [k, p] : atoms_) {
    total += p;
    mean_ += k * p;
    cdf_.push_back(total);
  }
  if (std::abs(total - 1.0) > kProbTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "offspring law: probabilities sum to " << total << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
}

GWLaw GWLaw::parse(std::string_view text) {
  std::vector<Atom> atoms;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("offspring law: expected 'k:p' but got '" + item + "'");
    }
    try {
      std::size_t used = 0;
      const int k = std::stoi(item.substr(0, colon), &used);
      const std::string ptxt = item.substr(colon + 1);
      const double p = std::stod(ptxt, &used);
      if (ptxt.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(ptxt);
      atoms.emplace_back(k, p);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("offspring law: malformed atom '" + item + "'");
    }
  }
  return GWLaw(std::move(atoms));
}

double GWLaw::prob(int k) const {
  for (const auto& [kk, p] : atoms_) {
    if (kk == k) return p;
  }
  return 0.0;
}

bool GWLaw::is_point_mass_at_one() const { return atoms_.size() == 1 && atoms_.front().first == 1; }

int GWLaw::sample(double u) const {
  // cdf_ may end a hair below 1; anything past it falls in the last atom.
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return atoms_.back().first;
  return atoms_[static_cast<std::size_t>(it - cdf_.begin())].first;
}

std::string GWLaw::to_string() const {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (i) out << ", ";
    out << atoms_[i].first << ':' << atoms_[i].second;
  }
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

GWLaw require_positive_support(GWLaw law) {
  if (law.support().front().first < 1) {
    throw std::invalid_argument("offspring law: every particle must leave at least one child (k >= 1)");
  }
  return law;
}

}  // namespace

OffspringLaw::OffspringLaw(std::vector<GWLaw::Atom> atoms) : law_(require_positive_support(GWLaw(std::move(atoms)))) {}

OffspringLaw::OffspringLaw(GWLaw law) : law_(require_positive_support(std::move(law))) {}

OffspringLaw OffspringLaw::parse(std::string_view text) { return OffspringLaw(GWLaw::parse(text)); }

OffspringLaw OffspringLaw::with_mean(double m) {
  if (!(m >= 1.0) || !std::isfinite(m)) {
    throw std::invalid_argument("offspring law: mean must be a finite number >= 1");
  }
  const int lo = static_cast<int>(std::floor(m));
  const double frac = m - lo;
  if (frac == 0.0) return OffspringLaw({{lo, 1.0}});
  return OffspringLaw({{lo, 1.0 - frac}, {lo + 1, frac}});
}

bool OffspringLaw::approx_equal(const OffspringLaw& other) const {
  const auto& a = support();
  const auto& b = other.support();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || std::abs(a[i].second - b[i].second) > kProbTol) return false;
  }
  return true;
}

OffspringLawField::OffspringLawField(OffspringLaw default_law) : OffspringLawField(std::move(default_law), {}) {}

OffspringLawField::OffspringLawField(OffspringLaw default_law, std::map<StateId, OffspringLaw> overrides)
    : default_(std::move(default_law)), overrides_(std::move(overrides)) {
  const double m = default_.mean();
  bool constant = true;
  for (const auto& [_, law] : overrides_) {
    if (std::abs(law.mean() - m) > kProbTol) constant = false;
  }
  if (constant) constant_mean_ = m;
}

const OffspringLaw& OffspringLawField::at(const StateId& x) const {
  if (overrides_.empty()) return default_;
  auto it = overrides_.find(x);
  return it == overrides_.end() ? default_ : it->second;
}

double OffspringLawField::max_mean() const {
  double m = default_.mean();
  for (const auto& [_, law] : overrides_) m = std::max(m, law.mean());
  return m;
}

// ---------------------------------------------------------------------------

double pgf(const GWLaw& law, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("pgf: s must lie in [0, 1]");
  double acc = 0.0;
  for (const auto& [k, p] : law.support()) acc += p * std::pow(s, k);
  return acc;
}

double gw_extinction_probability(const GWLaw& law, ExtinctionOptions opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("gw_extinction_probability: tol must be positive");
  if (law.prob(0) == 0.0) return 0.0;
  // (Sub)critical and not degenerate at one: extinction is certain. The
  // iteration would only approach 1 sublinearly here.
  if (law.mean() <= 1.0) return 1.0;
  double q = 0.0;
  for (long i = 0; i < opts.max_iters; ++i) {
    const double next = pgf(law, q);
    if (std::abs(next - q) < opts.tol) return next;
    q = next;
  }
  return q;
}

GWSimulation simulate_gw_extinction(const GWLaw& law, std::uint64_t trials, std::uint64_t cap, std::uint64_t seed) {
  if (trials == 0 || cap == 0) throw std::invalid_argument("simulate_gw_extinction: trials and cap must be positive");
  GWSimulation out;
  out.trials = trials;
  const auto& atoms = law.support();
  for (std::uint64_t t = 0; t < trials; ++t) {
    rng::StreamEngine eng(seed, t);
    std::uint64_t size = 1;
    // Supercritical trees cross the cap quickly; a critical tree dies a.s.
    // but may wander, so the generation budget is generous.
    for (int gen = 0; gen < 1'000'000 && size > 0 && size <= cap; ++gen) {
      std::uint64_t remaining = size;
      double mass = 1.0;
      std::uint64_t next = 0;
      for (std::size_t j = 0; j < atoms.size() && remaining > 0; ++j) {
        std::uint64_t count = remaining;
        if (j + 1 < atoms.size()) {
          const double p = std::clamp(atoms[j].second / mass, 0.0, 1.0);
          count = std::binomial_distribution<std::uint64_t>(remaining, p)(eng);
        }
        next += count * static_cast<std::uint64_t>(atoms[j].first);
        remaining -= count;
        mass -= atoms[j].second;
      }
      size = next;
    }
    if (size == 0) {
      ++out.extinct;
    } else if (size > cap) {
      ++out.reached_cap;
    }
  }
  out.frequency = static_cast<double>(out.extinct) / static_cast<double>(trials);
  out.standard_error = std::sqrt(out.frequency * (1.0 - out.frequency) / static_cast<double>(trials));
  return out;
}

// ---------------------------------------------------------------------------

WindowedValue embedded_gw_mean(const Kernel& kernel, const StateId& x0, int k, double m, const Truncation& trunc) {
  if (k < 1) throw std::invalid_argument("embedded_gw_mean: k must be positive");
  if (!(m > 0.0)) throw std::invalid_argument("embedded_gw_mean: m must be positive");
  const auto ret = n_step_probability(kernel, x0, x0, k, trunc);
  return {ret.value * std::pow(m, k), ret.exact};
}

std::optional<int> find_supercritical_k(const Kernel& kernel, const StateId& x0, double m, int k_max,
                                        const Truncation& trunc) {
  if (!(m > 1.0)) throw std::invalid_argument("find_supercritical_k: requires m > 1");
  if (k_max < 1) throw std::invalid_argument("find_supercritical_k: k_max must be at least 1");
  const Window window(kernel, trunc);
  const auto ret = return_probabilities(window, x0, k_max);
  for (int k = 1; k <= k_max; ++k) {
    if (ret[static_cast<std::size_t>(k)] > std::pow(m, -k)) return k;
  }
  return std::nullopt;
}

std::optional<int> find_supercritical_k(const Kernel& kernel, const StateId& x0, double m, int k_max) {
  return find_supercritical_k(kernel, x0, m, k_max, Truncation{x0, std::max(k_max, 0)});
}

}  // namespace bmc
