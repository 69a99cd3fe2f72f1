#include "bmc/enumerate.hpp"

#include <algorithm>
#include <cmath>

namespace bmc {

namespace {

// A configuration is the sorted multiset of particle positions.
using Config = std::vector<std::pair<StateId, std::uint64_t>>;
// Partial configuration under construction: site -> multiplicity.
using Partial = std::map<StateId, std::uint64_t>;

struct Budget {
  std::uint64_t used = 0;
  std::uint64_t cap = 0;
  void charge(std::uint64_t n) {
    used += n;
    if (used > cap) {
      throw EnumerationTooLarge("exact enumeration exceeded " + std::to_string(cap) + " weighted paths");
    }
  }
};

// Law of the children positions of one particle at `site`.
std::map<Partial, double> one_particle(const Kernel& kernel, const OffspringLaw& law, const StateId& site,
                                       Budget& budget) {
  const auto moves = kernel.neighbors(site);
  std::map<Partial, double> out;
  for (const auto& [k, pk] : law.support()) {
    std::map<Partial, double> placed{{Partial{}, pk}};
    for (int c = 0; c < k; ++c) {
      std::map<Partial, double> next;
      for (const auto& [part, w] : placed) {
        budget.charge(moves.size());
        for (const auto& t : moves) {
          Partial p = part;
          ++p[t.to];
          next[p] += w * t.prob;
        }
      }
      placed.swap(next);
    }
    for (auto& [part, w] : placed) out[part] += w;
  }
  return out;
}

std::map<Partial, double> convolve(const std::map<Partial, double>& a, const std::map<Partial, double>& b,
                                   Budget& budget) {
  std::map<Partial, double> out;
  budget.charge(a.size() * b.size());
  for (const auto& [pa, wa] : a) {
    for (const auto& [pb, wb] : b) {
      Partial merged = pa;
      for (const auto& [s, c] : pb) merged[s] += c;
      out[merged] += wa * wb;
    }
  }
  return out;
}

}  // namespace

std::vector<std::map<std::uint64_t, double>> visit_count_distributions(const Kernel& kernel,
                                                                      const OffspringLawField& laws,
                                                                      const StateId& start, const StateId& target,
                                                                      int n_max, std::uint64_t path_cap) {
  if (n_max < 0) throw std::invalid_argument("visit_count_distributions: n_max must be nonnegative");
  Budget budget{0, path_cap};
  std::map<Config, double> configs{{Config{{start, 1}}, 1.0}};

  auto marginal = [&] {
    std::map<std::uint64_t, double> dist;
    for (const auto& [cfg, w] : configs) {
      std::uint64_t n = 0;
      for (const auto& [s, c] : cfg) {
        if (s == target) n = c;
      }
      dist[n] += w;
    }
    return dist;
  };

  std::vector<std::map<std::uint64_t, double>> out{marginal()};
  for (int gen = 1; gen <= n_max; ++gen) {
    std::map<Config, double> next;
    for (const auto& [cfg, w] : configs) {
      std::map<Partial, double> acc{{Partial{}, 1.0}};
      for (const auto& [site, count] : cfg) {
        const auto single = one_particle(kernel, laws.at(site), site, budget);
        for (std::uint64_t i = 0; i < count; ++i) acc = convolve(acc, single, budget);
      }
      for (const auto& [part, pw] : acc) next[Config(part.begin(), part.end())] += w * pw;
    }
    configs.swap(next);
    out.push_back(marginal());
  }
  return out;
}

}  // namespace bmc
