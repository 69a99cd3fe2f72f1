#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "bmc/branching.hpp"
#include "bmc/kernel.hpp"
#include "bmc/state.hpp"

namespace bmc {

class EnumerationTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Law of the number of particles at `target` after n generations, n = 0..n_max,
/// for a BMC started with one particle at `start`. Computed exactly by
/// propagating the distribution over particle configurations; identical
/// configurations are merged after every generation. Throws
/// EnumerationTooLarge once more than `path_cap` weighted branches have been
/// expanded.
std::vector<std::map<std::uint64_t, double>> visit_count_distributions(const Kernel& kernel,
                                                                      const OffspringLawField& laws,
                                                                      const StateId& start, const StateId& target,
                                                                      int n_max,
                                                                      std::uint64_t path_cap = 10'000'000);

}  // namespace bmc
