#include "bmc/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <sstream>

namespace bmc {

Kernel::Kernel(std::string name, NeighborFn neighbors, std::optional<std::size_t> dimension)
    : name_(std::move(name)), neighbors_(std::move(neighbors)), dimension_(dimension) {
  if (!neighbors_) throw std::invalid_argument("Kernel: neighbor function is empty");
}

Kernel lattice_walk(std::span<const AxisDrift> drift, std::string name) {
  if (drift.empty() || drift.size() > kMaxDim) {
    throw std::invalid_argument("lattice_walk: dimension must be in 1.." + std::to_string(kMaxDim));
  }
  const std::size_t d = drift.size();
  double total = 0.0;
  TransitionList steps;
  for (std::size_t i = 0; i < d; ++i) {
    if (drift[i].plus < 0.0 || drift[i].minus < 0.0) {
      throw std::invalid_argument("lattice_walk: negative step probability on axis " + std::to_string(i));
    }
    total += drift[i].plus + drift[i].minus;
    if (drift[i].plus > 0.0) steps.push_back({StateId::unit(d, i, +1), drift[i].plus});
    if (drift[i].minus > 0.0) steps.push_back({StateId::unit(d, i, -1), drift[i].minus});
  }
  if (std::abs(total - 1.0) > kProbTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "lattice_walk: step probabilities sum to " << total << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
  if (name.empty()) name = "lattice_walk_d" + std::to_string(d);
  return Kernel(
      std::move(name),
      [steps](const StateId& x) {
        TransitionList out;
        out.reserve(steps.size());
        for (const auto& s : steps) out.push_back({x + s.to, s.prob});
        return out;
      },
      d);
}

Kernel z_walk(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("z_walk: p must lie in [0, 1]");
  const AxisDrift axis{p, 1.0 - p};
  return lattice_walk(std::span<const AxisDrift>(&axis, 1), "z_walk");
}

Kernel load_edge_list(std::istream& in, std::string name) {
  std::map<StateId, TransitionList> edges;
  std::optional<std::size_t> dim;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string xs, ys, ps;
    if (!(fields >> xs >> ys >> ps)) {
      throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": expected 'x y p'");
    }
    StateId x = StateId::parse(xs);
    StateId y = StateId::parse(ys);
    double p = 0.0;
    try {
      std::size_t used = 0;
      p = std::stod(ps, &used);
      if (used != ps.size()) throw std::invalid_argument(ps);
    } catch (const std::exception&) {
      throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": bad probability '" + ps + "'");
    }
    if (!(p > 0.0 && p <= 1.0)) {
      throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": probability must lie in (0, 1]");
    }
    if (x.dim() != y.dim() || (dim && *dim != x.dim())) {
      throw std::invalid_argument("edge list line " + std::to_string(lineno) + ": inconsistent state dimension");
    }
    dim = x.dim();
    edges[x].push_back({y, p});
  }
  auto shared = std::make_shared<const std::map<StateId, TransitionList>>(std::move(edges));
  return Kernel(
      std::move(name),
      [shared](const StateId& x) {
        auto it = shared->find(x);
        return it == shared->end() ? TransitionList{} : it->second;
      },
      dim);
}

Kernel load_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open edge list '" + path + "'");
  return load_edge_list(in, path);
}

StochasticCheck verify_stochastic(const Kernel& kernel, std::span<const StateId> states) {
  if (states.empty()) throw std::invalid_argument("verify_stochastic: state list is empty");
  for (const auto& x : states) {
    double sum = 0.0;
    for (const auto& t : kernel.neighbors(x)) {
      if (!(t.prob > 0.0 && t.prob <= 1.0)) {
        std::ostringstream msg;
        msg << "state " << x.to_string() << ": transition to " << t.to.to_string() << " has probability "
            << t.prob;
        return {false, x, t.prob, msg.str()};
      }
      sum += t.prob;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "state " << x.to_string() << ": row sums to " << sum;
      return {false, x, sum, msg.str()};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Window

Window::Window(const Kernel& kernel, const Truncation& trunc) : trunc_(trunc) {
  if (trunc.radius < 0) throw std::invalid_argument("Truncation: radius must be nonnegative");

  std::unordered_map<StateId, int, StateHash> dist;
  std::unordered_map<StateId, TransitionList, StateHash> rows;
  std::deque<StateId> frontier{trunc.center};
  dist.emplace(trunc.center, 0);
  while (!frontier.empty()) {
    StateId x = frontier.front();
    frontier.pop_front();
    const int dx = dist.at(x);
    auto& row = rows[x] = kernel.neighbors(x);
    if (dx == trunc.radius) continue;
    for (const auto& t : row) {
      if (dist.emplace(t.to, dx + 1).second) frontier.push_back(t.to);
    }
  }

  states_.reserve(dist.size());
  for (const auto& [s, _] : dist) states_.push_back(s);
  std::sort(states_.begin(), states_.end());
  distance_.resize(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    index_.emplace(states_[i], i);
    distance_[i] = dist.at(states_[i]);
  }

  escaped_.assign(states_.size(), 0.0);
  row_start_.reserve(states_.size() + 1);
  row_start_.push_back(0);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    for (const auto& t : rows.at(states_[i])) {
      auto it = index_.find(t.to);
      if (it == index_.end()) {
        escaped_[i] += t.prob;
      } else {
        col_.push_back(it->second);
        val_.push_back(t.prob);
      }
    }
    row_start_.push_back(col_.size());
  }
}

std::optional<std::size_t> Window::index_of(const StateId& s) const {
  auto it = index_.find(s);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Window::require_index(const StateId& s) const {
  auto idx = index_of(s);
  if (!idx) throw OutOfWindow(s);
  return *idx;
}

void Window::apply(std::span<const double> f, std::span<double> out) const {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = row_start_[i]; j < row_start_[i + 1]; ++j) acc += val_[j] * f[col_[j]];
    out[i] = acc;
  }
}

void Window::propagate(std::span<const double> mu, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const double m = mu[i];
    if (m == 0.0) continue;
    for (std::size_t j = row_start_[i]; j < row_start_[i + 1]; ++j) out[col_[j]] += m * val_[j];
  }
}

bool Window::exact_for(const StateId& from, int steps) const {
  return distance_[require_index(from)] + steps <= trunc_.radius;
}

// ---------------------------------------------------------------------------

namespace {

void check_steps(int n) {
  if (n < 0) throw std::invalid_argument("number of steps must be nonnegative");
}

}  // namespace

WindowedValue n_step_probability(const Window& window, const StateId& x, const StateId& y, int n) {
  check_steps(n);
  const std::size_t ix = window.require_index(x);
  const std::size_t iy = window.require_index(y);
  std::vector<double> mu(window.size(), 0.0), next(window.size());
  mu[ix] = 1.0;
  for (int k = 0; k < n; ++k) {
    window.propagate(mu, next);
    mu.swap(next);
  }
  return {mu[iy], window.exact_for(x, n)};
}

WindowedValue n_step_probability(const Kernel& kernel, const StateId& x, const StateId& y, int n,
                                 const Truncation& trunc) {
  return n_step_probability(Window(kernel, trunc), x, y, n);
}

std::vector<double> return_probabilities(const Window& window, const StateId& x, int n_max) {
  check_steps(n_max);
  const std::size_t ix = window.require_index(x);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n_max) + 1);
  std::vector<double> mu(window.size(), 0.0), next(window.size());
  mu[ix] = 1.0;
  out.push_back(1.0);
  for (int k = 1; k <= n_max; ++k) {
    window.propagate(mu, next);
    mu.swap(next);
    out.push_back(mu[ix]);
  }
  return out;
}

WindowedValue green_partial_sum(const Kernel& kernel, const StateId& x, const StateId& y, double z, int terms,
                                const Truncation& trunc) {
  check_steps(terms);
  if (!(z > 0.0)) throw std::invalid_argument("green_partial_sum: z must be positive");
  Window window(kernel, trunc);
  const std::size_t ix = window.require_index(x);
  const std::size_t iy = window.require_index(y);
  std::vector<double> mu(window.size(), 0.0), next(window.size());
  mu[ix] = 1.0;
  double sum = mu[iy];
  double zn = 1.0;
  for (int k = 1; k <= terms; ++k) {
    window.propagate(mu, next);
    mu.swap(next);
    zn *= z;
    sum += mu[iy] * zn;
  }
  return {sum, window.exact_for(x, terms)};
}

}  // namespace bmc
