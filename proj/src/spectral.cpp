#include "bmc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace bmc {

std::string to_string(RhoMethod m) {
  switch (m) {
    case RhoMethod::ClosedForm: return "ClosedForm";
    case RhoMethod::PowerIteration: return "PowerIteration";
    case RhoMethod::DiagonalReturn: return "DiagonalReturn";
  }
  return "?";
}

SpectralEstimate rho_closed_form_lattice(std::span<const AxisDrift> drift) {
  if (drift.empty()) throw std::invalid_argument("rho_closed_form_lattice: dimension must be positive");
  double total = 0.0, rho = 0.0;
  for (const auto& a : drift) {
    if (!(a.plus > 0.0 && a.minus > 0.0)) {
      throw std::invalid_argument("rho_closed_form_lattice: all p_i^+ and p_i^- must be positive");
    }
    total += a.plus + a.minus;
    rho += std::sqrt(a.plus * a.minus);
  }
  if (std::abs(total - 1.0) > kProbTol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "rho_closed_form_lattice: probabilities sum to " << total << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
  return {2.0 * rho, RhoMethod::ClosedForm, 0, false, 0};
}

NotConverged::NotConverged(double prev, double last_, long iters)
    : std::runtime_error([&] {
        std::ostringstream msg;
        msg.precision(17);
        msg << "power iteration did not converge after " << iters << " iterations (last estimates " << prev
            << ", " << last_ << ")";
        return msg.str();
      }()),
      previous(prev),
      last(last_),
      iterations(iters) {}

SpectralEstimate rho_power_iteration(const Kernel& kernel, const Truncation& trunc, PowerIterationOptions opts) {
  const Window window(kernel, trunc);
  const std::size_t n = window.size();
  const std::size_t c = window.require_index(trunc.center);

  // Collatz-Wielandt bracket: min_i (Av)_i/v_i <= lambda <= max_i (Av)_i/v_i
  // for the lazy operator A; converged once the bracket is narrower than tol.
  std::vector<double> v(n, 1.0), pv(n);
  double prev = std::numeric_limits<double>::quiet_NaN();
  double est = prev;
  for (long it = 1; it <= opts.max_iters; ++it) {
    window.apply(v, pv);
    const double vc = v[c];
    double norm = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pv[i] = 0.5 * (v[i] + pv[i]);
      norm = std::max(norm, pv[i]);
      if (v[i] > 1e-250) {
        const double ratio = pv[i] / v[i];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
    }
    if (!(norm > 0.0) || !(pv[c] > 0.0)) {
      throw DegenerateWindow("power iteration: the window carries no recurrent mass at its center");
    }
    est = 2.0 * (pv[c] / vc) - 1.0;
    for (auto& x : pv) x /= norm;
    v.swap(pv);
    if (2.0 * (hi - lo) < opts.tol) {
      if (!(est > opts.tol)) {
        throw DegenerateWindow("power iteration: truncated operator has zero spectral radius (window of radius " +
                               std::to_string(trunc.radius) + ")");
      }
      return {std::min(est, 1.0), RhoMethod::PowerIteration, trunc.radius, true, it};
    }
    prev = est;
  }
  throw NotConverged(prev, est, opts.max_iters);
}

SpectralEstimate rho_diagonal_return(const Kernel& kernel, const StateId& x, int n_max, const Truncation& trunc) {
  if (n_max < 2) throw std::invalid_argument("rho_diagonal_return: n_max must be at least 2");
  const Window window(kernel, trunc);
  const auto ret = return_probabilities(window, x, n_max);
  double best = 0.0;
  for (int k = 1; k <= n_max; ++k) {
    const double p = ret[static_cast<std::size_t>(k)];
    if (p > 0.0) best = std::max(best, std::pow(p, 1.0 / k));
  }
  if (best == 0.0) {
    throw std::runtime_error("rho_diagonal_return: no positive return probability to " + x.to_string() +
                             " within " + std::to_string(n_max) + " steps");
  }
  return {best, RhoMethod::DiagonalReturn, trunc.radius, true, n_max};
}

// ---------------------------------------------------------------------------

StateFunction StateFunction::tabulate(std::span<const StateId> states,
                                      const std::function<double(const StateId&)>& fn) {
  StateFunction f;
  for (const auto& s : states) f.set(s, fn(s));
  return f;
}

void StateFunction::set(const StateId& x, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument("state function must be finite and strictly positive (at " + x.to_string() + ")");
  }
  values_[x] = value;
}

double StateFunction::at(const StateId& x) const {
  auto it = values_.find(x);
  if (it == values_.end()) throw OutOfWindow(x);
  return it->second;
}

std::vector<StateId> StateFunction::states() const {
  std::vector<StateId> out;
  out.reserve(values_.size());
  for (const auto& [s, _] : values_) out.push_back(s);
  std::sort(out.begin(), out.end());
  return out;
}

StateFunction StateFunction::scaled(double c) const {
  StateFunction out;
  for (const auto& [s, v] : values_) out.set(s, v * c);
  return out;
}

StateFunction geometric_function(std::span<const double> lambda, std::span<const StateId> states) {
  for (double l : lambda) {
    if (!(l > 0.0)) throw std::invalid_argument("geometric_function: lambda must be positive");
  }
  return StateFunction::tabulate(states, [&](const StateId& x) {
    if (x.dim() != lambda.size()) throw std::invalid_argument("geometric_function: dimension mismatch");
    double log_f = 0.0;
    for (std::size_t i = 0; i < x.dim(); ++i) log_f += static_cast<double>(x[i]) * std::log(lambda[i]);
    return std::exp(log_f);
  });
}

StateFunction load_state_function(std::istream& in) {
  StateFunction f;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string state, value;
    if (!(fields >> state >> value)) {
      throw std::invalid_argument("certificate line " + std::to_string(lineno) + ": expected 'state value'");
    }
    double v = 0.0;
    try {
      v = std::stod(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("certificate line " + std::to_string(lineno) + ": bad value '" + value + "'");
    }
    f.set(StateId::parse(state), v);
  }
  if (f.size() == 0) throw std::invalid_argument("certificate file has no entries");
  return f;
}

StateFunction load_state_function_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open certificate file '" + path + "'");
  return load_state_function(in);
}

Certificate::Certificate(StateFunction f_, double level_, StateId base_)
    : f(std::move(f_)), level(level_), base(base_) {
  if (!(level > 0.0)) throw std::invalid_argument("Certificate: level t must be positive");
  f = f.scaled(1.0 / f.at(base));
}

// ---------------------------------------------------------------------------

namespace {

/// Pf(x)/f(x), or nullopt when a neighbor lies outside f's domain.
std::optional<double> transfer_ratio(const Kernel& kernel, const StateFunction& f, const StateId& x) {
  double pf = 0.0;
  for (const auto& t : kernel.neighbors(x)) {
    if (!f.contains(t.to)) return std::nullopt;
    pf += t.prob * f.at(t.to);
  }
  return pf / f.at(x);
}

template <class BoundFn>
void scan_interior(const Kernel& kernel, const StateFunction& f, BoundFn bound, InequalityCheck& out) {
  out.worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& x : f.states()) {
    const auto ratio = transfer_ratio(kernel, f, x);
    if (!ratio) {
      ++out.excluded;
      continue;
    }
    ++out.checked;
    const double margin = bound(x) - *ratio;
    if (margin < out.worst_margin) {
      out.worst_margin = margin;
      out.argmin = x;
    }
  }
  if (out.checked == 0) {
    throw std::invalid_argument("certificate check: every state has a neighbor outside the window");
  }
}

}  // namespace

InequalityCheck check_superharmonic(const Kernel& kernel, const Certificate& cert, double slack) {
  InequalityCheck out;
  scan_interior(kernel, cert.f, [&](const StateId&) { return cert.level; }, out);
  out.pass = out.worst_margin >= slack - kProbTol;
  return out;
}

LyapunovCheck lyapunov_transience_check(const Kernel& kernel, const StateFunction& f, const OffspringLawField& laws,
                                        double slack) {
  LyapunovCheck out;
  scan_interior(kernel, f, [&](const StateId& x) { return 1.0 / laws.mean_at(x); }, out);
  out.inequality_holds = out.worst_margin >= slack - kProbTol;
  for (const auto& x : f.states()) {
    if (laws.mean_at(x) > 1.0) {
      out.has_supercritical_site = true;
      break;
    }
  }
  out.pass = out.inequality_holds && out.has_supercritical_site;
  return out;
}

// ---------------------------------------------------------------------------

GeometricFit fit_geometric_certificate(const Kernel& kernel, const StateId& probe, int grid_points,
                                       double log_extent) {
  if (grid_points < 3) throw std::invalid_argument("fit_geometric_certificate: need at least 3 grid points");
  const std::size_t d = probe.dim();
  const auto steps = kernel.neighbors(probe);

  std::vector<double> log_lambda(d, 0.0);
  auto ratio = [&](const std::vector<double>& ll) {
    double acc = 0.0;
    for (const auto& t : steps) {
      double e = 0.0;
      for (std::size_t i = 0; i < d; ++i) e += static_cast<double>(t.to[i] - probe[i]) * ll[i];
      acc += t.prob * std::exp(e);
    }
    return acc;
  };

  const double h = 2.0 * log_extent / (grid_points - 1);
  double best = ratio(log_lambda);
  for (int sweep = 0; sweep < 16; ++sweep) {
    bool improved = false;
    for (std::size_t i = 0; i < d; ++i) {
      auto trial = log_lambda;
      for (int g = 0; g < grid_points; ++g) {
        trial[i] = -log_extent + g * h;
        const double r = ratio(trial);
        if (r < best - 1e-15) {
          best = r;
          log_lambda[i] = trial[i];
          improved = true;
        }
      }
    }
    if (!improved) break;
  }

  // Pf/f is convex in log lambda (a positive combination of exponentials).
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t i = 0; i < d; ++i) {
    auto trial = log_lambda;
    double a = log_lambda[i] - h, b = log_lambda[i] + h;
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
      const double c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
      trial[i] = c1;
      const double r1 = ratio(trial);
      trial[i] = c2;
      const double r2 = ratio(trial);
      if (r1 < r2) b = c2; else a = c1;
    }
    trial[i] = 0.5 * (a + b);
    if (ratio(trial) <= best) {
      log_lambda = trial;
      best = ratio(trial);
    }
  }

  GeometricFit fit;
  for (double ll : log_lambda) fit.lambda.push_back(std::exp(ll));
  fit.level = best;
  return fit;
}

}  // namespace bmc
