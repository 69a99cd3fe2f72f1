#include "bmc/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "bmc/enumerate.hpp"

namespace bmc {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Transient: return "Transient";
    case Regime::Recurrent: return "Recurrent";
    case Regime::StronglyRecurrent: return "StronglyRecurrent";
    case Regime::Unknown: return "Unknown";
  }
  return "?";
}

std::string to_string(EvidenceTag t) {
  switch (t) {
    case EvidenceTag::ClosedFormRho: return "ClosedFormRho";
    case EvidenceTag::RhoLowerBound: return "RhoLowerBound";
    case EvidenceTag::InfiniteMean: return "InfiniteMean";
    case EvidenceTag::Certificate: return "Certificate";
    case EvidenceTag::QuasiTransitive: return "QuasiTransitive";
    case EvidenceTag::Simulation: return "Simulation";
  }
  return "?";
}

std::string to_string(Agreement a) {
  switch (a) {
    case Agreement::Consistent: return "consistent";
    case Agreement::Inconclusive: return "inconclusive";
    case Agreement::Contradiction: return "contradiction";
  }
  return "?";
}

Verdict classify_constant_mean(MeanOffspring m, const SpectralEstimate& rho, double tol) {
  Verdict v;
  if (m.infinite) {
    v.regime = Regime::Recurrent;
    v.basis.push_back({EvidenceTag::InfiniteMean, "infinite mean offspring dominates any finite supercritical m", {}});
    return v;
  }
  if (!(m.value > 1.0)) throw std::invalid_argument("classify: constant mean offspring must exceed 1");
  if (!(rho.value > 0.0 && rho.value <= 1.0 + 1e-12)) {
    throw std::invalid_argument("classify: spectral radius estimate must lie in (0, 1]");
  }
  if (!(tol >= 0.0)) throw std::invalid_argument("classify: tol must be nonnegative");

  const double threshold = 1.0 / rho.value;
  v.critical = std::abs(m.value - threshold) <= tol;
  const bool above = m.value > threshold + tol;
  const std::vector<std::pair<std::string, double>> values{
      {"m", m.value}, {"rho", rho.value}, {"inverse_rho", threshold}, {"margin", m.value - threshold}, {"tol", tol}};

  if (!rho.is_lower_bound) {
    v.regime = above ? Regime::Recurrent : Regime::Transient;
    v.basis.push_back({EvidenceTag::ClosedFormRho,
                       above ? "m > 1/rho" : (v.critical ? "m = 1/rho within tol (critical, transient)" : "m < 1/rho"),
                       values});
  } else if (above) {
    // rho >= rho_lb, hence 1/rho <= 1/rho_lb < m.
    v.regime = Regime::Recurrent;
    v.basis.push_back({EvidenceTag::RhoLowerBound, "m > 1/rho_lb >= 1/rho", values});
  } else {
    v.regime = Regime::Unknown;
    v.basis.push_back({EvidenceTag::RhoLowerBound, "m <= 1/rho_lb; a lower bound on rho cannot prove transience",
                       values});
  }
  return v;
}

// ---------------------------------------------------------------------------

StateMap shift_by(const StateId& offset) {
  return [offset](const StateId& x) { return x + offset; };
}

StateMap swap_axes(std::size_t i, std::size_t j) {
  return [i, j](const StateId& x) {
    if (i >= x.dim() || j >= x.dim()) throw std::out_of_range("swap_axes: axis out of range");
    StateId y = x;
    std::swap(y[i], y[j]);
    return y;
  };
}

SymmetrySpec lattice_translations(std::size_t dim) {
  SymmetrySpec spec;
  for (std::size_t i = 0; i < dim; ++i) {
    spec.generators.push_back(shift_by(StateId::unit(dim, i)));
    spec.names.push_back("shift e" + std::to_string(i + 1));
  }
  spec.orbit_of = [](const StateId&) { return std::string("0"); };
  spec.orbit_count = 1;
  return spec;
}

SymmetryCheck verify_symmetry(const Kernel& kernel, const OffspringLawField& laws, const SymmetrySpec& sym,
                              const Truncation& window) {
  constexpr std::size_t kMaxReported = 20;
  SymmetryCheck out;
  out.orbit_count = sym.orbit_count;
  const Window w(kernel, window);
  std::size_t violation_count = 0;
  auto report = [&](std::string msg) {
    if (++violation_count <= kMaxReported) out.violations.push_back(std::move(msg));
  };

  for (std::size_t g = 0; g < sym.generators.size(); ++g) {
    const auto& gamma = sym.generators[g];
    const std::string name = g < sym.names.size() ? sym.names[g] : "generator " + std::to_string(g);
    for (const auto& x : w.states()) {
      ++out.checked;
      const StateId gx = gamma(x);
      std::map<StateId, double> image;
      for (const auto& t : kernel.neighbors(gx)) image[t.to] += t.prob;
      const auto row = kernel.neighbors(x);
      bool kernel_ok = row.size() == image.size();
      for (const auto& t : row) {
        auto it = image.find(gamma(t.to));
        if (it == image.end() || std::abs(it->second - t.prob) > kProbTol) kernel_ok = false;
      }
      if (!kernel_ok) report(name + ": p(gx, gy) != p(x, y) at x = " + x.to_string());
      if (!laws.at(x).approx_equal(laws.at(gx))) {
        report(name + ": offspring law differs between " + x.to_string() + " and " + gx.to_string());
      }
    }
  }
  if (violation_count > kMaxReported) {
    out.violations.push_back("... " + std::to_string(violation_count - kMaxReported) + " more");
  }
  out.pass = violation_count == 0 && !sym.generators.empty();
  return out;
}

Verdict classify_quasi_transitive(MeanOffspring m, const SpectralEstimate& rho, const SymmetryCheck& sym,
                                  double tol) {
  Verdict v = classify_constant_mean(m, rho, tol);
  if (!sym.pass || !sym.orbit_count) return v;
  v.basis.push_back({EvidenceTag::QuasiTransitive, "declared automorphisms verified; finitely many orbits",
                     {{"orbit_count", static_cast<double>(*sym.orbit_count)},
                      {"checked", static_cast<double>(sym.checked)}}});
  if (v.regime == Regime::Recurrent) v.regime = Regime::StronglyRecurrent;
  return v;
}

Verdict transience_by_certificate(const Kernel& kernel, const StateFunction& f, const OffspringLawField& laws,
                                  LyapunovCheck* details) {
  const auto check = lyapunov_transience_check(kernel, f, laws);
  if (details) *details = check;
  Verdict v;
  std::vector<std::pair<std::string, double>> values{{"worst_margin", check.worst_margin},
                                                     {"checked", static_cast<double>(check.checked)},
                                                     {"excluded", static_cast<double>(check.excluded)}};
  if (check.pass) {
    v.regime = Regime::Transient;
    v.basis.push_back({EvidenceTag::Certificate, "Pf <= f/m on the window interior and m > 1 somewhere", values});
  } else {
    v.regime = Regime::Unknown;
    std::string why = !check.inequality_holds ? "Pf <= f/m fails at " + check.argmin->to_string()
                                              : "m(y) > 1 holds nowhere on the window";
    v.basis.push_back({EvidenceTag::Certificate, why + "; the criterion is only sufficient", values});
  }
  return v;
}

InvarianceCheck verify_visitlaw_invariance(const Kernel& kernel, const OffspringLawField& laws, const StateMap& gamma,
                                           const StateId& x, const StateId& y, int n_max, double tol) {
  InvarianceCheck out;
  out.lhs = visit_count_distributions(kernel, laws, x, y, n_max);
  out.rhs = visit_count_distributions(kernel, laws, gamma(x), gamma(y), n_max);
  for (int n = 0; n <= n_max; ++n) {
    const auto& a = out.lhs[static_cast<std::size_t>(n)];
    const auto& b = out.rhs[static_cast<std::size_t>(n)];
    std::map<std::uint64_t, double> keys;
    for (const auto& [k, _] : a) keys[k];
    for (const auto& [k, _] : b) keys[k];
    for (const auto& [k, _] : keys) {
      const double pa = a.count(k) ? a.at(k) : 0.0;
      const double pb = b.count(k) ? b.at(k) : 0.0;
      const double diff = std::abs(pa - pb);
      if (diff > out.max_difference) {
        out.max_difference = diff;
        out.worst_generation = n;
      }
    }
  }
  out.pass = out.max_difference <= tol;
  return out;
}

Reconciliation reconcile(const Verdict& analytic, const AlphaEstimate& mc, const ReconcilePolicy& policy) {
  Reconciliation r;
  std::ostringstream note;
  note.precision(4);
  switch (analytic.regime) {
    case Regime::Transient:
      if (mc.pessimistic > policy.transient_contradiction) {
        r.agreement = Agreement::Contradiction;
        note << "analytic Transient but pessimistic alpha estimate " << mc.pessimistic << " > "
             << policy.transient_contradiction;
      } else if (mc.optimistic <= policy.transient_contradiction) {
        r.agreement = Agreement::Consistent;
        note << "optimistic alpha estimate " << mc.optimistic << " is small";
      } else {
        note << "censoring leaves the estimate between " << mc.pessimistic << " and " << mc.optimistic;
      }
      break;
    case Regime::StronglyRecurrent:
      if (mc.pessimistic >= policy.strong_consistent) {
        r.agreement = Agreement::Consistent;
        note << "pessimistic alpha estimate " << mc.pessimistic;
      } else {
        note << "inconclusive: horizon/cap suspected (pessimistic alpha estimate " << mc.pessimistic << ")";
      }
      break;
    case Regime::Recurrent:
      if (mc.optimistic >= policy.recurrent_consistent) {
        r.agreement = Agreement::Consistent;
        note << "optimistic alpha estimate " << mc.optimistic;
      } else {
        note << "inconclusive: horizon/cap suspected (optimistic alpha estimate " << mc.optimistic << ")";
      }
      r.weakly_recurrent_consistent = mc.pessimistic_ci.lo > 0.05 && mc.optimistic_ci.hi < 0.95;
      if (r.weakly_recurrent_consistent) note << "; interior estimate is weakly-recurrent-consistent (heuristic)";
      break;
    case Regime::Unknown:
      note << "no analytic verdict; alpha estimate in [" << mc.pessimistic << ", " << mc.optimistic << "]";
      break;
  }
  r.note = note.str();
  return r;
}

}  // namespace bmc
