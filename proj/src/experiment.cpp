#include "bmc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "bmc/spectral.hpp"

namespace bmc {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Classify: return "classify";
    case Mode::Simulate: return "simulate";
    case Mode::Rho: return "rho";
    case Mode::Certificate: return "certificate";
    case Mode::Invariance: return "invariance";
    case Mode::Cascade: return "cascade";
    case Mode::Presets: return "presets";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::Classify, Mode::Simulate, Mode::Rho, Mode::Certificate, Mode::Invariance, Mode::Cascade,
                 Mode::Presets}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("mode", "unknown mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Config (de)serialization

namespace {

void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "config" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
  }
}

template <class T>
void read(const Json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  const std::string field = path.empty() ? key : path + "." + key;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(field, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
void read_opt(const Json& obj, const char* key, std::optional<T>& out, const std::string& path) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  T v{};
  read(obj, key, v, path);
  out = v;
}

std::string number_or_string(const Json& v, const std::string& field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) {
    std::ostringstream s;
    s.precision(17);
    s << v.get<double>();
    return s.str();
  }
  throw ConfigError(field, "expected a number or string");
}

StateId parse_state(const std::string& text, const std::string& field) {
  try {
    return StateId::parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  ExperimentConfig c;
  reject_unknown(j, "", {"mode", "kernel", "laws", "start", "target", "sim", "truncation", "rho", "tolerance",
                         "classify", "simulate", "certificate", "invariance", "cascade", "output"});
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m, "");
    c.mode = parse_mode(m);
  }
  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    reject_unknown(k, "kernel", {"preset", "p", "d", "drift", "edge_list"});
    read(k, "preset", c.kernel.preset, "kernel");
    read(k, "p", c.kernel.p, "kernel");
    read(k, "d", c.kernel.d, "kernel");
    read(k, "edge_list", c.kernel.edge_list, "kernel");
    if (k.contains("drift") && !k.at("drift").is_null()) {
      std::vector<std::vector<double>> pairs;
      read(k, "drift", pairs, "kernel");
      for (const auto& pr : pairs) {
        if (pr.size() != 2) throw ConfigError("kernel.drift", "each entry must be [p_plus, p_minus]");
        c.kernel.drift.push_back({pr[0], pr[1]});
      }
    }
  }
  if (j.contains("laws")) {
    const auto& l = j.at("laws");
    reject_unknown(l, "laws", {"mean", "law", "sites"});
    if (l.contains("mean") && !l.at("mean").is_null()) c.laws.mean = number_or_string(l.at("mean"), "laws.mean");
    read(l, "law", c.laws.law, "laws");
    if (l.contains("sites")) {
      const auto& sites = l.at("sites");
      if (!sites.is_array()) throw ConfigError("laws.sites", "expected an array");
      for (const auto& s : sites) {
        reject_unknown(s, "laws.sites[]", {"state", "law"});
        std::string state, law;
        read(s, "state", state, "laws.sites[]");
        read(s, "law", law, "laws.sites[]");
        c.laws.sites.emplace_back(state, law);
      }
    }
  }
  read(j, "start", c.start, "");
  read(j, "target", c.target, "");
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    reject_unknown(s, "sim", {"horizon", "particle_cap", "trials", "seed", "visit_threshold", "threads"});
    read(s, "horizon", c.sim.horizon, "sim");
    read(s, "particle_cap", c.sim.particle_cap, "sim");
    read(s, "trials", c.sim.trials, "sim");
    read(s, "seed", c.sim.seed, "sim");
    read(s, "visit_threshold", c.sim.visit_threshold, "sim");
    read(s, "threads", c.sim.threads, "sim");
  }
  if (j.contains("truncation")) {
    reject_unknown(j.at("truncation"), "truncation", {"radius"});
    read_opt(j.at("truncation"), "radius", c.radius, "truncation");
  }
  if (j.contains("rho")) {
    const auto& r = j.at("rho");
    reject_unknown(r, "rho", {"n_max", "max_iters", "tol"});
    read(r, "n_max", c.rho_n_max, "rho");
    read(r, "max_iters", c.rho_max_iters, "rho");
    read(r, "tol", c.rho_tol, "rho");
  }
  if (j.contains("tolerance")) {
    reject_unknown(j.at("tolerance"), "tolerance", {"critical", "slack"});
    read(j.at("tolerance"), "critical", c.critical_tol, "tolerance");
    read(j.at("tolerance"), "slack", c.slack, "tolerance");
  }
  if (j.contains("classify")) {
    reject_unknown(j.at("classify"), "classify", {"with_mc", "strict"});
    read(j.at("classify"), "with_mc", c.with_mc, "classify");
    read(j.at("classify"), "strict", c.strict, "classify");
  }
  if (j.contains("simulate")) {
    reject_unknown(j.at("simulate"), "simulate", {"star"});
    read(j.at("simulate"), "star", c.star, "simulate");
  }
  if (j.contains("certificate")) {
    reject_unknown(j.at("certificate"), "certificate", {"file", "level"});
    read(j.at("certificate"), "file", c.certificate_file, "certificate");
    read_opt(j.at("certificate"), "level", c.certificate_level, "certificate");
  }
  if (j.contains("invariance")) {
    const auto& iv = j.at("invariance");
    reject_unknown(iv, "invariance", {"shift", "x", "y", "n_max"});
    read(iv, "shift", c.shift, "invariance");
    read(iv, "x", c.inv_x, "invariance");
    read(iv, "y", c.inv_y, "invariance");
    read(iv, "n_max", c.inv_n_max, "invariance");
  }
  if (j.contains("cascade")) {
    const auto& cs = j.at("cascade");
    reject_unknown(cs, "cascade", {"k_max", "max_restarts", "k_policy"});
    read(cs, "k_max", c.cascade.k_max, "cascade");
    read(cs, "max_restarts", c.cascade.max_restarts, "cascade");
    std::string policy;
    read(cs, "k_policy", policy, "cascade");
    if (policy == "largest_mean") {
      c.cascade.policy = CascadeKPolicy::LargestMean;
    } else if (!policy.empty() && policy != "smallest") {
      throw ConfigError("cascade.k_policy", "expected 'smallest' or 'largest_mean'");
    }
  }
  if (j.contains("output")) {
    reject_unknown(j.at("output"), "output", {"report", "csv"});
    read(j.at("output"), "report", c.report_path, "output");
    read(j.at("output"), "csv", c.csv_path, "output");
  }
  return c;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["mode"] = to_string(mode);
  Json k;
  k["preset"] = kernel.preset;
  k["p"] = kernel.p;
  k["d"] = kernel.d;
  Json drift = Json::array();
  for (const auto& a : kernel.drift) drift.push_back({a.plus, a.minus});
  k["drift"] = drift;
  k["edge_list"] = kernel.edge_list;
  j["kernel"] = k;
  Json sites = Json::array();
  for (const auto& [s, l] : laws.sites) sites.push_back({{"state", s}, {"law", l}});
  j["laws"] = {{"mean", laws.mean}, {"law", laws.law}, {"sites", sites}};
  j["start"] = start;
  j["target"] = target;
  j["sim"] = {{"horizon", sim.horizon},   {"particle_cap", sim.particle_cap},
              {"trials", sim.trials},     {"seed", sim.seed},
              {"visit_threshold", sim.visit_threshold}, {"threads", sim.threads}};
  j["truncation"] = {{"radius", radius ? Json(*radius) : Json(nullptr)}};
  j["rho"] = {{"n_max", rho_n_max}, {"max_iters", rho_max_iters}, {"tol", rho_tol}};
  j["tolerance"] = {{"critical", critical_tol}, {"slack", slack}};
  j["classify"] = {{"with_mc", with_mc}, {"strict", strict}};
  j["simulate"] = {{"star", star}};
  j["certificate"] = {{"file", certificate_file},
                      {"level", certificate_level ? Json(*certificate_level) : Json(nullptr)}};
  j["invariance"] = {{"shift", shift}, {"x", inv_x}, {"y", inv_y}, {"n_max", inv_n_max}};
  j["cascade"] = {{"k_max", cascade.k_max},
                  {"max_restarts", cascade.max_restarts},
                  {"k_policy", cascade.policy == CascadeKPolicy::Smallest ? "smallest" : "largest_mean"}};
  j["output"] = {{"report", report_path}, {"csv", csv_path}};
  return j;
}

// ---------------------------------------------------------------------------
// Presets

const std::vector<PresetInfo>& preset_registry() {
  static const std::vector<PresetInfo> registry{
      {"z_drift", "p in (0,1)", "walk on Z with drift, p(x,x+1) = p = 1 - p(x,x-1); rho = 2 sqrt(p(1-p))"},
      {"zd_symmetric", "d in 1..4", "simple symmetric walk on Z^d; rho = 1, strongly recurrent for every m > 1"},
      {"zd_anisotropic", "drift = [[p1+, p1-], ...] summing to 1",
       "nearest-neighbour walk on Z^d with p(x, x +- e_i) = p_i^+-; rho = 2 sum_i sqrt(p_i^+ p_i^-)"},
      {"edge_list", "edge_list = path", "custom kernel from an 'x y p' edge list; rho from power iteration only"},
  };
  return registry;
}

ResolvedKernel resolve_kernel(const KernelSpec& spec) {
  std::vector<AxisDrift> drift;
  std::string example;
  if (spec.preset == "z_drift") {
    if (!(spec.p > 0.0 && spec.p < 1.0)) throw ConfigError("kernel.p", "must lie in (0, 1)");
    drift = {{spec.p, 1.0 - spec.p}};
  } else if (spec.preset == "zd_symmetric") {
    if (spec.d < 1 || spec.d > static_cast<int>(kMaxDim)) {
      throw ConfigError("kernel.d", "must lie in 1.." + std::to_string(kMaxDim));
    }
    drift.assign(static_cast<std::size_t>(spec.d), {0.5 / spec.d, 0.5 / spec.d});
  } else if (spec.preset == "zd_anisotropic") {
    if (spec.drift.empty() || spec.drift.size() > kMaxDim) {
      throw ConfigError("kernel.drift", "needs 1.." + std::to_string(kMaxDim) + " [p_plus, p_minus] pairs");
    }
    double total = 0.0;
    for (const auto& a : spec.drift) {
      if (!(a.plus > 0.0 && a.plus < 1.0 && a.minus > 0.0 && a.minus < 1.0)) {
        throw ConfigError("kernel.drift", "every probability must lie in (0, 1)");
      }
      total += a.plus + a.minus;
    }
    if (std::abs(total - 1.0) > kProbTol) throw ConfigError("kernel.drift", "probabilities must sum to 1");
    drift = spec.drift;
  } else if (spec.preset == "edge_list") {
    if (spec.edge_list.empty()) throw ConfigError("kernel.edge_list", "path required for the edge_list preset");
    try {
      Kernel k = load_edge_list_file(spec.edge_list);
      const std::size_t dim = k.dimension().value_or(1);
      return {std::move(k), spec.preset, preset_registry()[3].example, dim, std::nullopt, std::nullopt};
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("kernel.edge_list", e.what());
    }
  } else {
    throw ConfigError("kernel.preset", "unknown preset '" + spec.preset + "'");
  }
  for (const auto& info : preset_registry()) {
    if (info.name == spec.preset) example = info.example;
  }
  Kernel k = lattice_walk(drift, spec.preset);
  return {std::move(k), spec.preset, example, drift.size(), drift, lattice_translations(drift.size())};
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

Json to_json(const SpectralEstimate& e) {
  return {{"value", e.value},
          {"method", to_string(e.method)},
          {"radius_used", e.radius_used},
          {"is_lower_bound", e.is_lower_bound},
          {"iterations", e.iterations}};
}

Json to_json(const Verdict& v) {
  Json basis = Json::array();
  for (const auto& e : v.basis) {
    Json values = Json::object();
    for (const auto& [k, x] : e.values) values[k] = x;
    basis.push_back({{"tag", to_string(e.tag)}, {"note", e.note}, {"values", values}});
  }
  return {{"regime", to_string(v.regime)}, {"critical", v.critical}, {"basis", basis}};
}

Json to_json(const InequalityCheck& c) {
  return {{"pass", c.pass},
          {"worst_margin", c.worst_margin},
          {"argmin", c.argmin ? Json(c.argmin->to_string()) : Json(nullptr)},
          {"checked", c.checked},
          {"excluded", c.excluded}};
}

Json to_json(const LyapunovCheck& c) {
  Json j = to_json(static_cast<const InequalityCheck&>(c));
  j["inequality_holds"] = c.inequality_holds;
  j["has_supercritical_site"] = c.has_supercritical_site;
  return j;
}

Json to_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

Json to_json(const AlphaEstimate& a) {
  return {{"trials", a.trials},
          {"reached", a.reached},
          {"censored_unresolved", a.censored_unresolved},
          {"optimistic", a.optimistic},
          {"optimistic_ci95", to_json(a.optimistic_ci)},
          {"pessimistic", a.pessimistic},
          {"pessimistic_ci95", to_json(a.pessimistic_ci)},
          {"censoring_rate", a.censoring_rate}};
}

std::string iso_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct Context {
  const ExperimentConfig& cfg;
  ResolvedKernel rk;
  StateId start;
  StateId target;
  int radius;
};

std::optional<SpectralEstimate> closed_form_rho(const Context& ctx) {
  if (!ctx.rk.drift) return std::nullopt;
  return rho_closed_form_lattice(*ctx.rk.drift);
}

SpectralEstimate power_rho(const Context& ctx) {
  try {
    return rho_power_iteration(ctx.rk.kernel, Truncation{ctx.start, ctx.radius},
                               {ctx.cfg.rho_max_iters, ctx.cfg.rho_tol});
  } catch (const DegenerateWindow& e) {
    throw ConfigError("truncation.radius", e.what());
  }
}

/// Resolved offspring field, or nullopt with `mean` infinite.
struct ResolvedLaws {
  std::optional<OffspringLawField> field;
  MeanOffspring mean;
  bool constant_mean = false;
};

ResolvedLaws resolve_laws(const Context& ctx) {
  const auto& spec = ctx.cfg.laws;
  ResolvedLaws out;
  std::optional<OffspringLaw> base;
  try {
    if (!spec.law.empty()) {
      base = OffspringLaw::parse(spec.law);
    } else if (spec.mean == "infinite") {
      out.mean = MeanOffspring::unbounded();
      out.constant_mean = true;
      if (!spec.sites.empty()) throw ConfigError("laws.sites", "not allowed with an infinite mean");
      return out;
    } else if (spec.mean == "critical") {
      const auto rho = closed_form_rho(ctx);
      if (!rho) throw ConfigError("laws.mean", "'critical' needs a preset with a closed-form spectral radius");
      base = OffspringLaw::with_mean(1.0 / rho->value);
    } else if (!spec.mean.empty()) {
      double m = 0.0;
      try {
        std::size_t used = 0;
        m = std::stod(spec.mean, &used);
        if (used != spec.mean.size()) throw std::invalid_argument(spec.mean);
      } catch (const std::logic_error&) {
        throw ConfigError("laws.mean", "expected a number, 'infinite' or 'critical'");
      }
      if (!(m > 1.0)) throw ConfigError("laws.mean", "must exceed 1");
      base = OffspringLaw::with_mean(m);
    } else {
      throw ConfigError("laws", "set laws.mean or laws.law");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(spec.law.empty() ? "laws.mean" : "laws.law", e.what());
  }
  std::map<StateId, OffspringLaw> overrides;
  for (const auto& [state, law] : spec.sites) {
    try {
      overrides.emplace(StateId::parse(state), OffspringLaw::parse(law));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("laws.sites", e.what());
    }
  }
  out.field.emplace(*base, std::move(overrides));
  if (auto m = out.field->constant_mean()) {
    out.constant_mean = true;
    out.mean = MeanOffspring::finite(*m);
  }
  return out;
}

const OffspringLawField& require_field(const ResolvedLaws& laws) {
  if (!laws.field) throw ConfigError("laws.mean", "an infinite mean cannot be simulated or certified");
  return *laws.field;
}

Json laws_json(const ResolvedLaws& laws) {
  Json j;
  if (!laws.field) {
    j["mean"] = "infinite";
    return j;
  }
  j["default_law"] = laws.field->default_law().to_string();
  j["constant_mean"] = laws.constant_mean ? Json(laws.mean.value) : Json(nullptr);
  j["max_mean"] = laws.field->max_mean();
  j["overrides"] = laws.field->overrides().size();
  return j;
}

Json run_rho(const Context& ctx) {
  Json out;
  if (auto cf = closed_form_rho(ctx)) out["closed_form"] = to_json(*cf);
  out["power_iteration"] = to_json(power_rho(ctx));
  const int n_max = std::min(ctx.cfg.rho_n_max, ctx.radius);
  if (n_max >= 2) {
    try {
      out["diagonal_return"] =
          to_json(rho_diagonal_return(ctx.rk.kernel, ctx.start, n_max, Truncation{ctx.start, ctx.radius}));
    } catch (const std::runtime_error& e) {
      out["diagonal_return"] = {{"error", e.what()}};
    }
  }
  return out;
}

std::optional<StateFunction> geometric_certificate(const Context& ctx, GeometricFit* fit_out) {
  if (!ctx.rk.drift) return std::nullopt;
  const auto fit = fit_geometric_certificate(ctx.rk.kernel, ctx.start);
  if (fit_out) *fit_out = fit;
  const Window window(ctx.rk.kernel, Truncation{ctx.start, ctx.radius});
  return geometric_function(fit.lambda, window.states());
}

Json fit_json(const GeometricFit& fit) { return {{"lambda", fit.lambda}, {"level", fit.level}}; }

Json run_classify(const Context& ctx, const ResolvedLaws& laws, Verdict& final_verdict) {
  Json out;
  out["laws"] = laws_json(laws);
  std::optional<Verdict> spectral;
  if (laws.constant_mean) {
    SpectralEstimate rho = closed_form_rho(ctx).value_or(SpectralEstimate{});
    if (!ctx.rk.drift) rho = power_rho(ctx);
    out["rho"] = to_json(rho);
    if (!laws.mean.infinite && !(laws.mean.value > 1.0)) {
      throw ConfigError("laws.mean", "constant mean offspring must exceed 1");
    }
    if (ctx.rk.symmetry) {
      const int sym_radius = std::min(ctx.radius, 10);
      // an infinite mean is declared site-independent, so only the kernel is checked
      const auto field = laws.field.value_or(OffspringLawField::constant(OffspringLaw({{1, 1.0}})));
      const auto sym = verify_symmetry(ctx.rk.kernel, field, *ctx.rk.symmetry, Truncation{ctx.start, sym_radius});
      out["symmetry"] = {{"pass", sym.pass}, {"checked", sym.checked}, {"window_radius", sym_radius},
                         {"orbit_count", sym.orbit_count ? Json(*sym.orbit_count) : Json("infinite")},
                         {"violations", sym.violations}};
      spectral = classify_quasi_transitive(laws.mean, rho, sym, ctx.cfg.critical_tol);
    } else {
      spectral = classify_constant_mean(laws.mean, rho, ctx.cfg.critical_tol);
    }
    out["spectral_verdict"] = to_json(*spectral);
  }

  std::optional<Verdict> certified;
  if (laws.field) {
    GeometricFit fit;
    if (auto f = geometric_certificate(ctx, &fit)) {
      LyapunovCheck check;
      certified = transience_by_certificate(ctx.rk.kernel, *f, *laws.field, &check);
      out["certificate"] = {{"fit", fit_json(fit)}, {"check", to_json(check)}, {"verdict", to_json(*certified)}};
    }
  }

  Verdict v = spectral.value_or(Verdict{});
  if (certified && certified->regime == Regime::Transient) {
    if (v.regime == Regime::Recurrent || v.regime == Regime::StronglyRecurrent) {
      // Sound criteria cannot disagree; surface it rather than pick a side.
      out["conflict"] = "certificate proves transience but the spectral criterion proves recurrence";
      v.regime = Regime::Unknown;
    } else {
      v.regime = Regime::Transient;
    }
    for (const auto& e : certified->basis) v.basis.push_back(e);
  }
  if (ctx.cfg.with_mc) {
    const auto alpha = estimate_alpha(ctx.rk.kernel, require_field(laws), ctx.start, ctx.cfg.sim);
    const auto rec = reconcile(v, alpha);
    v.basis.push_back({EvidenceTag::Simulation, rec.note,
                       {{"alpha_optimistic", alpha.optimistic}, {"alpha_pessimistic", alpha.pessimistic}}});
    out["simulation"] = {{"alpha", to_json(alpha)},
                         {"agreement", to_string(rec.agreement)},
                         {"note", rec.note},
                         {"weakly_recurrent_consistent", rec.weakly_recurrent_consistent}};
  }
  final_verdict = v;
  out["verdict"] = to_json(v);
  return out;
}

void write_csv(const ExperimentConfig& cfg, const std::vector<TrialSummary>& trials) {
  if (cfg.csv_path.empty()) return;
  std::ofstream csv(cfg.csv_path);
  if (!csv) throw ConfigError("output.csv", "cannot open '" + cfg.csv_path + "' for writing");
  write_trials_csv(csv, trials);
}

Json run_simulate(const Context& ctx, const ResolvedLaws& laws) {
  const auto& field = require_field(laws);
  Json out;
  out["laws"] = laws_json(laws);
  if (ctx.cfg.star) {
    const auto trials = run_bmc_star_trials(ctx.rk.kernel, field, ctx.target, ctx.cfg.sim, ctx.start);
    const auto nu = summarize_nu(trials);
    out["bmc_star"] = {{"origin", ctx.target.to_string()},
                       {"nu_mean", nu.mean},
                       {"nu_standard_error", nu.standard_error},
                       {"trials", nu.trials},
                       {"censored", nu.censored},
                       {"nu_mean_le_1_within_3se", nu.mean <= 1.0 + 3.0 * nu.standard_error}};
    write_csv(ctx.cfg, trials);
  } else {
    const auto trials = run_bmc_trials(ctx.rk.kernel, field, ctx.start, ctx.target, ctx.cfg.sim);
    std::uint64_t censored = 0;
    double total_visits = 0.0;
    for (const auto& t : trials) {
      censored += t.censored ? 1 : 0;
      for (std::size_t g = 1; g < t.visits.size(); ++g) total_visits += static_cast<double>(t.visits[g]);
    }
    out["bmc"] = {{"trials", trials.size()},
                  {"censored", censored},
                  {"mean_visits_to_target", total_visits / static_cast<double>(trials.size())}};
    write_csv(ctx.cfg, trials);
  }
  out["alpha"] = to_json(estimate_alpha(ctx.rk.kernel, field, ctx.start, ctx.cfg.sim));
  return out;
}

Json run_certificate(const Context& ctx, const ResolvedLaws& laws, Verdict& final_verdict) {
  Json out;
  StateFunction f;
  std::optional<double> level = ctx.cfg.certificate_level;
  if (!ctx.cfg.certificate_file.empty()) {
    try {
      f = load_state_function_file(ctx.cfg.certificate_file);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("certificate.file", e.what());
    }
    out["source"] = ctx.cfg.certificate_file;
  } else {
    GeometricFit fit;
    auto g = geometric_certificate(ctx, &fit);
    if (!g) throw ConfigError("certificate.file", "required for kernels without lattice structure");
    f = std::move(*g);
    if (!level) level = fit.level;
    out["source"] = "geometric";
    out["fit"] = fit_json(fit);
  }
  if (level) {
    try {
      const Certificate cert(f, *level, ctx.start);
      out["superharmonic"] = to_json(check_superharmonic(ctx.rk.kernel, cert, ctx.cfg.slack));
      out["level"] = *level;
    } catch (const std::out_of_range&) {
      throw ConfigError("start", "base point lies outside the certificate domain");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("certificate", e.what());
    }
  }
  if (laws.field) {
    LyapunovCheck check;
    try {
      final_verdict = transience_by_certificate(ctx.rk.kernel, f, *laws.field, &check);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("certificate", e.what());
    }
    out["lyapunov"] = to_json(check);
    out["verdict"] = to_json(final_verdict);
  }
  return out;
}

Json run_invariance(const Context& ctx, const ResolvedLaws& laws) {
  const auto& field = require_field(laws);
  const StateId offset = parse_state(ctx.cfg.shift, "invariance.shift");
  const StateId x = parse_state(ctx.cfg.inv_x, "invariance.x");
  const StateId y = parse_state(ctx.cfg.inv_y, "invariance.y");
  if (ctx.cfg.inv_n_max < 0 || ctx.cfg.inv_n_max > 3) throw ConfigError("invariance.n_max", "must lie in 0..3");
  if (offset.dim() != ctx.rk.dim || x.dim() != ctx.rk.dim || y.dim() != ctx.rk.dim) {
    throw ConfigError("invariance", "states must match the kernel dimension");
  }
  const auto check = verify_visitlaw_invariance(ctx.rk.kernel, field, shift_by(offset), x, y, ctx.cfg.inv_n_max);
  Json per_gen = Json::array();
  for (std::size_t n = 0; n < check.lhs.size(); ++n) {
    Json lhs = Json::object(), rhs = Json::object();
    for (const auto& [k, p] : check.lhs[n]) lhs[std::to_string(k)] = p;
    for (const auto& [k, p] : check.rhs[n]) rhs[std::to_string(k)] = p;
    per_gen.push_back({{"generation", n}, {"lhs", lhs}, {"rhs", rhs}});
  }
  return {{"pass", check.pass},
          {"max_difference", check.max_difference},
          {"worst_generation", check.worst_generation},
          {"distributions", per_gen}};
}

Json run_cascade(const Context& ctx, const ResolvedLaws& laws) {
  const auto& field = require_field(laws);
  if (!laws.constant_mean) throw ConfigError("laws", "the cascade needs a constant mean offspring");
  const auto rep = run_xi_cascade(ctx.rk.kernel, field, ctx.start, ctx.cfg.sim, ctx.cfg.cascade);
  Json out{{"available", rep.available}, {"message", rep.message}};
  if (!rep.available) return out;
  Json per_start = Json::array();
  for (std::size_t i = 0; i < rep.started.size(); ++i) {
    if (rep.started[i] == 0) break;
    per_start.push_back({{"index", i},
                         {"started", rep.started[i]},
                         {"extinct", rep.extinct[i]},
                         {"extinction_frequency",
                          static_cast<double>(rep.extinct[i]) / static_cast<double>(rep.started[i])}});
  }
  out["k"] = rep.k;
  out["embedded_mean"] = rep.embedded_mean;
  out["meta_trials"] = rep.meta_trials;
  out["survived"] = rep.survived;
  out["success_rate"] = rep.success_rate;
  out["restarts_histogram"] = rep.restarts_histogram;
  out["per_start"] = per_start;
  return out;
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  Report report;
  Json& body = report.body;
  body["tool"] = "bmc";
  body["mode"] = to_string(cfg.mode);

  if (cfg.mode == Mode::Presets) {
    Json list = Json::array();
    for (const auto& p : preset_registry()) {
      list.push_back({{"name", p.name}, {"parameters", p.parameters}, {"example", p.example}});
    }
    body["presets"] = list;
    return report;
  }

  try {
    cfg.sim.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("sim", e.what());
  }

  Context ctx{cfg, resolve_kernel(cfg.kernel), StateId{}, StateId{}, 0};
  ctx.start = cfg.start.empty() ? StateId::origin(ctx.rk.dim) : parse_state(cfg.start, "start");
  ctx.target = cfg.target.empty() ? ctx.start : parse_state(cfg.target, "target");
  if (ctx.start.dim() != ctx.rk.dim) throw ConfigError("start", "dimension does not match the kernel");
  if (ctx.target.dim() != ctx.rk.dim) throw ConfigError("target", "dimension does not match the kernel");
  ctx.radius = cfg.radius.value_or(ctx.rk.dim == 1 ? 200 : 40);
  if (ctx.radius < 1) throw ConfigError("truncation.radius", "must be at least 1");

  ExperimentConfig echo = cfg;
  echo.start = ctx.start.to_string();
  echo.target = ctx.target.to_string();
  echo.radius = ctx.radius;
  body["config"] = echo.to_json();
  body["preset"] = {{"name", ctx.rk.preset}, {"example", ctx.rk.example}};
  body["seed"] = cfg.sim.seed;

  Verdict verdict;
  bool has_verdict = false;
  if (cfg.mode == Mode::Rho) {
    body["results"] = run_rho(ctx);
  } else {
    const auto laws = resolve_laws(ctx);
    switch (cfg.mode) {
      case Mode::Classify:
        body["results"] = run_classify(ctx, laws, verdict);
        has_verdict = true;
        break;
      case Mode::Simulate: body["results"] = run_simulate(ctx, laws); break;
      case Mode::Certificate:
        body["results"] = run_certificate(ctx, laws, verdict);
        has_verdict = laws.field.has_value();
        break;
      case Mode::Invariance: body["results"] = run_invariance(ctx, laws); break;
      case Mode::Cascade: body["results"] = run_cascade(ctx, laws); break;
      default: break;
    }
  }
  if (has_verdict) {
    body["verdict"] = to_string(verdict.regime);
    if (cfg.strict && verdict.regime == Regime::Unknown) report.exit_code = kExitInconclusive;
  }
  const auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  body["timing"] = {{"started_at", iso_timestamp(started)}, {"elapsed_ms", elapsed}};
  return report;
}

}  // namespace bmc
