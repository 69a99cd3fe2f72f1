// Command-line front end: resolves a JSON config plus flag overrides into an
// ExperimentConfig, runs it, and writes the JSON report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bmc/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> preset, edge_list, m, law, start, target, out, csv, cert, shift, x, y, k_policy;
  std::optional<double> p, level, tol, slack;
  std::optional<int> d, horizon, radius, n_max, rho_n_max, k_max, max_restarts;
  std::optional<std::uint64_t> trials, seed, visit_threshold, particle_cap;
  std::optional<unsigned> threads;
  std::vector<double> drift;
  bool strict = false, with_mc = false, star = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flags override it)");
  cmd->add_option("--preset", f.preset, "z_drift | zd_symmetric | zd_anisotropic | edge_list");
  cmd->add_option("--p", f.p, "forward step probability for z_drift");
  cmd->add_option("--d", f.d, "dimension for zd_symmetric");
  cmd->add_option("--drift", f.drift, "p1+ p1- p2+ p2- ... for zd_anisotropic")->expected(2, 8);
  cmd->add_option("--edge-list", f.edge_list, "edge list file ('x y p' lines)");
  cmd->add_option("--m", f.m, "constant mean offspring: number, 'critical' or 'infinite'");
  cmd->add_option("--law", f.law, "offspring law 'k1:p1, k2:p2, ...'");
  cmd->add_option("--start", f.start, "start state, e.g. 0 or 0,0");
  cmd->add_option("--target", f.target, "target state (BMC* origin in --star mode)");
  cmd->add_option("--horizon", f.horizon, "generations per trial");
  cmd->add_option("--trials", f.trials, "number of trials");
  cmd->add_option("--seed", f.seed, "RNG seed (default: $BMC_SEED, then config)");
  cmd->add_option("--visit-threshold", f.visit_threshold, "visits counted as 'infinitely often'");
  cmd->add_option("--particle-cap", f.particle_cap, "censoring cap on cloud size");
  cmd->add_option("--threads", f.threads, "worker threads for independent trials");
  cmd->add_option("--radius", f.radius, "truncation radius (graph distance)");
  cmd->add_option("--tol", f.tol, "critical tolerance on |m - 1/rho|");
  cmd->add_option("--out", f.out, "report path (default: stdout)");
  cmd->add_option("--csv", f.csv, "per-trial CSV path");
}

void set_if(bmc::Json& j, const char* a, const char* b, const auto& opt) {
  if (opt) j[a][b] = *opt;
}

bmc::Json build_config(const std::string& mode, const Flags& f) {
  bmc::Json j = bmc::Json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw bmc::ConfigError("config", "cannot open '" + f.config + "'");
    try {
      j = bmc::Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw bmc::ConfigError("config", e.what());
    }
  }
  j["mode"] = mode;
  set_if(j, "kernel", "preset", f.preset);
  set_if(j, "kernel", "p", f.p);
  set_if(j, "kernel", "d", f.d);
  set_if(j, "kernel", "edge_list", f.edge_list);
  if (f.edge_list && !f.preset) j["kernel"]["preset"] = "edge_list";
  if (!f.drift.empty()) {
    if (f.drift.size() % 2 != 0) throw bmc::ConfigError("kernel.drift", "needs an even number of values");
    bmc::Json pairs = bmc::Json::array();
    for (std::size_t i = 0; i < f.drift.size(); i += 2) pairs.push_back({f.drift[i], f.drift[i + 1]});
    j["kernel"]["drift"] = pairs;
  }
  set_if(j, "laws", "mean", f.m);
  set_if(j, "laws", "law", f.law);
  if (f.start) j["start"] = *f.start;
  if (f.target) j["target"] = *f.target;
  set_if(j, "sim", "horizon", f.horizon);
  set_if(j, "sim", "trials", f.trials);
  set_if(j, "sim", "visit_threshold", f.visit_threshold);
  set_if(j, "sim", "particle_cap", f.particle_cap);
  set_if(j, "sim", "threads", f.threads);
  if (f.seed) {
    j["sim"]["seed"] = *f.seed;
  } else if (const char* env = std::getenv("BMC_SEED")) {
    try {
      j["sim"]["seed"] = std::stoull(env);
    } catch (const std::exception&) {
      throw bmc::ConfigError("BMC_SEED", "not an unsigned integer");
    }
  }
  set_if(j, "truncation", "radius", f.radius);
  set_if(j, "rho", "n_max", f.rho_n_max);
  set_if(j, "tolerance", "critical", f.tol);
  set_if(j, "tolerance", "slack", f.slack);
  if (f.with_mc) j["classify"]["with_mc"] = true;
  if (f.strict) j["classify"]["strict"] = true;
  if (f.star) j["simulate"]["star"] = true;
  set_if(j, "certificate", "file", f.cert);
  set_if(j, "certificate", "level", f.level);
  set_if(j, "invariance", "shift", f.shift);
  set_if(j, "invariance", "x", f.x);
  set_if(j, "invariance", "y", f.y);
  set_if(j, "invariance", "n_max", f.n_max);
  set_if(j, "cascade", "k_max", f.k_max);
  set_if(j, "cascade", "max_restarts", f.max_restarts);
  set_if(j, "cascade", "k_policy", f.k_policy);
  set_if(j, "output", "report", f.out);
  set_if(j, "output", "csv", f.csv);
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching Markov chains: transience / recurrence classification and simulation"};
  app.require_subcommand(1);
  Flags f;

  auto* classify = app.add_subcommand("classify", "analytic verdict (spectral criterion, certificate, symmetry)");
  add_common(classify, f);
  classify->add_flag("--with-mc", f.with_mc, "add a Monte Carlo alpha estimate and reconcile");
  classify->add_flag("--strict", f.strict, "exit 3 when the verdict is Unknown");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo BMC / BMC* trials");
  add_common(simulate, f);
  simulate->add_flag("--star", f.star, "BMC* with absorbing origin at --target");

  auto* rho = app.add_subcommand("rho", "spectral radius: closed form, power iteration, diagonal returns");
  add_common(rho, f);
  rho->add_option("--n-max", f.rho_n_max, "steps for the diagonal-return estimate");

  auto* cert = app.add_subcommand("certificate", "check a superharmonic / Lyapunov certificate");
  add_common(cert, f);
  cert->add_option("--cert", f.cert, "certificate file ('state value' lines)");
  cert->add_option("--level", f.level, "level t for Pf <= t f");
  cert->add_option("--slack", f.slack, "required margin (default 0)");

  auto* inv = app.add_subcommand("invariance", "exact visit-law invariance under a shift");
  add_common(inv, f);
  inv->add_option("--shift", f.shift, "shift vector, e.g. 3 or 1,0");
  inv->add_option("--x", f.x, "start state");
  inv->add_option("--y", f.y, "observed state");
  inv->add_option("--n-max", f.n_max, "generations (<= 3)");

  auto* cascade = app.add_subcommand("cascade", "repeated embedded Galton-Watson construction");
  add_common(cascade, f);
  cascade->add_option("--k-max", f.k_max, "largest observation period k");
  cascade->add_option("--max-restarts", f.max_restarts, "restarts allowed per meta-trial");
  cascade->add_option("--k-policy", f.k_policy, "smallest | largest_mean");

  app.add_subcommand("presets", "list kernel presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bmc::kExitValidation;
  }

  const std::string mode = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = bmc::ExperimentConfig::from_json(build_config(mode, f));
    const auto report = bmc::run_experiment(cfg);
    const std::string text = report.body.dump(2) + "\n";
    if (cfg.report_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(cfg.report_path);
      if (!out) throw bmc::ConfigError("output.report", "cannot open '" + cfg.report_path + "'");
      out << text;
    }
    return report.exit_code;
  } catch (const bmc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bmc::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
