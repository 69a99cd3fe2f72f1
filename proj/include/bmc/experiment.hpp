#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "bmc/branching.hpp"
#include "bmc/classify.hpp"
#include "bmc/kernel.hpp"
#include "bmc/simulate.hpp"

namespace bmc {

using Json = nlohmann::ordered_json;

/// Validation failure; `field` names the offending config entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field_, const std::string& what)
      : std::invalid_argument(field_ + ": " + what), field(std::move(field_)) {}
  std::string field;
};

enum class Mode { Classify, Simulate, Rho, Certificate, Invariance, Cascade, Presets };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct KernelSpec {
  std::string preset = "z_drift";
  double p = 0.5;
  int d = 1;
  std::vector<AxisDrift> drift;
  std::string edge_list;
};

struct LawSpec {
  /// Number, "infinite", or "critical" (m = 1/rho for closed-form presets).
  std::string mean;
  /// Explicit default law "k1:p1, k2:p2, ..."; takes precedence over mean.
  std::string law;
  std::vector<std::pair<std::string, std::string>> sites;
};

struct ExperimentConfig {
  Mode mode = Mode::Classify;
  KernelSpec kernel;
  LawSpec laws;
  std::string start;   // empty: origin
  std::string target;  // empty: start
  SimConfig sim;
  std::optional<int> radius;  // default 200 on Z, 40 otherwise
  int rho_n_max = 100;
  long rho_max_iters = 2'000'000;
  double rho_tol = 1e-13;
  double critical_tol = kDefaultCriticalTol;
  double slack = 0.0;
  bool with_mc = false;
  bool strict = false;
  bool star = false;
  std::string certificate_file;
  std::optional<double> certificate_level;
  std::string shift = "3";
  std::string inv_x = "0";
  std::string inv_y = "1";
  int inv_n_max = 2;
  CascadeOptions cascade;
  std::string report_path;
  std::string csv_path;

  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const Json& j);
  /// Full echo including every default.
  Json to_json() const;
};

struct PresetInfo {
  std::string name;
  std::string parameters;
  std::string example;
};

const std::vector<PresetInfo>& preset_registry();

/// Kernel of a preset (or edge list) with its declared structure.
struct ResolvedKernel {
  Kernel kernel;
  std::string preset;
  std::string example;
  std::size_t dim = 1;
  /// Present for lattice presets; enables the closed-form spectral radius.
  std::optional<std::vector<AxisDrift>> drift;
  std::optional<SymmetrySpec> symmetry;
};

ResolvedKernel resolve_kernel(const KernelSpec& spec);

struct Report {
  Json body;
  int exit_code = 0;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInconclusive = 3;

/// Runs the pipeline for cfg.mode. Validation problems throw ConfigError; the
/// report's exit code is kExitInconclusive when cfg.strict and the verdict is
/// Unknown.
Report run_experiment(const ExperimentConfig& cfg);

}  // namespace bmc
