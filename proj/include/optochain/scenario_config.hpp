#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optochain/analytic_rates.hpp"
#include "optochain/core_model.hpp"
#include "optochain/fluctuations.hpp"

namespace optochain {

enum class ScenarioKind { EquilibriumBranch, CoolingMap, ResonanceAnalysis, ScalingStudy, KinkSpectroscopy };

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_from_string(const std::string& name);

/// Grid in units of kappa.
struct Axis {
  double min = 0.0;
  double max = 0.0;
  int count = 0;
  bool log = false;

  std::vector<double> values() const;
};

enum class ScalingHold { Eta, Depth };

struct ScalingSpec {
  std::vector<int> sizes;
  int reference_n = 11;  // trap frequency in `physical` belongs to this N
  ScalingHold hold = ScalingHold::Eta;
};

enum class OutputFormat { Csv, Json };

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::EquilibriumBranch;
  PhysicalConfig physical;
  Axis eta{1.0, 400.0, 200, true};
  std::optional<Axis> delta_c;
  // extra eta (or delta_c for kink scans) points, kappa units
  std::vector<double> snapshots;
  Axis nu{-15.0, 15.0, 1501, false};
  ScalingSpec scaling;
  TargetMode target{};
  SweepVariable resonance_variable = SweepVariable::Eta;
  NoiseChannel phonon_noise{};
  double chi_threshold = 1e-8;
  std::uint64_t seed = 0;
  bool covariance_dump = false;
};

void validate(const ScenarioConfig& config);

/// Reads the YAML schema documented in the README. `preset:` inside the
/// file selects the base values that the remaining keys override. When
/// `kind` is given it is used if the file has no `scenario:` key and must
/// agree with it otherwise.
ScenarioConfig load_config(const std::string& path, std::optional<ScenarioKind> kind = std::nullopt);
ScenarioConfig parse_config(const std::string& yaml_text, std::optional<ScenarioKind> kind = std::nullopt);

/// Bundled parameter sets: "sec3c" (bulk cooling) and "sec4" (kink).
ScenarioConfig preset_config(const std::string& name, ScenarioKind kind);

/// Canonical JSON text of the resolved configuration (stable key order).
std::string canonical_json(const ScenarioConfig& config);

/// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

}  // namespace optochain
