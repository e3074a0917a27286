#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "optochain/dataset.hpp"
#include "optochain/fluctuations.hpp"
#include "optochain/scenario_config.hpp"

namespace optochain {

/// Everything derived from one equilibrium point. Fields past `status` are
/// filled as far as the analysis got.
struct PointAnalysis {
  PointStatus status = PointStatus::Failed;
  std::string message;
  bool has_modes = false;
  bool has_steady_state = false;
  ModeDecomposition modes;
  DriftSystem drift;
  GeneralizedModes generalized;
  SteadyState steady;
  Eigen::VectorXd occupation;  // per normal mode, NaN when excluded
  Eigen::VectorXd gamma;       // rate of the generalized mode assigned to each normal mode
  double mean_n = 0.0;         // over modes with |chi| above the threshold
  int coupled_modes = 0;
  double photon_fluctuations = 0.0;
};

PointAnalysis analyze_point(const EquilibriumState& state, const DriftOptions& options, bool branch_jump = false);

/// Assigns each drift slot the generalized mode with the largest weight on
/// it, greedily over all (mode, slot) weights. Entry 0 is the cavity.
std::vector<Eigen::Index> assign_generalized_modes(const GeneralizedModes& modes);

/// Trap frequency for a chain of n ions given omega_ref at n_ref, keeping
/// the central spacing fixed: omega_ref sqrt(ln n / ln n_ref) n_ref / n.
double scaled_trap_frequency(double omega_ref, int n_ref, int n);

/// Configuration for chain size n in a scaling study.
PhysicalConfig scaled_physical(const ScenarioConfig& config, int n);

struct ScenarioTask {
  std::string label;
  std::function<TaskResult()> run;
};

std::vector<ScenarioTask> plan_tasks(const ScenarioConfig& config);

struct RunOptions {
  int workers = 1;
  // resume cache directory; tasks found there are not recomputed
  std::optional<std::filesystem::path> cache_dir;
  std::function<void(const std::string&)> log;
};

/// Runs all tasks on a worker pool. Point failures end up in the statuses;
/// only invalid configuration throws.
SweepDataset run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

}  // namespace optochain
