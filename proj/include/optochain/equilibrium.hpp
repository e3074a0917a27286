#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "optochain/core_model.hpp"

namespace optochain {

enum class Phase { Sliding, Pinned };

const char* to_string(Phase phase);

struct KinkDescriptor {
  Eigen::Index center_index = 0;
  // displacement of the chain midpoint from the trap center, phase units
  double asymmetry = 0.0;
  // max relative deviation of a central spacing from their mean
  double spacing_irregularity = 0.0;
};

struct EquilibriumState {
  ModelParams params;
  IonConfiguration config;
  std::complex<double> amplitude;
  double delta_eff = 0.0;
  double potential = 0.0;
  Phase phase = Phase::Sliding;
  std::optional<KinkDescriptor> kink;
  bool converged = false;
  double residual = 0.0;  // max-norm of the gradient
  double min_hessian_eigenvalue = 0.0;
  int retries = 0;

  double photon_number() const { return std::norm(amplitude); }
  const Eigen::VectorXd& phases() const { return config.phases(); }
};

struct SolverOptions {
  double tolerance = 1e-10;
  double saddle_tolerance = 1e-8;
  int max_iterations = 500;
  int max_random_retries = 6;
  double seed_displacement = 1e-4;
  std::uint64_t seed = 0;
  // Keep theta_j = -theta_{N-1-j}; ignored when the lattice is offset.
  bool enforce_mirror_symmetry = false;
  double asymmetry_threshold = 1e-3;
};

struct TransitionPoint {
  double eta_critical = 0.0;
  double lowest_mode_freq_at_transition = 0.0;
};

struct ContinuationResult {
  std::vector<double> eta;
  std::vector<EquilibriumState> states;
  std::vector<bool> branch_jump;
  std::optional<TransitionPoint> transition;
};

/// Ground state of trap plus Coulomb energy (eta = 0).
IonConfiguration bare_chain_equilibrium(const ModelParams& params, const SolverOptions& options = {});

/// Local minimizer of V_tot starting from `init`. Saddles are escaped with a
/// deterministic perturbation schedule; throws ConvergenceError when no
/// minimum is reached.
EquilibriumState solve_equilibrium(const ModelParams& params, const IonConfiguration& init,
                                   const SolverOptions& options = {});

/// Mirror asymmetry max_j |theta_j + theta_{N-1-j}| / 2 about the trap center.
double mirror_asymmetry(const Eigen::VectorXd& theta);

/// Sliding/pinned label and kink descriptor; also written into `state`.
Phase classify_phase(EquilibriumState& state, double threshold = 1e-3);

/// Follows the minimum from the bare chain along an ascending eta grid and
/// bisects for the loss of stability of the symmetric branch.
ContinuationResult continuation_sweep(const ModelParams& params, const std::vector<double>& eta_grid,
                                      const SolverOptions& options = {});

struct DetuningBranch {
  std::vector<double> delta_c;
  std::vector<EquilibriumState> states;
  std::vector<bool> branch_jump;
};

/// Continuation in Delta_c at the params' eta. The first point is reached by
/// an eta continuation from the bare chain; `delta_c_grid` must be monotone
/// in either direction.
DetuningBranch detuning_sweep(const ModelParams& params, const std::vector<double>& delta_c_grid,
                              const SolverOptions& options = {}, int eta_steps = 200);

/// Flags grid points where the V_tot increment exceeds 10x the previous
/// slope-scaled increment.
std::vector<bool> detect_branch_jumps(const std::vector<double>& eta,
                                      const std::vector<double>& potential);

/// Default continuation grid: 200 log-spaced points over [1, 400] kappa.
std::vector<double> default_eta_grid(double lo = 1.0, double hi = 400.0, int count = 200);

/// Lowest eigenvalue of the full V_tot Hessian on the mirror-symmetric
/// branch at `eta`, solving from `seed`. The solution is written to `seed`.
double symmetric_branch_stability(const ModelParams& params, double eta, Eigen::VectorXd& seed,
                                  const SolverOptions& options = {});

}  // namespace optochain
