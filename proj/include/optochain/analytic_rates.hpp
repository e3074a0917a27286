#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "optochain/equilibrium.hpp"
#include "optochain/modes.hpp"

namespace optochain {

enum class RateStatus { Cooling, NoSteadyState, Decoupled };

const char* to_string(RateStatus status);

struct SidebandRates {
  double a_plus = 0.0;   // heating
  double a_minus = 0.0;  // cooling
  double w_cool = 0.0;   // a_minus - a_plus
  double n_analytic = 0.0;  // NaN unless status == Cooling
  RateStatus status = RateStatus::Cooling;
  // perturbation theory assumes kappa >> |chi|
  bool valid = true;
};

/// Second-order sideband rates and the detailed-balance occupation.
SidebandRates sideband_rates(double chi_abs, double omega, double delta_eff, double kappa = 1.0);

/// (omega_R/omega_t)(U0^2 |a|^2/kappa) [sum_j sin(2 theta_j)]^2 / N.
double bulk_rate_estimate(const ModelParams& params, const EquilibriumState& state);
double bulk_rate_estimate(const ModelParams& params, const Eigen::VectorXd& theta);

struct ChainScales {
  // SI
  double d0 = 0.0;      // m
  double omega0 = 0.0;  // rad/s
  double ell = 0.0;     // m
  // phase units (k x)
  double d0_phase = 0.0;
  double ell_phase = 0.0;
  double omega0_kappa = 0.0;
};

ChainScales chain_scales(const PhysicalConfig& config);
/// Same in internal units only; SI fields left at zero.
ChainScales chain_scales(const ModelParams& params);

struct ResonanceResult {
  bool found = false;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Bisection for a sign change of `f` on [lo, hi] to relative width `rel_tol`.
/// The bracket is scanned on `grid` first; the first sign change is refined.
ResonanceResult find_resonance(const std::function<double(double)>& f, const std::vector<double>& grid,
                               double rel_tol = 1e-3);

enum class ModeSelector { Lowest, Highest, BandCenter, Index };
enum class SweepVariable { Eta, DeltaC };

struct TargetMode {
  ModeSelector selector = ModeSelector::BandCenter;
  Eigen::Index index = 0;
};

/// omega of the selected mode.
double select_mode_frequency(const Eigen::VectorXd& freqs, const TargetMode& target);

/// Root of Delta_eff(v) + omega_target(v) along the continuation branch over
/// `grid` (eta values, or Delta_c values at the params' eta).
ResonanceResult resonance_finder(const ModelParams& params, const TargetMode& target, SweepVariable variable,
                                 const std::vector<double>& grid, const SolverOptions& options = {},
                                 double rel_tol = 1e-3);

}  // namespace optochain
