#include "optochain/analytic_rates.hpp"

#include <cmath>
#include <limits>

namespace optochain {

const char* to_string(RateStatus status) {
  switch (status) {
    case RateStatus::Cooling:
      return "cooling";
    case RateStatus::NoSteadyState:
      return "no-steady-state";
    case RateStatus::Decoupled:
      return "decoupled";
  }
  return "unknown";
}

SidebandRates sideband_rates(double chi_abs, double omega, double delta_eff, double kappa) {
  if (!(omega > 0)) throw DomainError("mode frequency must be positive");
  if (!(kappa > 0)) throw DomainError("kappa must be positive");
  SidebandRates r;
  const double chi2 = chi_abs * chi_abs;
  const double up = (delta_eff - omega) / kappa, down = (delta_eff + omega) / kappa;
  r.a_plus = chi2 / kappa / (1.0 + up * up);
  r.a_minus = chi2 / kappa / (1.0 + down * down);
  r.w_cool = r.a_minus - r.a_plus;
  r.valid = kappa > std::abs(chi_abs);
  r.n_analytic = std::numeric_limits<double>::quiet_NaN();
  if (chi_abs == 0.0) {
    r.status = RateStatus::Decoupled;
  } else if (delta_eff >= 0.0) {
    r.status = RateStatus::NoSteadyState;
  } else {
    r.status = RateStatus::Cooling;
    const double s = delta_eff + omega;
    r.n_analytic = (s * s + kappa * kappa) / (-4.0 * omega * delta_eff);
  }
  return r;
}

double bulk_rate_estimate(const ModelParams& params, const Eigen::VectorXd& theta) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) sum += std::sin(2.0 * (theta(j) - params.lattice_offset));
  const double n = mean_photon_number(params, theta);
  return params.omega_r / params.omega_t * params.u0 * params.u0 * n * sum * sum / double(theta.size());
}

double bulk_rate_estimate(const ModelParams& params, const EquilibriumState& state) {
  return bulk_rate_estimate(params, state.phases());
}

ChainScales chain_scales(const ModelParams& params) {
  validate(params);
  if (params.n_ions < 2) throw DomainError("chain scales need at least two ions");
  const double n = double(params.n_ions);
  ChainScales s;
  s.ell_phase = std::cbrt(params.coulomb / (2.0 * params.trap_coefficient()));
  s.d0_phase = s.ell_phase * std::cbrt(3.0 * std::log(n) / (n * n));
  s.omega0_kappa = params.omega_t * std::pow(s.ell_phase / s.d0_phase, 1.5);
  return s;
}

ChainScales chain_scales(const PhysicalConfig& config) {
  ChainScales s = chain_scales(nondimensionalize(config));
  const double q = config.ion_charge * codata::elementary_charge;
  const double e2 = q * q / (4.0 * codata::pi * codata::epsilon0 * config.mass_kg());
  const double n = double(config.n_ions);
  s.ell = std::cbrt(e2 / (config.trap_freq * config.trap_freq));
  s.d0 = std::cbrt(e2 / (config.trap_freq * config.trap_freq) * 3.0 * std::log(n) / (n * n));
  s.omega0 = std::sqrt(e2 / (s.d0 * s.d0 * s.d0));
  return s;
}

ResonanceResult find_resonance(const std::function<double(double)>& f, const std::vector<double>& grid,
                               double rel_tol) {
  ResonanceResult r;
  if (grid.size() < 2) return r;
  double x0 = grid[0], f0 = f(x0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double x1 = grid[i], f1 = f(x1);
    if ((f0 < 0) != (f1 < 0)) {
      double lo = x0, hi = x1;
      const bool rising = f0 < 0;
      while (std::abs(hi - lo) > rel_tol * std::max(std::abs(lo), std::abs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if ((f(mid) < 0) == rising) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      r.found = true;
      r.lo = lo;
      r.hi = hi;
      r.value = 0.5 * (lo + hi);
      return r;
    }
    x0 = x1;
    f0 = f1;
  }
  return r;
}

double select_mode_frequency(const Eigen::VectorXd& freqs, const TargetMode& target) {
  if (freqs.size() == 0) throw DomainError("no modes");
  switch (target.selector) {
    case ModeSelector::Lowest:
      return freqs.minCoeff();
    case ModeSelector::Highest:
      return freqs.maxCoeff();
    case ModeSelector::BandCenter:
      return 0.5 * (freqs.minCoeff() + freqs.maxCoeff());
    case ModeSelector::Index:
      if (target.index < 0 || target.index >= freqs.size()) throw DomainError("mode index out of range");
      return freqs(target.index);
  }
  return 0.0;
}

ResonanceResult resonance_finder(const ModelParams& params, const TargetMode& target, SweepVariable variable,
                                 const std::vector<double>& grid, const SolverOptions& options, double rel_tol) {
  std::vector<EquilibriumState> branch;
  if (variable == SweepVariable::Eta) {
    branch = continuation_sweep(params, grid, options).states;
  } else {
    branch = detuning_sweep(params, grid, options).states;
  }

  auto detuning_mismatch = [&](const EquilibriumState& s) {
    const NormalModes nm = normal_modes(hessian(s.params, s), s.params.omega_r);
    return s.delta_eff + select_mode_frequency(nm.freqs, target);
  };

  ResonanceResult r;
  for (std::size_t i = 1; i < branch.size(); ++i) {
    const double f0 = detuning_mismatch(branch[i - 1]);
    const double f1 = detuning_mismatch(branch[i]);
    if ((f0 < 0) == (f1 < 0)) continue;

    Eigen::VectorXd seed = branch[i - 1].phases();
    auto at = [&](double v) {
      const ModelParams p = variable == SweepVariable::Eta ? params.with_eta(v) : params.with_delta_c(v);
      return solve_equilibrium(p, IonConfiguration(seed), options);
    };
    double lo = grid[i - 1], hi = grid[i];
    const bool rising = f0 < 0;
    while (std::abs(hi - lo) > rel_tol * std::max(std::abs(lo), std::abs(hi))) {
      const double mid = 0.5 * (lo + hi);
      const EquilibriumState s = at(mid);
      if ((detuning_mismatch(s) < 0) == rising) {
        lo = mid;
        seed = s.phases();
      } else {
        hi = mid;
      }
    }
    r.found = true;
    r.lo = lo;
    r.hi = hi;
    r.value = 0.5 * (lo + hi);
    return r;
  }
  return r;
}

}  // namespace optochain
