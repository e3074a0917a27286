#include "optochain/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace optochain {

namespace {

using Eigen::VectorXd;

struct Minimized {
  VectorXd theta;
  double potential = 0.0;
  double residual = 0.0;
  bool converged = false;
  double min_eigenvalue = 0.0;
  VectorXd soft_direction;
};

VectorXd mirror_project(const VectorXd& v) { return 0.5 * (v - v.reverse()); }

bool mirror_applicable(const ModelParams& p, const SolverOptions& o) {
  return o.enforce_mirror_symmetry && p.lattice_offset == 0.0;
}

// Newton iteration with |lambda|-floored Hessian (a descent direction even
// where V_tot is not convex) and Armijo backtracking that never lets ions
// pass through each other.
Minimized minimize(const ModelParams& p, VectorXd theta, const SolverOptions& o) {
  const bool symmetric = mirror_applicable(p, o);
  if (symmetric) theta = mirror_project(theta);
  require_ordered(theta);

  Minimized out;
  double value = total_potential(p, theta);
  VectorXd g = total_gradient(p, theta);
  if (symmetric) g = mirror_project(g);
  double gnorm = g.lpNorm<Eigen::Infinity>();

  for (int it = 0; it < o.max_iterations && gnorm >= o.tolerance; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(total_hessian(p, theta));
    const VectorXd& w = es.eigenvalues();
    const double floor = std::max(1e-8 * w.cwiseAbs().maxCoeff(), 1e-14);
    VectorXd coeff = es.eigenvectors().transpose() * g;
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) /= std::max(std::abs(w(k)), floor);
    VectorXd dir = -(es.eigenvectors() * coeff);
    if (symmetric) dir = mirror_project(dir);
    const double slope = g.dot(dir);
    // below this predicted decrease V_tot differences are rounding noise
    const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(value) + 1.0);

    bool accepted = false;
    double t = 1.0;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      VectorXd trial = theta + t * dir;
      if (!is_strictly_ordered(trial)) continue;
      const double v_trial = total_potential(p, trial);
      bool ok = v_trial <= value + 1e-4 * t * slope;
      VectorXd g_trial;
      if (!ok && std::abs(t * slope) < resolution) {
        g_trial = total_gradient(p, trial);
        if (symmetric) g_trial = mirror_project(g_trial);
        ok = g_trial.lpNorm<Eigen::Infinity>() < gnorm;
      }
      if (!ok) continue;
      if (g_trial.size() == 0) {
        g_trial = total_gradient(p, trial);
        if (symmetric) g_trial = mirror_project(g_trial);
      }
      theta = std::move(trial);
      value = v_trial;
      g = std::move(g_trial);
      gnorm = g.lpNorm<Eigen::Infinity>();
      accepted = true;
      break;
    }
    if (!accepted) break;
  }

  const Eigen::MatrixXd h = total_hessian(p, theta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  // gradient noise from rounding theta to the nearest double
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() *
                       h.cwiseAbs().rowwise().sum().maxCoeff() *
                       std::max(theta.cwiseAbs().maxCoeff(), 1.0);
  out.theta = std::move(theta);
  out.potential = value;
  out.residual = gnorm;
  out.converged = gnorm < std::max(o.tolerance, floor);
  out.min_eigenvalue = es.eigenvalues()(0);
  out.soft_direction = es.eigenvectors().col(0);
  return out;
}

EquilibriumState make_state(const ModelParams& p, const Minimized& m, const SolverOptions& o,
                            int retries) {
  EquilibriumState s;
  s.params = p;
  s.config = IonConfiguration(m.theta);
  s.amplitude = cavity_amplitude(p, m.theta);
  s.delta_eff = effective_detuning(p, m.theta);
  s.potential = m.potential;
  s.converged = m.converged;
  s.residual = m.residual;
  s.min_hessian_eigenvalue = m.min_eigenvalue;
  s.retries = retries;
  classify_phase(s, o.asymmetry_threshold);
  return s;
}

VectorXd central_displacement(Eigen::Index n) {
  VectorXd u = VectorXd::Zero(n);
  if (n % 2 == 1) {
    u(n / 2) = 1.0;
  } else {
    u(n / 2 - 1) = 1.0;
    u(n / 2) = 1.0;
  }
  return u;
}

// Picks the lowest-V minimum among candidates; ties go to the earlier one.
std::optional<Minimized> best_minimum(const std::vector<Minimized>& candidates, double saddle_tol) {
  std::optional<Minimized> best;
  for (const auto& c : candidates) {
    if (!c.converged || c.min_eigenvalue < -saddle_tol) continue;
    const double tie = 1e-12 * (std::abs(c.potential) + 1.0);
    if (!best || c.potential < best->potential - tie) best = c;
  }
  return best;
}

}  // namespace

const char* to_string(Phase phase) { return phase == Phase::Pinned ? "pinned" : "sliding"; }

IonConfiguration bare_chain_equilibrium(const ModelParams& params, const SolverOptions& options) {
  validate(params);
  const Eigen::Index n = params.n_ions;
  if (n == 1) return IonConfiguration(VectorXd::Zero(1));

  // length unit: 2 a l^3 = C
  const double ell = std::cbrt(params.coulomb / (2.0 * params.trap_coefficient()));
  const double spacing =
      n == 2 ? ell : ell * std::cbrt(3.0 * std::log(static_cast<double>(n)) / double(n * n));
  VectorXd init(n);
  for (Eigen::Index j = 0; j < n; ++j) init(j) = (j - 0.5 * double(n - 1)) * spacing;

  SolverOptions o = options;
  o.enforce_mirror_symmetry = true;
  ModelParams bare = params.with_eta(0.0);
  bare.lattice_offset = 0.0;
  Minimized m = minimize(bare, init, o);
  if (!m.converged) throw ConvergenceError("bare chain did not converge", m.residual);
  return IonConfiguration(m.theta);
}

EquilibriumState solve_equilibrium(const ModelParams& params, const IonConfiguration& init,
                                   const SolverOptions& options) {
  validate(params);
  if (init.size() != params.n_ions) throw DomainError("initial configuration has wrong size");

  Minimized first = minimize(params, init.phases(), options);
  if (!first.converged) throw ConvergenceError("equilibrium did not converge", first.residual);
  if (mirror_applicable(params, options) || first.min_eigenvalue >= -options.saddle_tolerance) {
    return make_state(params, first, options, 0);
  }

  const double h = options.seed_displacement;
  const Eigen::Index n = params.n_ions;
  int retries = 0;
  auto attempt = [&](const VectorXd& start, std::vector<Minimized>& out) {
    ++retries;
    if (!is_strictly_ordered(start)) return;
    out.push_back(minimize(params, start, options));
  };

  std::vector<Minimized> tried;
  const VectorXd u = central_displacement(n);
  attempt(first.theta + h * u, tried);
  attempt(first.theta - h * u, tried);
  if (auto best = best_minimum(tried, options.saddle_tolerance)) {
    return make_state(params, *best, options, retries);
  }

  tried.clear();
  attempt(first.theta + h * first.soft_direction, tried);
  attempt(first.theta - h * first.soft_direction, tried);
  if (auto best = best_minimum(tried, options.saddle_tolerance)) {
    return make_state(params, *best, options, retries);
  }

  tried.clear();
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 10.0 * h);
  for (int k = 0; k < options.max_random_retries; ++k) {
    VectorXd kick(n);
    for (Eigen::Index j = 0; j < n; ++j) kick(j) = normal(rng);
    attempt(first.theta + kick, tried);
  }
  if (auto best = best_minimum(tried, options.saddle_tolerance)) {
    return make_state(params, *best, options, retries);
  }
  throw ConvergenceError("solver only reached saddle points", first.min_eigenvalue);
}

double mirror_asymmetry(const VectorXd& theta) {
  return 0.5 * (theta + theta.reverse()).cwiseAbs().maxCoeff();
}

Phase classify_phase(EquilibriumState& state, double threshold) {
  const VectorXd& th = state.phases();
  const Eigen::Index n = th.size();
  state.kink.reset();
  state.phase = mirror_asymmetry(th) > threshold ? Phase::Pinned : Phase::Sliding;
  if (state.phase == Phase::Sliding) return state.phase;

  const double mid = 0.5 * double(n - 1);
  KinkDescriptor k;
  // the defect sits where the mirror image is displaced the most
  const VectorXd shift = 0.5 * (th + th.reverse()).cwiseAbs();
  double worst = -1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool closer = std::abs(j - mid) < std::abs(k.center_index - mid);
    if (shift(j) > worst * (1.0 + 1e-9) || (shift(j) >= worst * (1.0 - 1e-9) && closer)) {
      worst = shift(j);
      k.center_index = j;
    }
  }
  k.asymmetry = n % 2 == 1 ? th(n / 2) : 0.5 * (th(n / 2 - 1) + th(n / 2));

  if (n >= 2) {
    const VectorXd d = th.tail(n - 1) - th.head(n - 1);
    const double reach = std::max(0.5, 0.25 * double(n - 1));
    std::vector<double> central;
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      if (std::abs(j + 0.5 - mid) <= reach) central.push_back(d(j));
    }
    double mean = 0.0;
    for (double x : central) mean += x;
    mean /= double(central.size());
    for (double x : central) k.spacing_irregularity = std::max(k.spacing_irregularity, std::abs(x - mean) / mean);
  }
  state.kink = k;
  return state.phase;
}

double symmetric_branch_stability(const ModelParams& params, double eta, VectorXd& seed,
                                  const SolverOptions& options) {
  SolverOptions o = options;
  o.enforce_mirror_symmetry = true;
  Minimized m = minimize(params.with_eta(eta), seed, o);
  if (!m.converged) throw ConvergenceError("symmetric branch did not converge", m.residual);
  seed = m.theta;
  return m.min_eigenvalue;
}

static EquilibriumState solve_or_flag(const ModelParams& p, const VectorXd& seed, const SolverOptions& options) {
  try {
    return solve_equilibrium(p, IonConfiguration(seed), options);
  } catch (const ConvergenceError& e) {
    Minimized m = minimize(p, seed, options);
    EquilibriumState s = make_state(p, m, options, 0);
    s.converged = false;
    s.residual = std::max(m.residual, e.residual());
    return s;
  }
}

std::vector<bool> detect_branch_jumps(const std::vector<double>& eta, const std::vector<double>& potential) {
  std::vector<bool> flags(potential.size(), false);
  for (std::size_t i = 2; i < potential.size(); ++i) {
    const double slope = (potential[i] - potential[i - 1]) / (eta[i] - eta[i - 1]);
    const double trend = (potential[i - 1] - potential[i - 2]) / (eta[i - 1] - eta[i - 2]);
    if (std::abs(slope) > 10.0 * std::abs(trend) && std::abs(slope) > 1e-12) flags[i] = true;
  }
  return flags;
}

std::vector<double> default_eta_grid(double lo, double hi, int count) {
  if (!(lo > 0) || !(hi > lo) || count < 2) throw DomainError("invalid eta grid");
  std::vector<double> grid(count);
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) grid[i] = lo * std::exp(step * i);
  grid.back() = hi;
  return grid;
}

ContinuationResult continuation_sweep(const ModelParams& params, const std::vector<double>& eta_grid,
                                      const SolverOptions& options) {
  validate(params);
  if (eta_grid.empty()) throw DomainError("empty eta grid");
  for (std::size_t i = 0; i + 1 < eta_grid.size(); ++i) {
    if (!(eta_grid[i] < eta_grid[i + 1])) throw DomainError("eta grid must be ascending");
  }
  if (eta_grid.front() < 0) throw DomainError("eta grid must be non-negative");

  ContinuationResult result;
  SolverOptions sym_opts = options;
  sym_opts.enforce_mirror_symmetry = true;

  const VectorXd bare = bare_chain_equilibrium(params, options).phases();
  bool tracking = params.lattice_offset == 0.0 && params.n_ions >= 2;
  VectorXd sym = bare;
  double sym_eta = 0.0;
  VectorXd current = bare;
  if (params.lattice_offset != 0.0) {
    current = solve_equilibrium(params.with_eta(0.0), IonConfiguration(bare), options).phases();
  }

  for (double eta : eta_grid) {
    const ModelParams p = params.with_eta(eta);
    std::optional<EquilibriumState> state;
    if (tracking) {
      VectorXd trial = sym;
      const double lam = symmetric_branch_stability(params, eta, trial, options);
      if (lam > 0) {
        sym = trial;
        sym_eta = eta;
        Minimized m = minimize(p, sym, sym_opts);
        state = make_state(p, m, options, 0);
      } else {
        double lo = sym_eta, hi = eta;
        VectorXd seed = sym;
        while (hi - lo > 1e-11 * hi) {
          const double mid = 0.5 * (lo + hi);
          VectorXd t = seed;
          if (symmetric_branch_stability(params, mid, t, options) > 0) {
            lo = mid;
            seed = t;
          } else {
            hi = mid;
          }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(frozen_field_hessian(params.with_eta(lo), seed),
                                                         Eigen::EigenvaluesOnly);
        TransitionPoint tp;
        tp.eta_critical = 0.5 * (lo + hi);
        tp.lowest_mode_freq_at_transition =
            std::sqrt(2.0 * params.omega_r * std::max(es.eigenvalues()(0), 0.0));
        result.transition = tp;
        tracking = false;
      }
    }
    if (!state) state = solve_or_flag(p, current, options);
    if (state->converged) current = state->phases();
    result.eta.push_back(eta);
    result.states.push_back(std::move(*state));
  }

  std::vector<double> v;
  for (const auto& s : result.states) v.push_back(s.potential);
  result.branch_jump = detect_branch_jumps(result.eta, v);
  return result;
}

DetuningBranch detuning_sweep(const ModelParams& params, const std::vector<double>& delta_c_grid,
                              const SolverOptions& options, int eta_steps) {
  validate(params);
  if (delta_c_grid.empty()) throw DomainError("empty detuning grid");
  const bool ascending = delta_c_grid.size() < 2 || delta_c_grid[1] > delta_c_grid[0];
  for (std::size_t i = 0; i + 1 < delta_c_grid.size(); ++i) {
    if ((delta_c_grid[i + 1] > delta_c_grid[i]) != ascending || delta_c_grid[i + 1] == delta_c_grid[i]) {
      throw DomainError("detuning grid must be strictly monotone");
    }
  }

  DetuningBranch out;
  const ModelParams start = params.with_delta_c(delta_c_grid.front());
  VectorXd current;
  if (params.eta > 0) {
    const double lo = std::min(1.0, params.eta);
    std::vector<double> etas =
        params.eta > lo ? default_eta_grid(lo, params.eta, eta_steps) : std::vector<double>{params.eta};
    ContinuationResult c = continuation_sweep(start, etas, options);
    current = c.states.back().phases();
  } else {
    current = bare_chain_equilibrium(params, options).phases();
  }

  for (double dc : delta_c_grid) {
    EquilibriumState s = solve_or_flag(params.with_delta_c(dc), current, options);
    if (s.converged) current = s.phases();
    out.delta_c.push_back(dc);
    out.states.push_back(std::move(s));
  }
  std::vector<double> v;
  for (const auto& s : out.states) v.push_back(s.potential);
  // the jump test wants an ascending abscissa
  std::vector<double> x = out.delta_c;
  if (!ascending) for (double& e : x) e = -e;
  out.branch_jump = detect_branch_jumps(x, v);
  return out;
}

}  // namespace optochain
