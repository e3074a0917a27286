#include "optochain/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "optochain/analytic_rates.hpp"
#include "optochain/errors.hpp"

namespace optochain {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<Column> kBranchColumns = {
    {"delta_c"},        {"eta"},          {"delta_eff"},       {"photon_number"},
    {"potential"},      {"phase", false}, {"converged"},       {"residual"},
    {"min_hessian_eigenvalue"}, {"retries"}, {"lowest_mode_freq"}, {"mean_n"},
    {"n_coupled_modes"}, {"photon_fluctuations"}, {"branch_jump"}, {"status", false}};

const std::vector<Column> kPositionColumns = {{"delta_c"}, {"eta"}, {"j"}, {"theta"}, {"x_m"}};
const std::vector<Column> kModeFreqColumns = {{"delta_c"}, {"eta"}, {"alpha"}, {"omega_alpha"}, {"chi_abs"},
                                              {"k_sigma"}};
const std::vector<Column> kTransitionColumns = {{"delta_c"}, {"eta_critical"}, {"lowest_mode_freq_at_transition"},
                                                {"found"}};
const std::vector<Column> kShapeColumns = {{"alpha"}, {"j"}, {"M_jalpha"}, {"omega_alpha"}};
const std::vector<Column> kSpectrumColumns = {{"delta_c"}, {"eta"}, {"nu"}, {"S_nu"}};
const std::vector<Column> kSteadyColumns = {{"delta_c"}, {"eta"},     {"alpha"},     {"omega_alpha"},
                                            {"chi_abs"}, {"n_steady"}, {"gamma_rate"}};
const std::vector<Column> kSnapshotColumns = {{"snapshot"}, {"delta_c"}, {"eta"}, {"phase", false},
                                              {"mean_n"}, {"photon_fluctuations"}, {"status", false}};
const std::vector<Column> kKinkColumns = {
    {"delta_c"},      {"eta"},          {"delta_eff"},      {"omega_kink"},    {"chi_kink_abs"},
    {"n_kink"},       {"mean_n"},       {"photon_fluctuations"}, {"log_negativity_kink"},
    {"log_negativity_all"}, {"phase", false}, {"kink_center"}, {"kink_asymmetry"}, {"spacing_irregularity"},
    {"branch_jump"},  {"status", false}};
const std::vector<Column> kResonanceColumns = {{"variable", false}, {"selector", false}, {"mode_index"},
                                               {"delta_c"},          {"eta"},               {"found"},
                                               {"value"},            {"lo"},                {"hi"}};

SolverOptions solver_options(const ScenarioConfig& c) {
  SolverOptions o;
  o.seed = c.seed;
  return o;
}

DriftOptions drift_options(const ScenarioConfig& c) {
  DriftOptions o;
  o.phonon_noise = c.phonon_noise;
  o.chi_threshold = c.chi_threshold;
  return o;
}

std::vector<double> grid_below(const std::vector<double>& axis, double target) {
  std::vector<double> grid;
  for (double v : axis) {
    if (v < target) grid.push_back(v);
  }
  grid.push_back(target);
  return grid;
}

EquilibriumState reach_eta(const ModelParams& p, const std::vector<double>& axis, double eta, const SolverOptions& o) {
  return continuation_sweep(p, grid_below(axis, eta), o).states.back();
}

const char* selector_label(ModeSelector s) {
  switch (s) {
    case ModeSelector::Lowest:
      return "lowest";
    case ModeSelector::Highest:
      return "highest";
    case ModeSelector::BandCenter:
      return "band_center";
    case ModeSelector::Index:
      return "index";
  }
  return "";
}

double lowest_freq(const PointAnalysis& a) { return a.has_modes ? a.modes.freqs.minCoeff() : kNaN; }

Eigen::Index slot_of(const DriftSystem& d, Eigen::Index alpha) {
  for (std::size_t s = 0; s < d.mode_index.size(); ++s) {
    if (d.mode_index[s] == alpha) return static_cast<Eigen::Index>(s);
  }
  return -1;
}

std::string dump_matrix(const Eigen::MatrixXd& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) s += ' ';
      s += fmt(m(i, j));
    }
    s += '\n';
  }
  return s;
}

void branch_row(TaskResult& r, const EquilibriumState& s, const PointAnalysis& a, bool jump) {
  r.table("equilibrium_branch", kBranchColumns)
      .append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(s.delta_eff), fmt(s.photon_number()),
               fmt(s.potential), to_string(s.phase), fmt(int(s.converged)), fmt(s.residual),
               fmt(s.min_hessian_eigenvalue), fmt(s.retries), fmt(lowest_freq(a)),
               fmt(a.has_steady_state ? a.mean_n : kNaN), fmt(a.coupled_modes),
               fmt(a.has_steady_state ? a.photon_fluctuations : kNaN), fmt(int(jump)), to_string(a.status)});
}

void position_rows(TaskResult& r, const EquilibriumState& s, double k) {
  auto& t = r.table("positions", kPositionColumns);
  const auto& th = s.phases();
  for (Eigen::Index j = 0; j < th.size(); ++j) {
    t.append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(j), fmt(th(j)), fmt(th(j) / k)});
  }
}

void mode_rows(TaskResult& r, const EquilibriumState& s, const PointAnalysis& a) {
  if (!a.has_modes) return;
  auto& t = r.table("mode_frequencies", kModeFreqColumns);
  for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
    t.append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(al), fmt(a.modes.freqs(al)),
              fmt(std::abs(a.modes.couplings(al))), fmt(a.modes.widths(al))});
  }
}

void steady_rows(TaskResult& r, const std::string& name, const EquilibriumState& s, const PointAnalysis& a) {
  if (!a.has_steady_state) return;
  auto& t = r.table(name, kSteadyColumns);
  for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
    t.append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(al), fmt(a.modes.freqs(al)),
              fmt(std::abs(a.modes.couplings(al))), fmt(a.occupation(al)), fmt(a.gamma(al))});
  }
}

void spectrum_rows(TaskResult& r, const std::string& name, const EquilibriumState& s, const PointAnalysis& a,
                   const Axis& nu) {
  auto& t = r.table(name, kSpectrumColumns);
  if (!a.has_steady_state) return;
  const std::vector<double> grid = nu.values();
  const Eigen::VectorXd values = output_spectrum(a.drift, Eigen::Map<const Eigen::VectorXd>(grid.data(), grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    t.append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(grid[i]), fmt(values(Eigen::Index(i)))});
  }
}

void shape_rows(TaskResult& r, const std::string& name, const PointAnalysis& a) {
  auto& t = r.table(name, kShapeColumns);
  if (!a.has_modes) return;
  for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
    for (Eigen::Index j = 0; j < a.modes.mode_matrix.rows(); ++j) {
      t.append({fmt(al), fmt(j), fmt(a.modes.mode_matrix(j, al)), fmt(a.modes.freqs(al))});
    }
  }
}

void snapshot_row(TaskResult& r, int k, const EquilibriumState& s, const PointAnalysis& a) {
  r.table("snapshots", kSnapshotColumns)
      .append({fmt(k), fmt(s.params.delta_c), fmt(s.params.eta), to_string(s.phase),
               fmt(a.has_steady_state ? a.mean_n : kNaN), fmt(a.has_steady_state ? a.photon_fluctuations : kNaN),
               to_string(a.status)});
}

void transition_row(TaskResult& r, double delta_c, const ContinuationResult& c) {
  r.table("transition", kTransitionColumns)
      .append({fmt(delta_c), fmt(c.transition ? c.transition->eta_critical : kNaN),
               fmt(c.transition ? c.transition->lowest_mode_freq_at_transition : kNaN), fmt(int(bool(c.transition)))});
}

void kink_row(TaskResult& r, const std::string& name, const EquilibriumState& s, const PointAnalysis& a, bool jump) {
  double omega = kNaN, chi = kNaN, nk = kNaN, en_kink = kNaN, en_all = kNaN;
  if (a.has_modes) {
    omega = a.modes.freqs(0);
    chi = std::abs(a.modes.couplings(0));
  }
  if (a.has_steady_state) {
    nk = a.occupation(0);
    const Eigen::Index slot = slot_of(a.drift, 0);
    if (slot >= 0) en_kink = log_negativity_cavity_mode(a.steady.covariance, slot);
    en_all = log_negativity_cavity_all(a.steady.covariance);
  }
  const bool has_kink = s.kink.has_value();
  r.table(name, kKinkColumns)
      .append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(s.delta_eff), fmt(omega), fmt(chi), fmt(nk),
               fmt(a.has_steady_state ? a.mean_n : kNaN), fmt(a.has_steady_state ? a.photon_fluctuations : kNaN),
               fmt(en_kink), fmt(en_all), to_string(s.phase), has_kink ? fmt(long(s.kink->center_index)) : "nan",
               fmt(has_kink ? s.kink->asymmetry : kNaN), fmt(has_kink ? s.kink->spacing_irregularity : kNaN),
               fmt(int(jump)), to_string(a.status)});
}

void resonance_row(TaskResult& r, const char* variable, const TargetMode& target, const ModelParams& p,
                   const ResonanceResult& res) {
  r.table("resonance", kResonanceColumns)
      .append({variable, selector_label(target.selector), fmt(long(target.index)), fmt(p.delta_c), fmt(p.eta),
               fmt(int(res.found)), fmt(res.found ? res.value : kNaN), fmt(res.found ? res.lo : kNaN),
               fmt(res.found ? res.hi : kNaN)});
}

PointAnalysis analyze_guarded(const EquilibriumState& s, const DriftOptions& o, bool jump, TaskResult& r) {
  PointAnalysis a = analyze_point(s, o, jump);
  r.statuses.push_back(a.status);
  if (!a.message.empty()) {
    std::ostringstream note;
    note << "delta_c=" << fmt(s.params.delta_c) << " eta=" << fmt(s.params.eta) << ": " << a.message;
    r.notes.push_back(note.str());
  }
  return a;
}

// --- scenario task builders ---

struct Context {
  ScenarioConfig config;
  ModelParams params;
  double k = 1.0;
  SolverOptions solver;
  DriftOptions drift;
  std::vector<double> eta_axis;
};

TaskResult eta_branch_task(const Context& c, const ModelParams& p, bool resonance_tables) {
  TaskResult r;
  const ContinuationResult branch = continuation_sweep(p, c.eta_axis, c.solver);
  for (std::size_t i = 0; i < branch.states.size(); ++i) {
    const auto& s = branch.states[i];
    const PointAnalysis a = analyze_guarded(s, c.drift, branch.branch_jump[i], r);
    branch_row(r, s, a, branch.branch_jump[i]);
    position_rows(r, s, c.k);
    mode_rows(r, s, a);
    if (!resonance_tables) continue;
    steady_rows(r, "steady_state", s, a);
    if (!a.has_steady_state) continue;
    const auto& g = a.generalized;
    const auto owner = assign_generalized_modes(g);
    auto& gm = r.table("generalized_modes", {{"delta_c"}, {"eta"}, {"k"}, {"rate"}, {"freq"}, {"photon_weight"},
                                             {"assigned_alpha"}, {"photon_dominant"}});
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      long assigned = -2;
      for (std::size_t b = 0; b < owner.size(); ++b) {
        if (owner[b] == k) assigned = b == 0 ? -1 : long(a.drift.mode_index[b - 1]);
      }
      gm.append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(k), fmt(g.rates(k)), fmt(g.freqs(k)),
                 fmt(g.photon_weight(k)), fmt(assigned), fmt(int(g.photon_dominant(k)))});
    }
    auto& ov = r.table("analytic_overlay", {{"delta_c"}, {"eta"}, {"alpha"}, {"omega_alpha"}, {"chi_abs"},
                                            {"delta_eff"}, {"a_plus"}, {"a_minus"}, {"w_cool"}, {"n_analytic"},
                                            {"rate_status", false}, {"perturbative"}});
    for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
      const double chi = std::abs(a.modes.couplings(al));
      const SidebandRates sr = sideband_rates(chi, a.modes.freqs(al), s.delta_eff);
      ov.append({fmt(s.params.delta_c), fmt(s.params.eta), fmt(al), fmt(a.modes.freqs(al)), fmt(chi),
                 fmt(s.delta_eff), fmt(sr.a_plus), fmt(sr.a_minus), fmt(sr.w_cool), fmt(sr.n_analytic),
                 to_string(sr.status), fmt(int(sr.valid))});
    }
    auto& en = r.table("entanglement", {{"delta_c"}, {"eta"}, {"target", false}, {"log_negativity"}});
    en.append({fmt(s.params.delta_c), fmt(s.params.eta), "all", fmt(log_negativity_cavity_all(a.steady.covariance))});
    for (std::size_t slot = 0; slot < a.drift.mode_index.size(); ++slot) {
      en.append({fmt(s.params.delta_c), fmt(s.params.eta), std::to_string(a.drift.mode_index[slot]),
                 fmt(log_negativity_cavity_mode(a.steady.covariance, Eigen::Index(slot)))});
    }
  }
  transition_row(r, p.delta_c, branch);
  return r;
}

TaskResult eta_snapshot_task(const Context& c, int k, double eta, bool shapes) {
  TaskResult r;
  const EquilibriumState s = reach_eta(c.params, c.eta_axis, eta, c.solver);
  const PointAnalysis a = analyze_guarded(s, c.drift, false, r);
  snapshot_row(r, k, s, a);
  steady_rows(r, "steady_state_s" + std::to_string(k), s, a);
  if (shapes) shape_rows(r, "mode_shapes_s" + std::to_string(k), a);
  spectrum_rows(r, "spectrum_s" + std::to_string(k), s, a, c.config.nu);
  if (c.config.covariance_dump && a.has_steady_state) {
    r.files.push_back({"covariance_s" + std::to_string(k) + ".txt", dump_matrix(a.steady.covariance)});
  }
  return r;
}

TaskResult cooling_row_task(const Context& c, double delta_c) {
  TaskResult r;
  const ModelParams p = c.params.with_delta_c(delta_c);
  const ContinuationResult branch = continuation_sweep(p, c.eta_axis, c.solver);
  const double eta_crit = branch.transition ? branch.transition->eta_critical : kNaN;
  auto& t = r.table("cooling_map", {{"delta_c"}, {"eta"}, {"mean_n"}, {"n_coupled_modes"}, {"phase", false},
                                    {"eta_critical_row"}, {"status", false}});
  for (std::size_t i = 0; i < branch.states.size(); ++i) {
    const auto& s = branch.states[i];
    const PointAnalysis a = analyze_guarded(s, c.drift, branch.branch_jump[i], r);
    t.append({fmt(delta_c), fmt(s.params.eta), fmt(a.has_steady_state ? a.mean_n : kNaN), fmt(a.coupled_modes),
              to_string(s.phase), fmt(eta_crit), to_string(a.status)});
  }
  r.table("transition_curve", kTransitionColumns)
      .append({fmt(delta_c), fmt(eta_crit),
               fmt(branch.transition ? branch.transition->lowest_mode_freq_at_transition : kNaN),
               fmt(int(bool(branch.transition)))});
  return r;
}

TaskResult resonance_task(const Context& c, SweepVariable variable) {
  TaskResult r;
  const TargetMode& target = c.config.target;
  ResonanceResult res;
  try {
    if (variable == SweepVariable::Eta) {
      res = resonance_finder(c.params, target, variable, c.eta_axis, c.solver);
    } else {
      std::vector<double> grid = c.config.delta_c->values();
      std::reverse(grid.begin(), grid.end());
      res = resonance_finder(c.params, target, variable, grid, c.solver);
    }
  } catch (const std::exception& e) {
    r.notes.push_back(std::string("resonance search failed: ") + e.what());
  }
  resonance_row(r, variable == SweepVariable::Eta ? "eta" : "delta_c", target, c.params, res);
  return r;
}

ModelParams depth_matched(const ModelParams& p, double target_depth, const std::vector<double>& axis,
                          const SolverOptions& o) {
  // eta^2 / (1 + Delta_eff^2) = depth, iterated on the equilibrium Delta_eff
  EquilibriumState s = reach_eta(p, axis, p.eta, o);
  ModelParams q = p;
  for (int it = 0; it < 60; ++it) {
    const double eta = std::sqrt(target_depth * (1.0 + s.delta_eff * s.delta_eff));
    const bool done = std::abs(eta - q.eta) <= 1e-12 * eta;
    q = q.with_eta(eta);
    s = solve_equilibrium(q, s.config, o);
    if (done) break;
  }
  return q;
}

TaskResult scaling_task(const Context& c, int n) {
  TaskResult r;
  ModelParams p = nondimensionalize(scaled_physical(c.config, n));
  if (c.config.scaling.hold == ScalingHold::Depth) {
    const ModelParams ref = nondimensionalize(scaled_physical(c.config, c.config.scaling.reference_n));
    const EquilibriumState s = reach_eta(ref, c.eta_axis, ref.eta, c.solver);
    p = depth_matched(p, s.photon_number(), c.eta_axis, c.solver);
  }
  const EquilibriumState s = reach_eta(p, c.eta_axis, p.eta, c.solver);
  const PointAnalysis a = analyze_guarded(s, c.drift, false, r);

  double median = kNaN, mean_rate = kNaN, max_rate = kNaN;
  if (a.has_steady_state) {
    std::vector<double> ns, rates;
    for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
      if (std::abs(a.modes.couplings(al)) <= c.config.chi_threshold) continue;
      ns.push_back(a.occupation(al));
      rates.push_back(a.gamma(al));
    }
    if (!ns.empty()) {
      std::sort(ns.begin(), ns.end());
      const std::size_t m = ns.size();
      median = m % 2 ? ns[m / 2] : 0.5 * (ns[m / 2 - 1] + ns[m / 2]);
      double sum = 0;
      for (double g : rates) sum += g;
      mean_rate = sum / double(rates.size());
      max_rate = *std::max_element(rates.begin(), rates.end());
    }
  }
  r.table("scaling", {{"n_ions"}, {"trap_freq_kappa"}, {"eta"}, {"delta_c"}, {"delta_eff"}, {"phase", false},
                      {"mean_n"}, {"median_n"}, {"mean_rate"}, {"max_rate"}, {"n_coupled_modes"}, {"status", false}})
      .append({fmt(n), fmt(p.omega_t), fmt(p.eta), fmt(p.delta_c), fmt(s.delta_eff), to_string(s.phase),
               fmt(a.has_steady_state ? a.mean_n : kNaN), fmt(median), fmt(mean_rate), fmt(max_rate),
               fmt(a.coupled_modes), to_string(a.status)});
  if (a.has_steady_state) {
    auto& t = r.table("scaling_modes", {{"n_ions"}, {"alpha"}, {"omega_alpha"}, {"chi_abs"}, {"n_steady"},
                                        {"gamma_rate"}});
    for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
      t.append({fmt(n), fmt(al), fmt(a.modes.freqs(al)), fmt(std::abs(a.modes.couplings(al))),
                fmt(a.occupation(al)), fmt(a.gamma(al))});
    }
  }
  return r;
}

TaskResult kink_branch_task(const Context& c) {
  TaskResult r;
  const ContinuationResult branch = continuation_sweep(c.params, c.eta_axis, c.solver);
  for (std::size_t i = 0; i < branch.states.size(); ++i) {
    const auto& s = branch.states[i];
    const PointAnalysis a = analyze_guarded(s, c.drift, branch.branch_jump[i], r);
    kink_row(r, "kink_branch", s, a, branch.branch_jump[i]);
  }
  transition_row(r, c.params.delta_c, branch);
  return r;
}

TaskResult kink_scan_task(const Context& c) {
  TaskResult r;
  std::vector<double> grid = c.config.delta_c->values();
  // start on the less negative (pinned) side
  std::reverse(grid.begin(), grid.end());
  const DetuningBranch scan = detuning_sweep(c.params, grid, c.solver);
  for (std::size_t i = 0; i < scan.states.size(); ++i) {
    const auto& s = scan.states[i];
    const PointAnalysis a = analyze_guarded(s, c.drift, scan.branch_jump[i], r);
    kink_row(r, "kink_scan", s, a, scan.branch_jump[i]);
  }
  return r;
}

TaskResult kink_snapshot_task(const Context& c, int k, double delta_c) {
  TaskResult r;
  const ModelParams p = c.params.with_delta_c(delta_c);
  const EquilibriumState s = reach_eta(p, c.eta_axis, p.eta, c.solver);
  const PointAnalysis a = analyze_guarded(s, c.drift, false, r);
  snapshot_row(r, k, s, a);
  steady_rows(r, "steady_state_s" + std::to_string(k), s, a);
  shape_rows(r, "mode_shapes_s" + std::to_string(k), a);
  spectrum_rows(r, "spectrum", s, a, c.config.nu);
  if (c.config.covariance_dump && a.has_steady_state) {
    r.files.push_back({"covariance_s" + std::to_string(k) + ".txt", dump_matrix(a.steady.covariance)});
  }
  return r;
}

TaskResult guarded(const std::function<TaskResult()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    TaskResult r;
    r.statuses.push_back(PointStatus::Failed);
    r.notes.push_back(std::string("task failed: ") + e.what());
    return r;
  }
}

}  // namespace

std::vector<Eigen::Index> assign_generalized_modes(const GeneralizedModes& g) {
  const Eigen::Index pairs = g.character.rows(), blocks = g.character.cols();
  std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> weights;
  for (Eigen::Index k = 0; k < pairs; ++k) {
    for (Eigen::Index b = 0; b < blocks; ++b) weights.emplace_back(g.character(k, b), k, b);
  }
  std::stable_sort(weights.begin(), weights.end(),
                   [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });
  std::vector<Eigen::Index> owner(blocks, -1);
  std::vector<bool> used(pairs, false);
  for (const auto& [w, k, b] : weights) {
    if (owner[b] >= 0 || used[k]) continue;
    owner[b] = k;
    used[k] = true;
  }
  return owner;
}

PointAnalysis analyze_point(const EquilibriumState& state, const DriftOptions& options, bool branch_jump) {
  PointAnalysis a;
  if (!state.converged) {
    a.message = "equilibrium did not converge (residual " + fmt(state.residual) + ")";
    return a;
  }
  const ModelParams& p = state.params;
  try {
    a.modes = decompose(p, state);
    a.has_modes = true;
    for (Eigen::Index al = 0; al < a.modes.size(); ++al) {
      if (std::abs(a.modes.couplings(al)) > options.chi_threshold) ++a.coupled_modes;
    }
    a.drift = build_drift_system(p, state, a.modes, options);
    a.generalized = eigen_rates(a.drift);
    a.steady = steady_state(a.drift, a.generalized);
    a.has_steady_state = true;
  } catch (const InstabilityError& e) {
    a.status = PointStatus::Unstable;
    a.message = e.what();
    return a;
  } catch (const PhysicalityError& e) {
    a.status = PointStatus::Unstable;
    a.message = e.what();
    return a;
  } catch (const std::exception& e) {
    a.status = PointStatus::Failed;
    a.message = e.what();
    return a;
  }

  const Eigen::Index n = a.modes.size();
  a.occupation = occupations_by_mode(a.drift, a.steady.occupations, n);
  a.photon_fluctuations = a.steady.occupations.photon;
  a.gamma = Eigen::VectorXd::Constant(n, kNaN);
  const auto owner = assign_generalized_modes(a.generalized);
  for (std::size_t b = 1; b < owner.size(); ++b) {
    if (owner[b] >= 0) a.gamma(a.drift.mode_index[b - 1]) = a.generalized.rates(owner[b]);
  }
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index al = 0; al < n; ++al) {
    if (std::abs(a.modes.couplings(al)) <= options.chi_threshold || std::isnan(a.occupation(al))) continue;
    sum += a.occupation(al);
    ++count;
  }
  a.mean_n = count ? sum / count : kNaN;
  if (!a.steady.fallback_reason.empty()) a.message = "lyapunov fallback: " + a.steady.fallback_reason;

  if (branch_jump) {
    a.status = PointStatus::BranchJump;
  } else if (!a.drift.excluded.empty()) {
    a.status = PointStatus::DecoupledExcluded;
  } else {
    a.status = PointStatus::Ok;
  }
  return a;
}

double scaled_trap_frequency(double omega_ref, int n_ref, int n) {
  if (n < 2 || n_ref < 2) throw DomainError("scaling needs at least two ions");
  return omega_ref * std::sqrt(std::log(double(n)) / std::log(double(n_ref))) * double(n_ref) / double(n);
}

PhysicalConfig scaled_physical(const ScenarioConfig& config, int n) {
  PhysicalConfig p = config.physical;
  p.trap_freq = scaled_trap_frequency(config.physical.trap_freq, config.scaling.reference_n, n);
  p.n_ions = n;
  return p;
}

std::vector<ScenarioTask> plan_tasks(const ScenarioConfig& config) {
  validate(config);
  auto c = std::make_shared<Context>();
  c->config = config;
  c->params = nondimensionalize(config.physical);
  c->k = config.physical.wavenumber();
  c->solver = solver_options(config);
  c->drift = drift_options(config);
  c->eta_axis = config.eta.values();

  std::vector<ScenarioTask> tasks;
  auto add = [&](std::string label, std::function<TaskResult()> f) {
    tasks.push_back({std::move(label), [f = std::move(f)] { return guarded(f); }});
  };
  const auto& snaps = config.snapshots;
  switch (config.scenario) {
    case ScenarioKind::EquilibriumBranch:
      add("eta branch", [c] { return eta_branch_task(*c, c->params, false); });
      for (std::size_t k = 0; k < snaps.size(); ++k) {
        add("snapshot eta=" + fmt(snaps[k]), [c, k, eta = snaps[k]] { return eta_snapshot_task(*c, int(k), eta, true); });
      }
      break;
    case ScenarioKind::CoolingMap:
      for (double dc : config.delta_c->values()) {
        add("row delta_c=" + fmt(dc), [c, dc] { return cooling_row_task(*c, dc); });
      }
      break;
    case ScenarioKind::ResonanceAnalysis:
      add("eta branch", [c] { return eta_branch_task(*c, c->params, true); });
      add("resonance", [c] { return resonance_task(*c, c->config.resonance_variable); });
      for (std::size_t k = 0; k < snaps.size(); ++k) {
        add("snapshot eta=" + fmt(snaps[k]), [c, k, eta = snaps[k]] { return eta_snapshot_task(*c, int(k), eta, true); });
      }
      break;
    case ScenarioKind::ScalingStudy:
      for (int n : config.scaling.sizes) {
        add("chain N=" + std::to_string(n), [c, n] { return scaling_task(*c, n); });
      }
      break;
    case ScenarioKind::KinkSpectroscopy:
      add("eta branch", [c] { return kink_branch_task(*c); });
      add("delta_c scan", [c] { return kink_scan_task(*c); });
      add("resonance eta", [c] { return resonance_task(*c, SweepVariable::Eta); });
      add("resonance delta_c", [c] { return resonance_task(*c, SweepVariable::DeltaC); });
      for (std::size_t k = 0; k < snaps.size(); ++k) {
        add("snapshot delta_c=" + fmt(snaps[k]), [c, k, dc = snaps[k]] { return kink_snapshot_task(*c, int(k), dc); });
      }
      break;
  }
  return tasks;
}

SweepDataset run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  const std::vector<ScenarioTask> tasks = plan_tasks(config);
  std::vector<TaskResult> results(tasks.size());
  std::vector<bool> cached(tasks.size(), false);
  std::mutex log_mutex;
  auto log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    options.log(line);
  };

  std::filesystem::path cache;
  if (options.cache_dir) {
    cache = *options.cache_dir / (config_hash(config) + "-" + code_version());
    std::filesystem::create_directories(cache);
  }
  auto cache_file = [&](std::size_t i) { return cache / ("task_" + std::to_string(i) + ".json"); };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      if (!cache.empty() && std::filesystem::exists(cache_file(i))) {
        try {
          std::ifstream in(cache_file(i), std::ios::binary);
          std::stringstream ss;
          ss << in.rdbuf();
          results[i] = deserialize(ss.str());
          cached[i] = true;
          log("task " + std::to_string(i) + " (" + tasks[i].label + "): cached");
          continue;
        } catch (const std::exception&) {
          // unreadable cache entry, recompute
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      results[i] = tasks[i].run();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log("task " + std::to_string(i) + " (" + tasks[i].label + "): " + std::to_string(results[i].statuses.size()) +
          " points in " + std::to_string(secs) + " s");
      if (!cache.empty()) {
        const auto tmp = cache_file(i).string() + ".tmp";
        {
          std::ofstream out(tmp, std::ios::binary);
          out << serialize(results[i]);
        }
        std::error_code ec;
        std::filesystem::rename(tmp, cache_file(i), ec);
      }
    }
  };

  const int workers = std::max(1, std::min<int>(options.workers, int(tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SweepDataset ds = assemble(config, results);
  ds.cached_tasks = int(std::count(cached.begin(), cached.end(), true));
  return ds;
}

}  // namespace optochain
