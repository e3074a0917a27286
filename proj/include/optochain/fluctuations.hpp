#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "optochain/modes.hpp"

namespace optochain {

/// Damping Gamma-bar and thermal occupation N-bar of one bath.
struct NoiseChannel {
  double damping = 0.0;
  double thermal = 0.0;
};

/// Linear fluctuation dynamics dX/dt = M X + noise, X = (Q_a, P_a, Q_1, P_1, ...).
/// Quadratures are normalized so that vacuum has <2 Q^2> = 1.
struct DriftSystem {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd diffusion;  // D with M S + S M^T + 2 D = 0
  std::vector<NoiseChannel> noise;       // [0] is the cavity
  std::vector<Eigen::Index> mode_index;  // drift slot -> normal mode alpha
  std::vector<Eigen::Index> excluded;    // modes left out as decoupled
  double delta_eff = 0.0;
  std::complex<double> amplitude{1.0, 0.0};

  Eigen::Index size() const { return matrix.rows(); }
  Eigen::Index phonons() const { return matrix.rows() / 2 - 1; }
};

struct DriftOptions {
  NoiseChannel phonon_noise{};
  // Undamped modes with |chi| at or below the threshold never reach a steady
  // state; they are dropped from the system and listed in `excluded`.
  bool exclude_decoupled = true;
  double chi_threshold = 1e-8;
  // Modes whose sideband cooling rate is below this are not resolvable in
  // double precision (the Lyapunov operator is numerically singular) and
  // are excluded the same way.
  double rate_floor = 1e-11;
};

DriftSystem build_drift_system(double delta_eff, const Eigen::VectorXd& freqs, const Eigen::VectorXcd& chi,
                               const std::vector<NoiseChannel>& phonon_noise = {});

DriftSystem build_drift_system(const ModelParams& params, const EquilibriumState& state,
                               const ModeDecomposition& modes, const DriftOptions& options = {});

struct GeneralizedModes {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd eigenvectors;  // B
  // one entry per conjugate pair, ascending in frequency
  std::vector<std::array<Eigen::Index, 2>> pairs;
  Eigen::VectorXd rates;  // -(lambda_a + lambda_b)
  Eigen::VectorXd freqs;  // |Im lambda|
  // weight of each pair on the cavity block (column 0) and each phonon slot
  Eigen::MatrixXd character;

  Eigen::Index size() const { return rates.size(); }
  double photon_weight(Eigen::Index k) const { return character(k, 0); }
  bool photon_dominant(Eigen::Index k) const;
  Eigen::Index most_photonic() const;
  double rate_sum() const { return rates.sum(); }
};

/// Throws InstabilityError when any Re(lambda) >= tolerance.
GeneralizedModes eigen_rates(const DriftSystem& system, double tolerance = 1e-12);

/// Solves A X + X A^T = Q (Bartels-Stewart on the complex Schur form).
Eigen::MatrixXd solve_continuous_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q);

Eigen::MatrixXd steady_covariance_eigenbasis(const DriftSystem& system, const GeneralizedModes& modes,
                                             double denominator_tolerance = 1e-10);

Eigen::MatrixXd steady_covariance_lyapunov(const DriftSystem& system);

enum class CovarianceRoute { Eigenbasis, Lyapunov };

const char* to_string(CovarianceRoute route);

struct Occupations {
  Eigen::VectorXd phonons;  // per drift slot
  double photon = 0.0;
};

struct SteadyState {
  Eigen::MatrixXd covariance;
  Occupations occupations;
  CovarianceRoute route = CovarianceRoute::Eigenbasis;
  std::string fallback_reason;
};

/// Eigenbasis covariance, falling back to the Lyapunov route when the
/// eigenbasis is ill-conditioned. Occupations and physicality are checked.
SteadyState steady_state(const DriftSystem& system, const GeneralizedModes& modes);

/// Symplectic form, blocks [[0, 1], [-1, 0]].
Eigen::MatrixXd symplectic_form(Eigen::Index n_blocks);

/// Smallest eigenvalue of the Hermitian matrix S + i Omega.
double physicality_margin(const Eigen::MatrixXd& sigma);

void check_physical(const Eigen::MatrixXd& sigma, double tolerance = 1e-8);

/// n = (<2Q^2>/2 + <2P^2>/2 - 1)/2 per block. Values in [-tol, 0) clamp to
/// zero; anything lower throws PhysicalityError.
Occupations mode_occupations(const Eigen::MatrixXd& sigma, double tolerance = 1e-8);

/// Per normal mode; NaN for modes excluded from the drift system.
Eigen::VectorXd occupations_by_mode(const DriftSystem& system, const Occupations& occ, Eigen::Index n_modes);

/// Symplectic eigenvalues of the covariance (vacuum gives 1/2).
Eigen::VectorXd symplectic_eigenvalues(const Eigen::MatrixXd& sigma);

/// E_N between the cavity and the listed drift slots after transposing the
/// cavity (P_a -> -P_a).
double log_negativity(const Eigen::MatrixXd& sigma, const std::vector<Eigen::Index>& slots);
double log_negativity_cavity_mode(const Eigen::MatrixXd& sigma, Eigen::Index slot);
double log_negativity_cavity_all(const Eigen::MatrixXd& sigma);

/// (-i nu - M)^{-1}
Eigen::MatrixXcd transfer_matrix(const DriftSystem& system, double nu);

/// Normally ordered <da(nu)^dagger da(nu)> / |a|^2 driven by cavity vacuum.
double output_spectrum(const DriftSystem& system, double nu);
Eigen::VectorXd output_spectrum(const DriftSystem& system, const Eigen::VectorXd& nu_grid);

/// T (2D) T^dagger; integrates over d nu / 2 pi to the covariance.
Eigen::MatrixXcd quadrature_spectral_density(const DriftSystem& system, double nu);

/// Integral of the quadrature spectral density over [-limit, limit] / 2 pi
/// by adaptive Simpson, breaking the range at every generalized-mode peak.
Eigen::MatrixXd integrate_spectral_density(const DriftSystem& system, const GeneralizedModes& modes,
                                           double limit, double rel_tol = 1e-6);

struct LorentzianFit {
  double center = 0.0;
  double half_width = 0.0;
  double peak = 0.0;
};

/// Fits 1/S to a parabola over samples within the half-maximum region.
LorentzianFit fit_lorentzian(const Eigen::VectorXd& nu, const Eigen::VectorXd& s);

/// Samples S(nu) around `center` and fits the peak.
LorentzianFit fit_spectrum_peak(const DriftSystem& system, double center, double width_guess);

}  // namespace optochain
