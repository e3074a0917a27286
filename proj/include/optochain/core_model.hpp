#pragma once

// Parameter model of an ion chain dispersively coupled to a driven, lossy
// cavity mode, and the mean-field primitives shared by the other modules.
//
// Internal units: frequencies in units of the cavity half-linewidth kappa,
// positions as optical phases theta = k x, energies in hbar*kappa.

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "optochain/errors.hpp"

namespace optochain {

namespace codata {
// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;             // J s
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double epsilon0 = 8.8541878128e-12;         // F/m
inline constexpr double atomic_mass = 1.66053906660e-27;     // kg
inline constexpr double pi = 3.14159265358979323846;
}  // namespace codata

/// Experimental inputs in SI units. Angular frequencies are in rad/s.
struct PhysicalConfig {
  double ion_mass = 0.0;  // atomic mass units
  int ion_charge = 1;     // multiples of e
  double wavelength = 0.0;
  double kappa = 0.0;
  double trap_freq = 0.0;
  double pump_strength = 0.0;
  double cavity_detuning = 0.0;  // omega_p - omega_c
  double atom_detuning = 0.0;    // omega_p - omega_d
  double vacuum_rabi = 0.0;
  int n_ions = 0;
  // Position of a field antinode relative to the trap center (m).
  double cavity_offset = 0.0;

  double wavenumber() const { return 2.0 * codata::pi / wavelength; }
  double mass_kg() const { return ion_mass * codata::atomic_mass; }
  /// U0 = g^2 / Delta_d, rad/s; sign follows the atomic detuning.
  double u0() const { return vacuum_rabi * vacuum_rabi / atom_detuning; }
  /// omega_R = hbar k^2 / (2 m), rad/s.
  double recoil_frequency() const {
    const double k = wavenumber();
    return codata::hbar * k * k / (2.0 * mass_kg());
  }
};

/// Throws DomainError when a PhysicalConfig invariant is violated.
void validate(const PhysicalConfig& config);

/// Dimensionless model parameters. All frequencies in units of kappa.
template <typename Scalar>
struct BasicModelParams {
  Scalar u0{0};
  Scalar eta{0};
  Scalar delta_c{0};
  Scalar omega_t{0};
  Scalar omega_r{0};
  // C = q^2 k / (4 pi eps0 hbar kappa)
  Scalar coulomb{0};
  Eigen::Index n_ions{0};
  // k * cavity_offset
  Scalar lattice_offset{0};

  /// Coefficient a of the trap energy a * sum(theta^2).
  Scalar trap_coefficient() const { return omega_t * omega_t / (Scalar(4) * omega_r); }
  /// Mass in phase units: kinetic energy is (m_eff / 2) theta_dot^2.
  Scalar effective_mass() const { return Scalar(1) / (Scalar(2) * omega_r); }

  BasicModelParams with_eta(Scalar value) const {
    BasicModelParams p = *this;
    p.eta = value;
    return p;
  }
  BasicModelParams with_delta_c(Scalar value) const {
    BasicModelParams p = *this;
    p.delta_c = value;
    return p;
  }

  template <typename Other>
  BasicModelParams<Other> cast() const {
    return {Other(u0),      Other(eta),     Other(delta_c), Other(omega_t),
            Other(omega_r), Other(coulomb), n_ions,         Other(lattice_offset)};
  }
};

using ModelParams = BasicModelParams<double>;

template <typename Scalar>
void validate(const BasicModelParams<Scalar>& p) {
  if (!(p.coulomb > 0)) throw DomainError("coulomb constant must be positive");
  if (!(p.omega_r > 0)) throw DomainError("recoil frequency must be positive");
  if (!(p.omega_t > 0)) throw DomainError("trap frequency must be positive");
  if (!(p.eta >= 0)) throw DomainError("pump strength must be non-negative");
  if (p.n_ions < 1) throw DomainError("need at least one ion");
}

/// The SI scales lost by nondimensionalization; enough to invert it.
struct UnitScale {
  double kappa = 0.0;
  double wavelength = 0.0;
  double atom_detuning = 0.0;
};

UnitScale unit_scale(const PhysicalConfig& config);
ModelParams nondimensionalize(const PhysicalConfig& config);
PhysicalConfig redimensionalize(const ModelParams& params, const UnitScale& scale);

/// Ion positions as optical phases, strictly increasing.
template <typename Scalar>
class BasicIonConfiguration {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicIonConfiguration() = default;
  explicit BasicIonConfiguration(Vector phases) : phases_(std::move(phases)) {
    for (Eigen::Index j = 0; j + 1 < phases_.size(); ++j) {
      if (!(phases_(j) < phases_(j + 1))) {
        throw DomainError("ion phases must be strictly increasing");
      }
    }
  }

  const Vector& phases() const { return phases_; }
  Eigen::Index size() const { return phases_.size(); }
  Scalar operator[](Eigen::Index j) const { return phases_(j); }

 private:
  Vector phases_;
};

using IonConfiguration = BasicIonConfiguration<double>;

template <typename Derived>
bool is_strictly_ordered(const Eigen::MatrixBase<Derived>& theta) {
  for (Eigen::Index j = 0; j + 1 < theta.size(); ++j) {
    if (!(theta(j) < theta(j + 1))) return false;
  }
  return true;
}

template <typename Derived>
void require_ordered(const Eigen::MatrixBase<Derived>& theta) {
  if (!is_strictly_ordered(theta)) {
    throw DomainError("coincident or unordered ions");
  }
}

/// Delta_eff = Delta_c - U0 sum_j cos^2(theta_j).
template <typename Derived>
typename Derived::Scalar effective_detuning(
    const BasicModelParams<typename Derived::Scalar>& p,
    const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  Scalar sum{0};
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const Scalar c = cos(theta(j) - p.lattice_offset);
    sum += c * c;
  }
  return p.delta_c - p.u0 * sum;
}

/// Stationary mean field a = eta / (kappa - i Delta_eff), kappa = 1.
template <typename Derived>
std::complex<typename Derived::Scalar> cavity_amplitude(
    const BasicModelParams<typename Derived::Scalar>& p,
    const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  const Scalar delta = effective_detuning(p, theta);
  return std::complex<Scalar>(p.eta, 0) / std::complex<Scalar>(1, -delta);
}

/// n = |a|^2 = eta^2 / (1 + Delta_eff^2).
template <typename Scalar>
Scalar mean_photon_number(Scalar eta, Scalar delta_eff) {
  return eta * eta / (Scalar(1) + delta_eff * delta_eff);
}

template <typename Derived>
typename Derived::Scalar mean_photon_number(const BasicModelParams<typename Derived::Scalar>& p,
                                            const Eigen::MatrixBase<Derived>& theta) {
  return mean_photon_number(p.eta, effective_detuning(p, theta));
}

/// Trap plus Coulomb energy, in hbar*kappa.
template <typename Derived>
typename Derived::Scalar ion_potential(const BasicModelParams<typename Derived::Scalar>& p,
                                       const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  require_ordered(theta);
  const Eigen::Index n = theta.size();
  Scalar coulomb{0};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) coulomb += Scalar(1) / (theta(j) - theta(i));
  }
  return p.trap_coefficient() * theta.squaredNorm() + p.coulomb * coulomb;
}

/// V_eff = eta^2 arctan(-Delta_eff), in hbar*kappa.
template <typename Derived>
typename Derived::Scalar optical_potential(const BasicModelParams<typename Derived::Scalar>& p,
                                           const Eigen::MatrixBase<Derived>& theta) {
  using std::atan;
  return p.eta * p.eta * atan(-effective_detuning(p, theta));
}

template <typename Derived>
typename Derived::Scalar total_potential(const BasicModelParams<typename Derived::Scalar>& p,
                                         const Eigen::MatrixBase<Derived>& theta) {
  return ion_potential(p, theta) + optical_potential(p, theta);
}

/// Mean-field light force on each ion, -U0 n d/dtheta_j cos^2(theta_j).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> cavity_force(
    const BasicModelParams<typename Derived::Scalar>& p, const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  using std::sin;
  const Scalar n_bar = mean_photon_number(p, theta);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> f(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    f(j) = p.u0 * n_bar * sin(Scalar(2) * (theta(j) - p.lattice_offset));
  }
  return f;
}

/// Exact gradient of V_tot. The arctan term differentiates to minus the
/// mean-field light force evaluated at a(theta).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> total_gradient(
    const BasicModelParams<typename Derived::Scalar>& p, const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  require_ordered(theta);
  const Eigen::Index n = theta.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g = Scalar(2) * p.trap_coefficient() * theta;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar d = theta(j) - theta(i);
      const Scalar f = p.coulomb / (d * d);
      g(i) += f;
      g(j) -= f;
    }
  }
  g -= cavity_force(p, theta);
  return g;
}

/// Hessian of trap plus Coulomb energy.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> ion_hessian(
    const BasicModelParams<typename Derived::Scalar>& p, const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  require_ordered(theta);
  const Eigen::Index n = theta.size();
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix h = Matrix::Zero(n, n);
  h.diagonal().setConstant(Scalar(2) * p.trap_coefficient());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar d = theta(j) - theta(i);
      const Scalar k = Scalar(2) * p.coulomb / (d * d * d);
      h(i, j) -= k;
      h(j, i) -= k;
      h(i, i) += k;
      h(j, j) += k;
    }
  }
  return h;
}

/// Vibrational Hessian with the intracavity field held at its stationary
/// value: ion part plus the lattice curvature -2 U0 n cos(2 theta_j).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> frozen_field_hessian(
    const BasicModelParams<typename Derived::Scalar>& p, const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  using std::cos;
  auto h = ion_hessian(p, theta);
  const Scalar n_bar = mean_photon_number(p, theta);
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    h(j, j) -= Scalar(2) * p.u0 * n_bar * cos(Scalar(2) * (theta(j) - p.lattice_offset));
  }
  return h;
}

/// Hessian of V_tot, including the response of the mean field to the
/// positions (rank-one term through Delta_eff).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> total_hessian(
    const BasicModelParams<typename Derived::Scalar>& p, const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  using std::sin;
  auto h = frozen_field_hessian(p, theta);
  const Eigen::Index n = theta.size();
  const Scalar delta = effective_detuning(p, theta);
  const Scalar denom = Scalar(1) + delta * delta;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s(n);
  for (Eigen::Index j = 0; j < n; ++j) s(j) = sin(Scalar(2) * (theta(j) - p.lattice_offset));
  // d n / d theta_j = -2 Delta n^2 / eta^2 * U0 sin(2 theta_j)
  const Scalar rank_one = Scalar(2) * delta * p.eta * p.eta / (denom * denom) * p.u0 * p.u0;
  h.noalias() += rank_one * s * s.transpose();
  return h;
}

/// Stock parameter sets: bulk ground-state cooling of an 11-ion 174Yb+
/// chain, and the tighter-trap variant for single-kink spectroscopy.
PhysicalConfig preset_bulk_cooling();
PhysicalConfig preset_kink_spectroscopy();

}  // namespace optochain
