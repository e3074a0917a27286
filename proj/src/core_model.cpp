#include "optochain/core_model.hpp"

#include <cmath>
#include <string>

namespace optochain {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0) || !std::isfinite(value)) {
    throw DomainError(std::string(name) + " must be finite and positive");
  }
}

void require_non_negative(double value, const char* name) {
  if (!(value >= 0) || !std::isfinite(value)) {
    throw DomainError(std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

void validate(const PhysicalConfig& c) {
  require_positive(c.ion_mass, "ion_mass");
  require_positive(c.wavelength, "wavelength");
  require_positive(c.kappa, "kappa");
  require_positive(c.trap_freq, "trap_freq");
  require_non_negative(c.pump_strength, "pump_strength");
  require_non_negative(c.vacuum_rabi, "vacuum_rabi");
  if (c.ion_charge < 1) throw DomainError("ion_charge must be >= 1");
  if (c.n_ions < 1) throw DomainError("n_ions must be >= 1");
  if (!std::isfinite(c.cavity_detuning)) throw DomainError("cavity_detuning must be finite");
  if (!std::isfinite(c.cavity_offset)) throw DomainError("cavity_offset must be finite");
  if (c.atom_detuning == 0 || !std::isfinite(c.atom_detuning)) {
    throw DomainError("atom_detuning must be finite and non-zero");
  }
  if (!std::isfinite(c.u0())) throw DomainError("U0 = g^2/Delta_d is not finite");
  if (!(c.recoil_frequency() > 0)) throw DomainError("recoil frequency must be positive");
}

UnitScale unit_scale(const PhysicalConfig& config) {
  return {config.kappa, config.wavelength, config.atom_detuning};
}

ModelParams nondimensionalize(const PhysicalConfig& c) {
  validate(c);
  const double k = c.wavenumber();
  const double q = c.ion_charge * codata::elementary_charge;
  ModelParams p;
  p.u0 = c.u0() / c.kappa;
  p.eta = c.pump_strength / c.kappa;
  p.delta_c = c.cavity_detuning / c.kappa;
  p.omega_t = c.trap_freq / c.kappa;
  p.omega_r = c.recoil_frequency() / c.kappa;
  p.coulomb = q * q * k / (4.0 * codata::pi * codata::epsilon0 * codata::hbar * c.kappa);
  p.n_ions = c.n_ions;
  p.lattice_offset = k * c.cavity_offset;
  return p;
}

PhysicalConfig redimensionalize(const ModelParams& p, const UnitScale& s) {
  validate(p);
  require_positive(s.kappa, "kappa");
  require_positive(s.wavelength, "wavelength");
  if (s.atom_detuning == 0) throw DomainError("atom_detuning must be non-zero");

  const double k = 2.0 * codata::pi / s.wavelength;
  PhysicalConfig c;
  c.wavelength = s.wavelength;
  c.kappa = s.kappa;
  c.atom_detuning = s.atom_detuning;
  c.pump_strength = p.eta * s.kappa;
  c.cavity_detuning = p.delta_c * s.kappa;
  c.trap_freq = p.omega_t * s.kappa;
  c.ion_mass = codata::hbar * k * k / (2.0 * p.omega_r * s.kappa) / codata::atomic_mass;
  const double q2 = p.coulomb * 4.0 * codata::pi * codata::epsilon0 * codata::hbar * s.kappa / k;
  c.ion_charge = static_cast<int>(std::lround(std::sqrt(q2) / codata::elementary_charge));
  c.vacuum_rabi = std::sqrt(std::abs(p.u0 * s.kappa * s.atom_detuning));
  c.n_ions = static_cast<int>(p.n_ions);
  c.cavity_offset = p.lattice_offset / k;
  return c;
}

PhysicalConfig preset_bulk_cooling() {
  constexpr double two_pi = 2.0 * codata::pi;
  PhysicalConfig c;
  c.ion_mass = 174.0;
  c.ion_charge = 1;
  c.wavelength = 369e-9;
  c.kappa = two_pi * 0.2e6;
  c.trap_freq = two_pi * 100e3;
  c.pump_strength = 250.0 * c.kappa;
  c.cavity_detuning = -8.5 * c.kappa;
  c.atom_detuning = two_pi * 12e9;
  c.vacuum_rabi = std::sqrt(0.5 * c.kappa * c.atom_detuning);
  c.n_ions = 11;
  return c;
}

PhysicalConfig preset_kink_spectroscopy() {
  PhysicalConfig c = preset_bulk_cooling();
  c.trap_freq = 2.0 * codata::pi * 700e3;
  c.pump_strength = 200.0 * c.kappa;
  c.cavity_detuning = -1.8 * c.kappa;
  return c;
}

}  // namespace optochain
