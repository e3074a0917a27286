#include <doctest.h>

#include <cmath>
#include <random>

#include "optochain/core_model.hpp"
#include "optochain/quantity.hpp"

using namespace optochain;
using Eigen::VectorXd;

namespace {

ModelParams toy_params(Eigen::Index n = 5) {
  ModelParams p;
  p.u0 = 0.5;
  p.eta = 20.0;
  p.delta_c = -3.0;
  p.omega_t = 0.5;
  p.omega_r = 0.04;
  p.coulomb = 40.0;
  p.n_ions = n;
  return p;
}

VectorXd random_ordered(std::mt19937_64& rng, Eigen::Index n, double min_gap = 0.1) {
  std::uniform_real_distribution<double> gap(min_gap, 2.0), start(-5.0, 0.0);
  VectorXd th(n);
  th(0) = start(rng);
  for (Eigen::Index j = 1; j < n; ++j) th(j) = th(j - 1) + gap(rng);
  return th;
}

}  // namespace

TEST_CASE("unit conversion of the bulk-cooling preset") {
  const ModelParams p = nondimensionalize(preset_bulk_cooling());
  CHECK(p.omega_t == doctest::Approx(0.5).epsilon(1e-14));
  // hbar (2 pi / 369 nm)^2 / (2 * 174 u) / (2 pi * 0.2 MHz), evaluated by hand
  CHECK(p.omega_r == doctest::Approx(0.0421060943977521).epsilon(1e-12));
  // e^2 k / (4 pi eps0 hbar kappa)
  CHECK(p.coulomb == doctest::Approx(29643513.075568).epsilon(1e-12));
  CHECK(p.u0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.eta == doctest::Approx(250.0).epsilon(1e-12));
  CHECK(p.delta_c == doctest::Approx(-8.5).epsilon(1e-12));
  CHECK(p.n_ions == 11);

  PhysicalConfig c = preset_bulk_cooling();
  CHECK(unit_scale(c).kappa == c.kappa);
}

TEST_CASE("redimensionalize inverts nondimensionalize") {
  const PhysicalConfig c = preset_kink_spectroscopy();
  const PhysicalConfig back = redimensionalize(nondimensionalize(c), unit_scale(c));
  CHECK(back.ion_mass == doctest::Approx(c.ion_mass).epsilon(1e-12));
  CHECK(back.ion_charge == c.ion_charge);
  CHECK(back.trap_freq == doctest::Approx(c.trap_freq).epsilon(1e-12));
  CHECK(back.pump_strength == doctest::Approx(c.pump_strength).epsilon(1e-12));
  CHECK(back.cavity_detuning == doctest::Approx(c.cavity_detuning).epsilon(1e-12));
  CHECK(back.vacuum_rabi == doctest::Approx(c.vacuum_rabi).epsilon(1e-12));
  CHECK(back.n_ions == c.n_ions);
}

TEST_CASE("physical config validation") {
  PhysicalConfig c = preset_bulk_cooling();
  CHECK_NOTHROW(validate(c));
  PhysicalConfig bad = c;
  bad.ion_mass = -1;
  CHECK_THROWS_AS(validate(bad), DomainError);
  bad = c;
  bad.kappa = 0;
  CHECK_THROWS_AS(validate(bad), DomainError);
  bad = c;
  bad.wavelength = 0;
  CHECK_THROWS_AS(validate(bad), DomainError);
  bad = c;
  bad.n_ions = 0;
  CHECK_THROWS_AS(validate(bad), DomainError);
  bad = c;
  bad.atom_detuning = 0;
  CHECK_THROWS_AS(validate(bad), DomainError);
  bad = c;
  bad.pump_strength = -1;
  CHECK_THROWS_AS(validate(bad), DomainError);
}

TEST_CASE("effective detuning") {
  ModelParams p = toy_params(11);
  const double pi = codata::pi;
  SUBCASE("ions at field nodes") {
    VectorXd th = VectorXd::LinSpaced(11, -5 * pi, 5 * pi).array() + pi / 2;
    CHECK(effective_detuning(p, th) == doctest::Approx(p.delta_c).epsilon(1e-14));
  }
  SUBCASE("ions at antinodes") {
    VectorXd th = VectorXd::LinSpaced(11, -5 * pi, 5 * pi);
    CHECK(effective_detuning(p, th) == doctest::Approx(p.delta_c - 11 * p.u0).epsilon(1e-14));
  }
  SUBCASE("single ion at pi/4") {
    p.n_ions = 1;
    VectorXd th = VectorXd::Constant(1, pi / 4);
    CHECK(effective_detuning(p, th) == doctest::Approx(p.delta_c - p.u0 / 2).epsilon(1e-14));
  }
  SUBCASE("shifting one ion by pi leaves it unchanged") {
    std::mt19937_64 rng(3);
    VectorXd th = random_ordered(rng, 11, 4.0);
    const double before = effective_detuning(p, th);
    th(10) += pi;
    CHECK(effective_detuning(p, th) == doctest::Approx(before).epsilon(1e-13));
  }
}

TEST_CASE("cavity amplitude") {
  ModelParams p = toy_params(1);
  SUBCASE("resonant drive is real") {
    p.delta_c = 0;
    p.u0 = 0;
    const auto a = cavity_amplitude(p, VectorXd::Zero(1));
    CHECK(a.real() == doctest::Approx(p.eta));
    CHECK(a.imag() == 0.0);
  }
  SUBCASE("no pump") {
    p.eta = 0;
    CHECK(std::abs(cavity_amplitude(p, VectorXd::Zero(1))) == 0.0);
  }
  SUBCASE("Delta_eff = -kappa halves the photon number") {
    p.eta = 1;
    p.u0 = 0;
    p.delta_c = -1;
    CHECK(std::norm(cavity_amplitude(p, VectorXd::Zero(1))) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mean_photon_number(1.0, -1.0) == doctest::Approx(0.5));
  }
}

TEST_CASE("potential structure") {
  std::mt19937_64 rng(7);
  ModelParams p = toy_params(6);
  const VectorXd th = random_ordered(rng, 6);
  CHECK(total_potential(p.with_eta(0), th) == ion_potential(p, th));
  const double v1 = optical_potential(p, th);
  CHECK(optical_potential(p.with_eta(2 * p.eta), th) == doctest::Approx(4 * v1).epsilon(1e-14));

  VectorXd crossed = th;
  crossed(3) = crossed(2);
  CHECK_THROWS_AS(total_potential(p, crossed), DomainError);
  CHECK_THROWS_AS(total_gradient(p, crossed), DomainError);
}

TEST_CASE("gradient matches central differences at random configurations") {
  std::mt19937_64 rng(11);
  const double h = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ModelParams p = toy_params(2 + trial % 9);
    p.eta = 5.0 + trial;
    const VectorXd th = random_ordered(rng, p.n_ions);
    const VectorXd g = total_gradient(p, th);
    VectorXd fd(th.size());
    for (Eigen::Index j = 0; j < th.size(); ++j) {
      VectorXd a = th, b = th;
      a(j) += h;
      b(j) -= h;
      fd(j) = (total_potential(p, a) - total_potential(p, b)) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1.0));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gradient equals the mean-field force form") {
  std::mt19937_64 rng(5);
  ModelParams p = toy_params(4);
  const VectorXd th = random_ordered(rng, 4);
  const VectorXd g_light = total_gradient(p, th) - total_gradient(p.with_eta(0), th);
  const double n = mean_photon_number(p, th);
  for (Eigen::Index j = 0; j < 4; ++j) {
    // -U0 n d/dtheta cos^2 = U0 n sin 2 theta, and the gradient is minus the force
    CHECK(g_light(j) == doctest::Approx(-p.u0 * n * std::sin(2 * th(j))).epsilon(1e-10));
  }
}

TEST_CASE("hessian matches differenced gradient") {
  std::mt19937_64 rng(13);
  const double h = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    ModelParams p = toy_params(2 + trial % 7);
    p.eta = 3.0 * trial;
    const VectorXd th = random_ordered(rng, p.n_ions);
    const Eigen::MatrixXd hs = total_hessian(p, th);
    Eigen::MatrixXd fd(th.size(), th.size());
    for (Eigen::Index j = 0; j < th.size(); ++j) {
      VectorXd a = th, b = th;
      a(j) += h;
      b(j) -= h;
      fd.col(j) = (total_gradient(p, a) - total_gradient(p, b)) / (2 * h);
    }
    worst = std::max(worst, (hs - fd).norm() / std::max(hs.norm(), 1.0));
    CHECK((hs - hs.transpose()).norm() <= 1e-14 * hs.norm());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("frozen-field hessian drops only the rank-one field response") {
  std::mt19937_64 rng(17);
  ModelParams p = toy_params(5);
  const VectorXd th = random_ordered(rng, 5);
  const Eigen::MatrixXd diff = total_hessian(p, th) - frozen_field_hessian(p, th);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
  const VectorXd ev = es.eigenvalues().cwiseAbs();
  std::vector<double> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end());
  CHECK(v[v.size() - 2] < 1e-10 * v.back());
  CHECK((frozen_field_hessian(p.with_eta(0), th) - ion_hessian(p, th)).norm() == 0.0);
}

TEST_CASE("quantity parsing") {
  const double two_pi = 2 * codata::pi;
  CHECK(parse_quantity("100 kHz", Dimension::Frequency) == doctest::Approx(two_pi * 1e5));
  CHECK(parse_quantity("3 rad/s", Dimension::Frequency) == 3.0);
  CHECK(parse_quantity("-8.5 kappa", Dimension::Frequency, 2.0) == -17.0);
  CHECK(parse_quantity("369 nm", Dimension::Length) == doctest::Approx(369e-9));
  CHECK(parse_quantity("6.8 \xCE\xBCm", Dimension::Length) == doctest::Approx(6.8e-6));
  CHECK(parse_quantity("174 u", Dimension::Mass) == 174.0);
  CHECK_THROWS_AS(parse_quantity("100", Dimension::Frequency), ConfigError);
  CHECK_THROWS_AS(parse_quantity("100 furlongs", Dimension::Length), ConfigError);
  CHECK_THROWS_AS(parse_quantity("2 kappa", Dimension::Frequency), ConfigError);
  CHECK_THROWS_AS(parse_quantity("kHz", Dimension::Frequency), ConfigError);
  CHECK_THROWS_AS(parse_quantity("1 nm", Dimension::Mass), ConfigError);
}
