#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "optochain/analytic_rates.hpp"
#include "optochain/fluctuations.hpp"

using namespace optochain;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cd = std::complex<double>;

namespace {

DriftSystem one_phonon(double delta, double omega, cd chi, NoiseChannel noise = {}) {
  return build_drift_system(delta, VectorXd::Constant(1, omega), VectorXcd::Constant(1, chi),
                            std::vector<NoiseChannel>{noise});
}

DriftSystem random_system(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 5);
  std::uniform_real_distribution<double> w(0.5, 12.0), delta(-12.0, -0.3), c(-0.4, 0.4);
  const int n = count(rng);
  VectorXd freqs(n);
  VectorXcd chi(n);
  for (int a = 0; a < n; ++a) {
    freqs(a) = w(rng);
    chi(a) = cd(c(rng), c(rng));
  }
  return build_drift_system(delta(rng), freqs, chi);
}

ModelParams bulk() { return nondimensionalize(preset_bulk_cooling()); }

EquilibriumState state_at(const ModelParams& p, double eta) {
  std::vector<double> grid;
  for (double e : default_eta_grid()) {
    if (e < eta) grid.push_back(e);
  }
  grid.push_back(eta);
  return continuation_sweep(p, grid).states.back();
}

}  // namespace

TEST_CASE("decoupled drift matrix") {
  VectorXd w(2);
  w << 3.0, 4.0;
  const DriftSystem d = build_drift_system(-2.0, w, VectorXcd::Zero(2));
  CHECK(d.size() == 6);
  CHECK(d.phonons() == 2);
  CHECK(d.matrix.block(0, 2, 2, 4).norm() == 0.0);
  CHECK(d.matrix.block(2, 0, 4, 2).norm() == 0.0);
  Eigen::EigenSolver<MatrixXd> es(d.matrix.block(0, 0, 2, 2));
  for (int k = 0; k < 2; ++k) {
    CHECK(es.eigenvalues()(k).real() == doctest::Approx(-1.0));
    CHECK(std::abs(es.eigenvalues()(k).imag()) == doctest::Approx(2.0));
  }
  CHECK(d.diffusion(0, 0) == 1.0);
  CHECK(d.diffusion(1, 1) == 1.0);
  CHECK(d.diffusion.block(2, 2, 4, 4).norm() == 0.0);

  const GeneralizedModes g = eigen_rates(d);
  REQUIRE(g.size() == 3);
  CHECK(g.rate_sum() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.rates(g.most_photonic()) == doctest::Approx(2.0));
}

TEST_CASE("real coupling gives a single entry per block") {
  const DriftSystem d = one_phonon(-5.0, 5.0, 0.2);
  // the field couples to Q_1 only through dP_a/dt, the phonon to Q_a through dP_1/dt
  CHECK(d.matrix(0, 2) == 0.0);
  CHECK(d.matrix(0, 3) == 0.0);
  CHECK(d.matrix(1, 3) == 0.0);
  CHECK(std::abs(d.matrix(1, 2)) == doctest::Approx(0.4));
  CHECK(d.matrix(2, 0) == 0.0);
  CHECK(d.matrix(2, 1) == 0.0);
  CHECK(d.matrix(3, 1) == 0.0);
  CHECK(std::abs(d.matrix(3, 0)) == doctest::Approx(0.4));
  CHECK(d.matrix(1, 2) == d.matrix(3, 0));
}

TEST_CASE("one-phonon toy matches a hand-built 4x4 system") {
  // eigenvalues and steady occupations from an independent numpy solve
  const DriftSystem d = one_phonon(-5.0, 5.0, 0.2);
  const GeneralizedModes g = eigen_rates(d);
  std::vector<cd> ev(g.eigenvalues.data(), g.eigenvalues.data() + 4);
  std::sort(ev.begin(), ev.end(), [](cd a, cd b) {
    return std::abs(a.imag() - b.imag()) > 1e-9 ? a.imag() < b.imag() : a.real() < b.real();
  });
  const double expect_re[] = {-0.958621550089904, -0.0413784499100961, -0.958621550089904, -0.0413784499100961};
  const double expect_im[] = {-4.99603179795794, -4.99603179795794, 4.99603179795794, 4.99603179795794};
  for (int k = 0; k < 4; ++k) {
    CHECK(ev[k].real() == doctest::Approx(expect_re[k]).epsilon(1e-10));
    CHECK(ev[k].imag() == doctest::Approx(expect_im[k]).epsilon(1e-10));
  }
  const SteadyState s = steady_state(d, g);
  CHECK(s.occupations.phonons(0) == doctest::Approx(0.0108049535603716).epsilon(1e-9));
  CHECK(s.occupations.photon == doctest::Approx(0.00080495356037158).epsilon(1e-9));
}

TEST_CASE("complex coupling phase does not change the spectrum of rates") {
  const GeneralizedModes a = eigen_rates(one_phonon(-3.0, 4.0, 0.3));
  const GeneralizedModes b = eigen_rates(one_phonon(-3.0, 4.0, 0.3 * std::polar(1.0, 1.1)));
  CHECK((a.rates - b.rates).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.freqs - b.freqs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("instability is reported") {
  CHECK_THROWS_AS(eigen_rates(one_phonon(2.0, 3.0, 0.3)), InstabilityError);
}

TEST_CASE("rate sum rule and dual-route covariance on random systems") {
  std::mt19937_64 rng(2024);
  int tested = 0;
  for (int trial = 0; trial < 200 && tested < 50; ++trial) {
    const DriftSystem d = random_system(rng);
    GeneralizedModes g;
    try {
      g = eigen_rates(d);
    } catch (const InstabilityError&) {
      continue;
    }
    ++tested;
    CHECK(std::abs(g.rate_sum() - 2.0) < 1e-9 * 2.0);
    MatrixXd eig;
    try {
      eig = steady_covariance_eigenbasis(d, g);
    } catch (const ConditioningError&) {
      continue;
    }
    const MatrixXd lyap = steady_covariance_lyapunov(d);
    CHECK((eig - lyap).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(physicality_margin(lyap) > -1e-8);
    const MatrixXd residual = d.matrix * lyap + lyap * d.matrix.transpose() + 2 * d.diffusion;
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-9 * lyap.cwiseAbs().maxCoeff());
  }
  CHECK(tested >= 50);
}

TEST_CASE("lyapunov solver against a direct residual") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  MatrixXd a(5, 5), q(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = z(rng), q(i, j) = z(rng);
  a.diagonal().array() -= 6.0;
  q = q * q.transpose();
  const MatrixXd x = solve_continuous_lyapunov(a, q);
  CHECK((a * x + x * a.transpose() - q).cwiseAbs().maxCoeff() < 1e-12 * q.norm());
}

TEST_CASE("vacuum and thermal fixed points") {
  SUBCASE("decoupled cavity relaxes to vacuum") {
    const DriftSystem d = one_phonon(-2.0, 3.0, 0.0, {0.5, 0.0});
    const MatrixXd s = steady_covariance_lyapunov(d);
    CHECK((s - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    const MatrixXd e = steady_covariance_eigenbasis(d, eigen_rates(d));
    CHECK((e - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    const Occupations occ = mode_occupations(s);
    CHECK(std::abs(occ.photon) < 1e-12);
    CHECK(std::abs(occ.phonons(0)) < 1e-12);
    CHECK(log_negativity_cavity_all(s) < 1e-12);
  }
  SUBCASE("damped thermal phonon") {
    const double n0 = 2.0;
    const DriftSystem d = one_phonon(-2.0, 3.0, 0.0, {0.3, n0});
    const MatrixXd s = steady_covariance_lyapunov(d);
    CHECK(s(2, 2) == doctest::Approx(2 * n0 + 1).epsilon(1e-12));
    CHECK(s(3, 3) == doctest::Approx(2 * n0 + 1).epsilon(1e-12));
    CHECK(mode_occupations(s).phonons(0) == doctest::Approx(n0).epsilon(1e-12));
  }
}

TEST_CASE("occupation clamping and physicality") {
  MatrixXd s = MatrixXd::Identity(4, 4);
  s(2, 2) -= 1e-9;
  CHECK(mode_occupations(s).phonons(0) == 0.0);
  s(2, 2) = 0.5;
  s(3, 3) = 0.5;
  CHECK_THROWS_AS(mode_occupations(s), PhysicalityError);
  CHECK(physicality_margin(MatrixXd::Identity(4, 4)) == doctest::Approx(0.0).epsilon(1e-12));
  MatrixXd squeezed = MatrixXd::Identity(2, 2);
  squeezed(0, 0) = 0.5;
  squeezed(1, 1) = 0.5;
  CHECK(physicality_margin(squeezed) < 0);
  CHECK_THROWS_AS(check_physical(squeezed), PhysicalityError);
}

TEST_CASE("weak-coupling occupation follows the detailed-balance formula") {
  const double omega = 10.0;
  const DriftSystem d = one_phonon(-omega, omega, 1.0 / 50.0);
  const SteadyState s = steady_state(d, eigen_rates(d));
  CHECK(s.occupations.phonons(0) == doctest::Approx(2.5e-3).epsilon(0.1));
  CHECK(s.occupations.phonons(0) ==
        doctest::Approx(sideband_rates(1.0 / 50.0, omega, -omega).n_analytic).epsilon(0.1));
}

TEST_CASE("log-negativity of a two-mode squeezed state") {
  const double r = 0.4;
  MatrixXd s = MatrixXd::Zero(4, 4);
  const double c = std::cosh(2 * r), sh = std::sinh(2 * r);
  s.diagonal().setConstant(c);
  s(0, 2) = s(2, 0) = sh;
  s(1, 3) = s(3, 1) = -sh;
  CHECK(log_negativity_cavity_mode(s, 0) == doctest::Approx(2 * r).epsilon(1e-10));
  CHECK(log_negativity_cavity_all(s) == doctest::Approx(2 * r).epsilon(1e-10));
  const VectorXd nu = symplectic_eigenvalues(s);
  CHECK(nu.minCoeff() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(symplectic_eigenvalues(MatrixXd::Identity(4, 4)).maxCoeff() == doctest::Approx(0.5));
}

TEST_CASE("sliding phase: lowest mode carries no entanglement") {
  const ModelParams p = bulk();
  const EquilibriumState st = state_at(p, 20);
  const ModeDecomposition m = decompose(st.params, st);
  DriftOptions o;
  o.exclude_decoupled = false;
  o.phonon_noise = {1e-3, 0.0};
  const DriftSystem d = build_drift_system(st.params, st, m, o);
  const SteadyState s = steady_state(d, eigen_rates(d));
  CHECK(log_negativity_cavity_mode(s.covariance, 0) == 0.0);
}

TEST_CASE("decoupled modes are excluded and reported") {
  const ModelParams p = bulk();
  const EquilibriumState st = state_at(p, 20);
  const ModeDecomposition m = decompose(st.params, st);
  const DriftSystem d = build_drift_system(st.params, st, m);
  CHECK(d.excluded.size() == 6);
  CHECK(d.phonons() == 5);
  const SteadyState s = steady_state(d, eigen_rates(d));
  const VectorXd n = occupations_by_mode(d, s.occupations, 11);
  for (Eigen::Index a : d.excluded) CHECK(std::isnan(n(a)));
  CHECK((n.array().isNaN()).count() == 6);
}

TEST_CASE("resonant bulk cooling at 250 kappa") {
  const ModelParams p = bulk();
  const EquilibriumState st = state_at(p, 250);
  const ModeDecomposition m = decompose(st.params, st);
  const DriftSystem d = build_drift_system(st.params, st, m);
  CHECK(d.excluded.empty());
  const GeneralizedModes g = eigen_rates(d);
  CHECK(g.rate_sum() == doctest::Approx(2.0).epsilon(1e-9));
  for (Eigen::Index k = 0; k < g.size(); ++k) CHECK(g.rates(k) > 0);
  const SteadyState s = steady_state(d, g);
  CHECK(s.occupations.phonons.maxCoeff() < 0.1);
  CHECK(physicality_margin(s.covariance) > -1e-8);

  const EquilibriumState hot = state_at(p, 300);
  const ModeDecomposition mh = decompose(hot.params, hot);
  const DriftSystem dh = build_drift_system(hot.params, hot, mh);
  const SteadyState sh = steady_state(dh, eigen_rates(dh));
  CHECK(sh.occupations.phonons.mean() > s.occupations.phonons.mean());
  CHECK(sh.occupations.phonons.maxCoeff() < 1.0);
}

TEST_CASE("output spectrum of a decoupled system vanishes") {
  const DriftSystem d = one_phonon(-2.0, 3.0, 0.0, {0.2, 0.0});
  for (double nu : {-5.0, -3.0, -0.1, 0.3, 3.0, 7.0}) CHECK(output_spectrum(d, nu) == 0.0);
}

TEST_CASE("spectrum is nonnegative and peaks at the sideband") {
  const DriftSystem d = one_phonon(-3.0, 8.0, 0.1);
  const GeneralizedModes g = eigen_rates(d);
  const VectorXd nu = VectorXd::LinSpaced(2001, -20, 20);
  const VectorXd s = output_spectrum(d, nu);
  CHECK(s.minCoeff() >= 0.0);
  Eigen::Index peak;
  s.maxCoeff(&peak);
  CHECK(std::abs(std::abs(nu(peak)) - 8.0) < 0.1);
  (void)g;
}

TEST_CASE("isolated peak has half-width equal to half the generalized rate") {
  const DriftSystem d = one_phonon(-3.0, 8.0, 0.1);
  const GeneralizedModes g = eigen_rates(d);
  Eigen::Index k = g.most_photonic() == 0 ? 1 : 0;
  const double rate = g.rates(k), freq = g.freqs(k);
  const double center = output_spectrum(d, freq) > output_spectrum(d, -freq) ? freq : -freq;
  const LorentzianFit fit = fit_spectrum_peak(d, center, rate / 2);
  CHECK(fit.half_width == doctest::Approx(rate / 2).epsilon(0.05));
  CHECK(fit.center == doctest::Approx(center).epsilon(1e-3));
}

TEST_CASE("Lorentzian fit recovers a synthetic peak") {
  const VectorXd nu = VectorXd::LinSpaced(401, 1.0, 3.0);
  const VectorXd s = (0.7 / (1.0 + ((nu.array() - 2.1) / 0.05).square())).matrix();
  const LorentzianFit f = fit_lorentzian(nu, s);
  CHECK(f.center == doctest::Approx(2.1).epsilon(1e-8));
  CHECK(f.half_width == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(f.peak == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("spectral density integrates to the covariance") {
  const DriftSystem d = one_phonon(-5.0, 5.0, 0.2 * std::polar(1.0, 0.4));
  const GeneralizedModes g = eigen_rates(d);
  const MatrixXd sigma = steady_covariance_lyapunov(d);
  const double limit = 20 * g.eigenvalues.imag().cwiseAbs().maxCoeff();
  const MatrixXd wk = integrate_spectral_density(d, g, limit);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (std::abs(sigma(i, j)) < 1e-3) continue;
      CHECK(wk(i, j) == doctest::Approx(sigma(i, j)).epsilon(0.01));
    }
  }
}

TEST_CASE("transfer matrix inverts the shifted drift") {
  const DriftSystem d = one_phonon(-2.0, 3.0, 0.3);
  const Eigen::MatrixXcd t = transfer_matrix(d, 1.7);
  const Eigen::MatrixXcd a = cd(0, -1.7) * Eigen::MatrixXcd::Identity(4, 4) - d.matrix.cast<cd>();
  CHECK((t * a - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}
