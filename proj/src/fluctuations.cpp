#include "optochain/fluctuations.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace optochain {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cdouble = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

void require_square(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() % 2 != 0 || m.rows() < 2) {
    throw DomainError(std::string(what) + " must be square with even dimension");
  }
}

}  // namespace

DriftSystem build_drift_system(double delta_eff, const VectorXd& freqs, const VectorXcd& chi,
                               const std::vector<NoiseChannel>& phonon_noise) {
  const Index n = freqs.size();
  if (chi.size() != n) throw DomainError("frequency and coupling vectors differ in length");
  if (!phonon_noise.empty() && Index(phonon_noise.size()) != n) {
    throw DomainError("one noise channel per phonon mode expected");
  }
  DriftSystem s;
  const Index dim = 2 * (n + 1);
  s.delta_eff = delta_eff;
  s.matrix = MatrixXd::Zero(dim, dim);
  s.diffusion = MatrixXd::Zero(dim, dim);
  s.noise.push_back({1.0, 0.0});
  s.matrix.topLeftCorner<2, 2>() << -1.0, -delta_eff, delta_eff, -1.0;
  s.diffusion(0, 0) = s.diffusion(1, 1) = 1.0;

  for (Index a = 0; a < n; ++a) {
    const NoiseChannel bath = phonon_noise.empty() ? NoiseChannel{} : phonon_noise[a];
    const Index i = 2 + 2 * a;
    s.matrix(i, i) = s.matrix(i + 1, i + 1) = -bath.damping;
    s.matrix(i, i + 1) = freqs(a);
    s.matrix(i + 1, i) = -freqs(a);
    // H = -2 (chi' Q_a + chi'' P_a) Q_alpha with the phonon quadratures
    // taken with opposite sign, so that real chi gives the printed blocks
    const double cr = chi(a).real(), ci = chi(a).imag();
    s.matrix(0, i) = 2.0 * ci;
    s.matrix(1, i) = -2.0 * cr;
    s.matrix(i + 1, 0) = -2.0 * cr;
    s.matrix(i + 1, 1) = -2.0 * ci;
    s.diffusion(i, i) = s.diffusion(i + 1, i + 1) = bath.damping * (2.0 * bath.thermal + 1.0);
    s.noise.push_back(bath);
    s.mode_index.push_back(a);
  }
  return s;
}

DriftSystem build_drift_system(const ModelParams& params, const EquilibriumState& state,
                               const ModeDecomposition& modes, const DriftOptions& options) {
  (void)params;
  std::vector<Index> keep, drop;
  for (Index a = 0; a < modes.size(); ++a) {
    const double chi2 = std::norm(modes.couplings(a));
    const double w = modes.freqs(a), d = state.delta_eff;
    const double net_rate = chi2 * (1.0 / (1.0 + (d + w) * (d + w)) - 1.0 / (1.0 + (d - w) * (d - w)));
    const bool decoupled = std::abs(modes.couplings(a)) <= options.chi_threshold || std::abs(net_rate) < options.rate_floor;
    if (options.exclude_decoupled && decoupled && options.phonon_noise.damping == 0.0) {
      drop.push_back(a);
    } else {
      keep.push_back(a);
    }
  }
  VectorXd freqs(keep.size());
  VectorXcd chi(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    freqs(k) = modes.freqs(keep[k]);
    chi(k) = modes.couplings(keep[k]);
  }
  DriftSystem s = build_drift_system(state.delta_eff, freqs, chi,
                                     std::vector<NoiseChannel>(keep.size(), options.phonon_noise));
  s.mode_index = keep;
  s.excluded = drop;
  s.amplitude = state.amplitude;
  return s;
}

bool GeneralizedModes::photon_dominant(Index k) const {
  Index top = 0;
  character.row(k).maxCoeff(&top);
  return top == 0;
}

Index GeneralizedModes::most_photonic() const {
  Index k = 0;
  character.col(0).maxCoeff(&k);
  return k;
}

GeneralizedModes eigen_rates(const DriftSystem& system, double tolerance) {
  require_square(system.matrix, "drift matrix");
  Eigen::EigenSolver<MatrixXd> es(system.matrix);
  if (es.info() != Eigen::Success) throw InstabilityError("drift matrix eigendecomposition failed");
  GeneralizedModes g;
  g.eigenvalues = es.eigenvalues();
  g.eigenvectors = es.eigenvectors();
  const Index dim = g.eigenvalues.size();
  for (Index k = 0; k < dim; ++k) {
    if (g.eigenvalues(k).real() >= tolerance) {
      throw InstabilityError("drift matrix has an eigenvalue with non-negative real part");
    }
  }

  const double scale = g.eigenvalues.cwiseAbs().maxCoeff();
  std::vector<bool> used(dim, false);
  std::vector<Index> real_ones;
  for (Index k = 0; k < dim; ++k) {
    if (std::abs(g.eigenvalues(k).imag()) <= 1e-12 * scale) real_ones.push_back(k);
  }
  for (Index k : real_ones) used[k] = true;
  for (Index k = 0; k < dim; ++k) {
    if (used[k] || g.eigenvalues(k).imag() < 0) continue;
    Index best = -1;
    double dist = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < dim; ++j) {
      if (used[j] || j == k || g.eigenvalues(j).imag() > 0) continue;
      const double d = std::abs(g.eigenvalues(j) - std::conj(g.eigenvalues(k)));
      if (d < dist) {
        dist = d;
        best = j;
      }
    }
    if (best < 0) throw InstabilityError("unpaired complex eigenvalue in drift matrix");
    used[k] = used[best] = true;
    g.pairs.push_back({k, best});
  }
  std::sort(real_ones.begin(), real_ones.end(),
            [&](Index a, Index b) { return g.eigenvalues(a).real() < g.eigenvalues(b).real(); });
  for (std::size_t k = 0; k + 1 < real_ones.size(); k += 2) g.pairs.push_back({real_ones[k], real_ones[k + 1]});
  if (real_ones.size() % 2 != 0) throw InstabilityError("odd number of real drift eigenvalues");

  std::sort(g.pairs.begin(), g.pairs.end(), [&](const auto& a, const auto& b) {
    const double fa = std::abs(g.eigenvalues(a[0]).imag()), fb = std::abs(g.eigenvalues(b[0]).imag());
    if (fa != fb) return fa < fb;
    return g.eigenvalues(a[0]).real() > g.eigenvalues(b[0]).real();
  });

  const Index m = Index(g.pairs.size());
  const Index blocks = dim / 2;
  g.rates.resize(m);
  g.freqs.resize(m);
  g.character = MatrixXd::Zero(m, blocks);
  for (Index k = 0; k < m; ++k) {
    const auto [a, b] = g.pairs[k];
    g.rates(k) = -(g.eigenvalues(a).real() + g.eigenvalues(b).real());
    g.freqs(k) = std::abs(g.eigenvalues(a).imag());
    for (Index e : {a, b}) {
      const VectorXcd& v = g.eigenvectors.col(e);
      VectorXd w(blocks);
      for (Index q = 0; q < blocks; ++q) w(q) = std::norm(v(2 * q)) + std::norm(v(2 * q + 1));
      g.character.row(k) += 0.5 * w.transpose() / w.sum();
    }
  }
  return g;
}

namespace {

// A X + X A^T - Q in extended precision.
MatrixXd lyapunov_residual(const MatrixXd& a, const MatrixXd& x, const MatrixXd& q) {
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const LMat al = a.cast<long double>(), xl = x.cast<long double>();
  const LMat r = al * xl + xl * al.transpose() - q.cast<long double>();
  return r.cast<double>();
}

// Slow modes make the Lyapunov operator ill-conditioned: a single solve has
// a tiny residual but a forward error of order eps / (slowest rate).
// Correcting against residuals formed in extended precision recovers most
// of the lost digits; `solve` only has to be accurate to a few digits.
template <class Solve>
MatrixXd refine_lyapunov(const MatrixXd& a, const MatrixXd& q, MatrixXd x, const Solve& solve) {
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 4; ++it) {
    const MatrixXd dx = solve(-lyapunov_residual(a, x, q));
    const double step = dx.cwiseAbs().maxCoeff();
    if (!(step < last)) break;
    x += dx;
    last = step;
    if (step <= 1e-16 * x.cwiseAbs().maxCoeff()) break;
  }
  return 0.5 * (x + x.transpose());
}

}  // namespace

MatrixXd solve_continuous_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  if (a.rows() != a.cols() || q.rows() != a.rows() || q.cols() != a.cols()) {
    throw DomainError("lyapunov operands must be square and of equal size");
  }
  const Index n = a.rows();
  Eigen::ComplexSchur<MatrixXcd> schur(a.cast<cdouble>());
  if (schur.info() != Eigen::Success) throw InstabilityError("schur decomposition failed");
  const MatrixXcd& u = schur.matrixU();
  const MatrixXcd& t = schur.matrixT();

  const double scale = std::max(t.cwiseAbs().maxCoeff(), 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (std::abs(t(i, i) + t(j, j)) < 1e-14 * scale) {
        throw InstabilityError("singular lyapunov operator: eigenvalues sum to zero");
      }
    }
  }

  // A = U T U^*, X = U Y U^T  =>  T Y + Y T^T = U^* Q conj(U)
  auto solve = [&](const MatrixXd& rhs_matrix) {
    const MatrixXcd c = u.adjoint() * rhs_matrix.cast<cdouble>() * u.conjugate();
    MatrixXcd y = MatrixXcd::Zero(n, n);
    for (Index j = n - 1; j >= 0; --j) {
      VectorXcd rhs = c.col(j);
      for (Index k = j + 1; k < n; ++k) rhs -= t(j, k) * y.col(k);
      MatrixXcd shifted = t;
      shifted.diagonal().array() += t(j, j);
      y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    return MatrixXd((u * y * u.transpose()).real());
  };
  return refine_lyapunov(a, q, solve(q), solve);
}

MatrixXd steady_covariance_eigenbasis(const DriftSystem& system, const GeneralizedModes& modes,
                                      double denominator_tolerance) {
  const MatrixXcd& b = modes.eigenvectors;
  const VectorXcd& d = modes.eigenvalues;
  const Index n = d.size();

  Eigen::JacobiSVD<MatrixXcd> svd(b);
  const auto& sv = svd.singularValues();
  if (!(sv(n - 1) > 1e-12 * sv(0))) throw ConditioningError("drift eigenbasis is near-defective");

  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (std::abs(d(i) + d(j)) < denominator_tolerance) {
        throw ConditioningError("near-singular denominator D_gamma + D_epsilon");
      }
    }
  }

  // M = B D B^-1: M S + S M^T = C has S = B Y B^T, Y_ij = K_ij / (d_i + d_j), K = B^-1 C B^-T
  const MatrixXcd b_inv = b.partialPivLu().inverse();
  auto solve = [&](const MatrixXd& c) {
    const MatrixXcd k = b_inv * c.cast<cdouble>() * b_inv.transpose();
    MatrixXcd y(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) y(i, j) = k(i, j) / (d(i) + d(j));
    }
    return MatrixXd((b * y * b.transpose()).real());
  };
  const MatrixXd q = -2.0 * system.diffusion;
  return refine_lyapunov(system.matrix, q, solve(q), solve);
}

MatrixXd steady_covariance_lyapunov(const DriftSystem& system) {
  require_square(system.matrix, "drift matrix");
  return solve_continuous_lyapunov(system.matrix, -2.0 * system.diffusion);
}

const char* to_string(CovarianceRoute route) {
  return route == CovarianceRoute::Eigenbasis ? "eigenbasis" : "lyapunov";
}

SteadyState steady_state(const DriftSystem& system, const GeneralizedModes& modes) {
  SteadyState s;
  try {
    s.covariance = steady_covariance_eigenbasis(system, modes);
    s.route = CovarianceRoute::Eigenbasis;
  } catch (const ConditioningError& e) {
    s.covariance = steady_covariance_lyapunov(system);
    s.route = CovarianceRoute::Lyapunov;
    s.fallback_reason = e.what();
  }
  check_physical(s.covariance);
  s.occupations = mode_occupations(s.covariance);
  return s;
}

MatrixXd symplectic_form(Index n_blocks) {
  MatrixXd omega = MatrixXd::Zero(2 * n_blocks, 2 * n_blocks);
  for (Index k = 0; k < n_blocks; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

double physicality_margin(const MatrixXd& sigma) {
  MatrixXcd h = sigma.cast<cdouble>();
  h += cdouble(0.0, 1.0) * symplectic_form(sigma.rows() / 2).cast<cdouble>();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

void check_physical(const MatrixXd& sigma, double tolerance) {
  require_square(sigma, "covariance");
  if (!sigma.allFinite()) throw PhysicalityError("covariance has non-finite entries");
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > tolerance * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw PhysicalityError("covariance is not symmetric");
  }
  if (physicality_margin(sigma) < -tolerance) {
    throw PhysicalityError("covariance violates the uncertainty relation");
  }
}

Occupations mode_occupations(const MatrixXd& sigma, double tolerance) {
  require_square(sigma, "covariance");
  const Index blocks = sigma.rows() / 2;
  auto occupation = [&](Index b) {
    double n = 0.5 * (0.5 * sigma(2 * b, 2 * b) + 0.5 * sigma(2 * b + 1, 2 * b + 1) - 1.0);
    if (n < -tolerance) throw PhysicalityError("negative occupation");
    return std::max(n, 0.0);
  };
  Occupations o;
  o.photon = occupation(0);
  o.phonons.resize(blocks - 1);
  for (Index b = 1; b < blocks; ++b) o.phonons(b - 1) = occupation(b);
  return o;
}

VectorXd occupations_by_mode(const DriftSystem& system, const Occupations& occ, Index n_modes) {
  VectorXd out = VectorXd::Constant(n_modes, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < system.mode_index.size(); ++k) out(system.mode_index[k]) = occ.phonons(Index(k));
  return out;
}

VectorXd symplectic_eigenvalues(const MatrixXd& sigma) {
  require_square(sigma, "covariance");
  const Index blocks = sigma.rows() / 2;
  Eigen::EigenSolver<MatrixXd> es(symplectic_form(blocks) * (0.5 * sigma), false);
  std::vector<double> v;
  for (Index k = 0; k < es.eigenvalues().size(); ++k) v.push_back(std::abs(es.eigenvalues()(k)));
  std::sort(v.begin(), v.end());
  VectorXd nu(blocks);
  for (Index k = 0; k < blocks; ++k) nu(k) = 0.5 * (v[2 * k] + v[2 * k + 1]);
  return nu;
}

double log_negativity(const MatrixXd& sigma, const std::vector<Index>& slots) {
  check_physical(sigma);
  std::vector<Index> idx = {0, 1};
  for (Index s : slots) {
    if (s < 0 || 2 + 2 * s + 1 >= sigma.rows()) throw DomainError("phonon slot out of range");
    idx.push_back(2 + 2 * s);
    idx.push_back(3 + 2 * s);
  }
  const Index m = Index(idx.size());
  MatrixXd r(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) r(i, j) = sigma(idx[i], idx[j]);
  }
  r.row(1) *= -1.0;
  r.col(1) *= -1.0;
  const double nu_min = symplectic_eigenvalues(r).minCoeff();
  return std::max(0.0, -std::log(2.0 * nu_min));
}

double log_negativity_cavity_mode(const MatrixXd& sigma, Index slot) { return log_negativity(sigma, {slot}); }

double log_negativity_cavity_all(const MatrixXd& sigma) {
  std::vector<Index> slots(sigma.rows() / 2 - 1);
  std::iota(slots.begin(), slots.end(), Index(0));
  return log_negativity(sigma, slots);
}

MatrixXcd transfer_matrix(const DriftSystem& system, double nu) {
  MatrixXcd a = -system.matrix.cast<cdouble>();
  a.diagonal().array() -= cdouble(0.0, nu);
  return a.partialPivLu().inverse();
}

double output_spectrum(const DriftSystem& system, double nu) {
  const double norm = std::norm(system.amplitude);
  if (!(norm > 0)) throw DomainError("output spectrum needs a non-zero mean field");
  // Work with (a, a^dagger) per block. The block entries are formed from sums
  // and differences of the real ones, so a decoupled cavity gives exact zeros
  // and the spectrum vanishes identically instead of at rounding level.
  const Index n = system.size();
  MatrixXcd a(n, n);
  for (Index r = 0; r < n; r += 2) {
    for (Index c = 0; c < n; c += 2) {
      const double b00 = system.matrix(r, c), b01 = system.matrix(r, c + 1);
      const double b10 = system.matrix(r + 1, c), b11 = system.matrix(r + 1, c + 1);
      const cdouble same(0.5 * (b00 + b11), 0.5 * (b10 - b01));
      const cdouble cross(0.5 * (b00 - b11), 0.5 * (b01 + b10));
      a(r, c) = -same;
      a(r, c + 1) = -cross;
      a(r + 1, c) = -std::conj(cross);
      a(r + 1, c + 1) = -std::conj(same);
    }
    a(r, r) -= cdouble(0.0, nu);
    a(r + 1, r + 1) -= cdouble(0.0, nu);
  }
  // normally ordered: only the a_in^dagger part of the cavity vacuum counts
  VectorXcd e = VectorXcd::Zero(n);
  e(1) = 1.0;
  const VectorXcd t = a.partialPivLu().solve(e);
  const double kappa = system.noise.front().damping;
  return 2.0 * kappa * std::norm(t(0)) / norm;
}

VectorXd output_spectrum(const DriftSystem& system, const VectorXd& nu_grid) {
  VectorXd s(nu_grid.size());
  for (Index k = 0; k < nu_grid.size(); ++k) s(k) = output_spectrum(system, nu_grid(k));
  return s;
}

MatrixXcd quadrature_spectral_density(const DriftSystem& system, double nu) {
  const MatrixXcd t = transfer_matrix(system, nu);
  return t * (2.0 * system.diffusion).cast<cdouble>() * t.adjoint();
}

MatrixXd integrate_spectral_density(const DriftSystem& system, const GeneralizedModes& modes, double limit,
                                    double rel_tol) {
  if (!(limit > 0)) throw DomainError("integration limit must be positive");
  std::vector<double> cuts = {0.0, limit};
  for (Index k = 0; k < modes.size(); ++k) {
    const double w = modes.freqs(k), g = 0.5 * modes.rates(k);
    for (double off : {-4.0 * g, -g, 0.0, g, 4.0 * g}) {
      const double x = w + off;
      if (x > 0 && x < limit) cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  auto f = [&](double nu) { return quadrature_spectral_density(system, nu); };
  const double scale = f(0.0).cwiseAbs().maxCoeff() + 1.0;
  const double tol = rel_tol * scale / double(cuts.size());

  std::function<MatrixXcd(double, double, const MatrixXcd&, const MatrixXcd&, const MatrixXcd&, const MatrixXcd&,
                          double, int)>
      simpson = [&](double a, double b, const MatrixXcd& fa, const MatrixXcd& fm, const MatrixXcd& fb,
                    const MatrixXcd& whole, double eps, int depth) -> MatrixXcd {
    const double m = 0.5 * (a + b);
    const MatrixXcd flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
    const MatrixXcd left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const MatrixXcd right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const MatrixXcd diff = left + right - whole;
    if (depth <= 0 || diff.cwiseAbs().maxCoeff() <= 15.0 * eps) return left + right + diff / 15.0;
    return simpson(a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           simpson(m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
  };

  MatrixXcd total = MatrixXcd::Zero(system.size(), system.size());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const MatrixXcd fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
    const MatrixXcd whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson(a, b, fa, fm, fb, whole, tol, 40);
  }
  // S(-nu) = conj(S(nu))
  MatrixXd out = total.real() / kPi;
  return 0.5 * (out + out.transpose());
}

LorentzianFit fit_lorentzian(const VectorXd& nu, const VectorXd& s) {
  if (nu.size() != s.size() || nu.size() < 3) throw DomainError("need at least three samples");
  Index peak = 0;
  s.maxCoeff(&peak);
  Index lo = peak, hi = peak;
  while (lo > 0 && s(lo - 1) >= 0.5 * s(peak)) --lo;
  while (hi + 1 < s.size() && s(hi + 1) >= 0.5 * s(peak)) ++hi;
  if (hi - lo < 2) throw DomainError("peak is not resolved by the sampling grid");

  const Index m = hi - lo + 1;
  const double c0 = nu(peak);
  MatrixXd a(m, 3);
  VectorXd y(m);
  for (Index k = 0; k < m; ++k) {
    const double x = nu(lo + k) - c0;
    a.row(k) << 1.0, x, x * x;
    y(k) = 1.0 / s(lo + k);
  }
  const VectorXd p = a.colPivHouseholderQr().solve(y);
  if (!(p(2) > 0)) throw DomainError("peak is not Lorentzian");
  LorentzianFit fit;
  const double shift = -p(1) / (2.0 * p(2));
  const double floor = p(0) - p(1) * p(1) / (4.0 * p(2));
  fit.center = c0 + shift;
  fit.half_width = std::sqrt(std::max(floor, 0.0) / p(2));
  fit.peak = 1.0 / floor;
  return fit;
}

LorentzianFit fit_spectrum_peak(const DriftSystem& system, double center, double width_guess) {
  const Index samples = 801;
  VectorXd nu = VectorXd::LinSpaced(samples, center - 6.0 * width_guess, center + 6.0 * width_guess);
  LorentzianFit coarse = fit_lorentzian(nu, output_spectrum(system, nu));
  nu = VectorXd::LinSpaced(samples, coarse.center - 3.0 * coarse.half_width, coarse.center + 3.0 * coarse.half_width);
  return fit_lorentzian(nu, output_spectrum(system, nu));
}

}  // namespace optochain
