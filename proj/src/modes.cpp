#include "optochain/modes.hpp"

#include <cmath>
#include <ostream>
#include <vector>

namespace optochain {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void fix_sign(Eigen::Ref<VectorXd> v) {
  const double top = v.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (std::abs(v(j)) >= top * (1.0 - 1e-9)) {
      if (v(j) < 0) v = -v;
      return;
    }
  }
}

// Basis of span(V) that does not depend on how V was chosen: project the
// unit vectors onto the subspace and Gram-Schmidt in index order. When the
// subspace is mirror invariant the projections are split by parity first
// (even first).
MatrixXd canonical_basis(const MatrixXd& v) {
  const Eigen::Index n = v.rows(), m = v.cols();
  const MatrixXd proj = v * v.transpose();
  const MatrixXd mirrored = v.colwise().reverse();
  const bool symmetric = (mirrored - proj * mirrored).cwiseAbs().maxCoeff() < 1e-8;
  MatrixXd basis(n, m);
  Eigen::Index found = 0;
  for (int parity : symmetric ? std::vector<int>{1, -1} : std::vector<int>{0}) {
    for (Eigen::Index j = 0; j < n && found < m; ++j) {
      VectorXd c = proj.col(j);
      if (parity != 0) c = 0.5 * (c + parity * VectorXd(c.reverse()));
      for (Eigen::Index k = 0; k < found; ++k) c -= basis.col(k).dot(c) * basis.col(k);
      const double norm = c.norm();
      if (norm < 1e-6) continue;
      basis.col(found++) = c / norm;
    }
  }
  if (found < m) return v;
  return basis;
}

}  // namespace

std::vector<Eigen::Index> ModeDecomposition::lamb_dicke_warnings(double threshold) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index a = 0; a < widths.size(); ++a) {
    if (widths(a) > threshold) out.push_back(a);
  }
  return out;
}

MatrixXd hessian(const ModelParams& params, const EquilibriumState& state) {
  return frozen_field_hessian(params, state.phases());
}

NormalModes normal_modes(const MatrixXd& h, double omega_r, double degeneracy_gap, double negative_tolerance) {
  if (h.rows() != h.cols()) throw DomainError("hessian must be square");
  if (!(omega_r > 0)) throw DomainError("recoil frequency must be positive");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()));
  if (es.info() != Eigen::Success) throw InstabilityError("hessian eigendecomposition failed");
  const VectorXd& w = es.eigenvalues();
  const Eigen::Index n = w.size();
  if (n > 0 && w(0) < -negative_tolerance) {
    throw InstabilityError("negative hessian eigenvalue: equilibrium is a saddle");
  }

  NormalModes out;
  out.mode_matrix = es.eigenvectors();
  out.freqs.resize(n);
  for (Eigen::Index a = 0; a < n; ++a) out.freqs(a) = std::sqrt(2.0 * omega_r * std::max(w(a), 0.0));

  const double scale = n > 0 ? w.cwiseAbs().maxCoeff() : 0.0;
  Eigen::Index start = 0;
  for (Eigen::Index a = 1; a <= n; ++a) {
    if (a < n && w(a) - w(a - 1) < degeneracy_gap * scale) continue;
    if (a - start > 1) {
      out.mode_matrix.middleCols(start, a - start) = canonical_basis(out.mode_matrix.middleCols(start, a - start));
    }
    start = a;
  }
  for (Eigen::Index a = 0; a < n; ++a) fix_sign(out.mode_matrix.col(a));
  return out;
}

Eigen::VectorXcd coupling_coefficients(const ModelParams& params, const EquilibriumState& state,
                                       const NormalModes& modes) {
  const VectorXd& th = state.phases();
  VectorXd s(th.size());
  for (Eigen::Index j = 0; j < th.size(); ++j) s(j) = std::sin(2.0 * (th(j) - params.lattice_offset));
  const std::complex<double> a = cavity_amplitude(params, th);
  const VectorXd overlap = modes.mode_matrix.transpose() * s;
  Eigen::VectorXcd chi(overlap.size());
  for (Eigen::Index k = 0; k < overlap.size(); ++k) {
    if (!(modes.freqs(k) > 0)) throw InstabilityError("zero mode frequency: coupling undefined");
    chi(k) = std::sqrt(params.omega_r / modes.freqs(k)) * params.u0 * overlap(k) * a;
  }
  return chi;
}

ModeDecomposition decompose(const ModelParams& params, const EquilibriumState& state) {
  NormalModes nm = normal_modes(hessian(params, state), params.omega_r);
  ModeDecomposition d;
  d.couplings = coupling_coefficients(params, state, nm);
  d.widths = (params.omega_r / nm.freqs.array()).sqrt().matrix();
  d.freqs = std::move(nm.freqs);
  d.mode_matrix = std::move(nm.mode_matrix);
  return d;
}

void write_mode_shapes(std::ostream& out, const ModeDecomposition& modes, bool header) {
  const auto old = out.precision(17);
  if (header) out << "alpha,j,M_jalpha,omega_alpha\n";
  for (Eigen::Index a = 0; a < modes.size(); ++a) {
    for (Eigen::Index j = 0; j < modes.mode_matrix.rows(); ++j) {
      out << a << ',' << j << ',' << modes.mode_matrix(j, a) << ',' << modes.freqs(a) << '\n';
    }
  }
  out.precision(old);
}

}  // namespace optochain
