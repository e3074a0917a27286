#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "optochain/equilibrium.hpp"

namespace optochain {

struct NormalModes {
  Eigen::VectorXd freqs;         // ascending, units of kappa
  Eigen::MatrixXd mode_matrix;   // columns are M_{j alpha}
};

struct ModeDecomposition {
  Eigen::VectorXd freqs;
  Eigen::MatrixXd mode_matrix;
  Eigen::VectorXd widths;  // k sigma_alpha = sqrt(omega_R / omega_alpha)
  Eigen::VectorXcd couplings;

  Eigen::Index size() const { return freqs.size(); }
  bool lamb_dicke() const { return (widths.array() < 1.0).all(); }
  std::vector<Eigen::Index> lamb_dicke_warnings(double threshold = 0.3) const;
};

/// Vibrational Hessian at the equilibrium with the field frozen at a-bar.
Eigen::MatrixXd hessian(const ModelParams& params, const EquilibriumState& state);

/// omega_alpha = sqrt(2 omega_R lambda_alpha). Eigenvectors of degenerate
/// clusters are rebuilt on parity eigenspaces; each column's largest
/// component is positive. Throws InstabilityError on negative curvature.
NormalModes normal_modes(const Eigen::MatrixXd& hessian, double omega_r, double degeneracy_gap = 1e-8,
                         double negative_tolerance = 1e-8);

/// chi_alpha = sqrt(omega_R/omega_alpha) a U0 sum_j sin(2 theta_j) M_{j alpha}.
Eigen::VectorXcd coupling_coefficients(const ModelParams& params, const EquilibriumState& state,
                                       const NormalModes& modes);

ModeDecomposition decompose(const ModelParams& params, const EquilibriumState& state);

/// Columns alpha, j, M_jalpha, omega_alpha.
void write_mode_shapes(std::ostream& out, const ModeDecomposition& modes, bool header = true);

}  // namespace optochain
