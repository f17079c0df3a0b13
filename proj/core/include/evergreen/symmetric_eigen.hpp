#pragma once

#include <Eigen/Core>

#include <vector>

namespace evergreen {

/// Eigenpairs of a discretized covariance operator. Row k of
/// `eigenfunctions` is phi_k on the grid, normalized so sum_j phi_k(t_j)^2 * delta = 1.
struct SymmetricEigen {
    std::vector<double> eigenvalues;   // descending
    Eigen::MatrixXd eigenfunctions;    // rows = functions
    int sweeps = 0;
};

/// Solves (C * delta) v = lambda v by cyclic Jacobi rotations. Eigenvectors are
/// rescaled by 1/sqrt(delta) and signed so that sum_j phi_k(t_j) >= 0, with the
/// first nonzero coordinate positive when that sum vanishes.
///
/// Throws ConfigError when C is not square, not finite, or asymmetric beyond
/// 1e-10 (scaled by max|C| when that exceeds 1); NumericalError when 100
/// sweeps do not converge.
SymmetricEigen eigendecompose_symmetric(const Eigen::MatrixXd& covariance, double delta, int max_sweeps = 100);

}  // namespace evergreen
