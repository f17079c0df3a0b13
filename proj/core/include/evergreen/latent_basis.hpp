#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace evergreen {

/// Mean, eigenfunctions and spectrum of the latent log-intensity process on
/// the yearly grid. `eigenfunctions` holds the retained K rows; `spectrum`
/// and `fve` describe every eigenvalue of the covariance, clamped at zero.
struct LatentBasis {
    std::size_t grid_size = 0;
    double delta = 1.0;
    double bandwidth = 0.0;
    std::vector<double> raw_mean;
    std::vector<double> mean;
    std::vector<double> mean_derivative;
    std::vector<double> spectrum;
    std::vector<double> fve;
    std::vector<double> eigenvalues;
    Eigen::MatrixXd eigenfunctions;  // K x T

    int k() const noexcept { return static_cast<int>(eigenfunctions.rows()); }

    /// Same mean and spectrum, first `k` eigenfunctions only.
    LatentBasis prefix(int k) const;

    /// eta_j = mean_j + sum_k scores_k * phi_k(t_j).
    std::vector<double> eta(std::span<const double> scores) const;

    /// Number of strictly positive entries in `spectrum`.
    int positive_count() const noexcept;
};

}  // namespace evergreen
