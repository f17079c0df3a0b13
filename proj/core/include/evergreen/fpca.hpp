#pragma once

#include "evergreen/latent_basis.hpp"
#include "evergreen/poisson_fit.hpp"
#include "evergreen/smoothing.hpp"
#include "evergreen/symmetric_eigen.hpp"
#include "evergreen/trajectory.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace evergreen {

/// How the mean of ln(y+1) is smoothed: a fixed bandwidth, or GCV over
/// `candidates`.
struct MeanPolicy {
    std::optional<double> bandwidth;
    std::vector<double> candidates = default_bandwidth_candidates();
    int degree = 2;
};

struct BasisPolicy {
    enum class Kind { fixed, fve };
    Kind kind = Kind::fixed;
    int k = 4;
    double tau = 0.9;

    static BasisPolicy fixed(int k) { return {Kind::fixed, k, 0.9}; }
    static BasisPolicy fve(double tau) { return {Kind::fve, 0, tau}; }
};

/// Per-year average of ln(y+1) across items.
std::vector<double> cross_sectional_log_mean(const Corpus& corpus);

/// Smoothed cross-sectional mean of ln(y+1) with its derivative (degree-2
/// local polynomial by default).
SmoothCurve estimate_mean(const Corpus& corpus, const MeanPolicy& policy = {});

/// C(t_j, t_l) = 1/(n-1) sum_i (z_ij - mean_j)(z_il - mean_l).
Eigen::MatrixXd covariance_matrix(const Corpus& corpus, std::span<const double> mean);

/// Keeps the leading eigenpairs per `policy`. Eigenvalues at or below 1e-12 * max(1, largest) are clamped
/// to zero and excluded from the FVE denominator. Throws ConfigError when K
/// exceeds the number of positive eigenvalues.
LatentBasis truncate_basis(const SymmetricEigen& eigen, const SmoothCurve& mean, BasisPolicy policy,
                           std::vector<double> raw_mean = {});

/// estimate_mean, covariance_matrix, eigendecompose_symmetric and
/// truncate_basis in sequence.
LatentBasis estimate_basis(const Corpus& corpus, const MeanPolicy& mean_policy, BasisPolicy basis_policy);

struct SelectionRow {
    int k = 0;
    double cv_loglik = 0.0;       // mean held-out per-item log-likelihood
    double aic = 0.0;             // -2 * cv_loglik + 2K
    double insample_loglik = 0.0; // total over all items, full-data basis
    double fve = 0.0;
    int excluded = 0;             // held-out fits that did not converge
};

struct SelectionTable {
    std::vector<SelectionRow> rows;
    int recommended_k = 0;  // argmin AIC, ties to the smaller K
    int folds = 0;
};

struct SelectionOptions {
    std::vector<int> k_values{1, 2, 3, 4, 5, 6, 7, 8};
    int folds = 5;
    FitOptions fit;
    unsigned threads = 1;
};

/// Cross-validated choice of the number of eigenfunctions. Items are assigned
/// to fold (index mod folds). For each fold the mean (at `basis.bandwidth`)
/// and eigenbasis are re-estimated on the training items; held-out items fit
/// their own scores against that basis. `basis` must carry at least max K
/// eigenfunctions and provides the in-sample column.
SelectionTable select_k_loglik(const Corpus& corpus, const LatentBasis& basis, const SelectionOptions& options = {});

}  // namespace evergreen
