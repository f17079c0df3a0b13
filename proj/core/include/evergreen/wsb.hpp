#pragma once

#include "evergreen/poisson_fit.hpp"
#include "evergreen/smoothing.hpp"
#include "evergreen/trajectory.hpp"

#include <span>
#include <string>
#include <vector>

namespace evergreen {

/// Fitness `lambda`, lognormal aging (`mu`, `sigma`) in log-years, and the
/// corpus-wide constant `m`.
struct WsbParams {
    double lambda = 0.0;
    double mu = 0.0;
    double sigma = 1.0;
    double m = 30.0;
};

/// Standard normal CDF via std::erfc; absolute error at the 1e-16 level.
double normal_cdf(double x);

/// C(t) = m * (exp(lambda * Phi((ln t - mu) / sigma)) - 1). Throws ConfigError for t <= 0.
double wsb_cumulative(double t, const WsbParams& p);

/// Annual increments C(t_j) - C(t_{j-1}) with C(t_0) = 0.
std::vector<double> wsb_annual(const WsbParams& p, const TimeGrid& grid);

struct WsbOptions {
    double m = 30.0;
    int max_iterations = 2000;
    bool polish = true;  // one extra Nelder-Mead run from the best multistart
};

struct WsbFit {
    std::string id;
    WsbParams params;
    std::vector<double> cumulative;
    std::vector<double> annual;
    double mse = 0.0;        // on annual counts
    double objective = 0.0;  // least squares on cumulative counts
    bool converged = false;
    int excluded_starts = 0;
    std::string message;
};

/// Sum of squared cumulative-count residuals at the given parameters.
double wsb_objective(const CountTrajectory& traj, const WsbParams& p);

/// Least squares on cumulative counts by box-constrained Nelder-Mead from the
/// four starts mu in {ln 2, ln 8} x sigma in {0.5, 1.5}, lambda = ln(1 + total/m).
/// Box: lambda in [0, 20], mu in [-2, 5], sigma in [0.05, 5]. Throws
/// DataError for an all-zero trajectory.
WsbFit fit_wsb(const CountTrajectory& traj, const WsbOptions& options = {});

/// Rebuilds the fitted curves and mse from stored parameters.
WsbFit wsb_curves(const CountTrajectory& traj, WsbFit fit);

/// Per-item fits; all-zero items come back unconverged instead of throwing.
std::vector<WsbFit> fit_wsb_corpus(const Corpus& corpus, const WsbOptions& options = {}, unsigned threads = 1);

inline constexpr double kMseFloor = 1e-12;

struct ComparisonRow {
    std::string id;
    double log10_mse_wsb = 0.0;
    double log10_mse_fpca = 0.0;
};

struct ModelComparison {
    std::vector<ComparisonRow> rows;
    std::vector<double> eval;
    std::vector<double> density_wsb;   // empty when a KDE is undefined
    std::vector<double> density_fpca;
    double bandwidth_wsb = 0.0;
    double bandwidth_fpca = 0.0;
};

/// Pairs the two models' per-item MSEs (floored at 1e-12 before log10) and
/// estimates Silverman KDEs of both on a shared grid padded by 4 bandwidths.
/// Throws DataError listing the ids present in only one of the inputs.
ModelComparison compare_models(std::span<const PaperFit> fits, std::span<const WsbFit> wsb,
                               std::size_t kde_points = 512);

}  // namespace evergreen
