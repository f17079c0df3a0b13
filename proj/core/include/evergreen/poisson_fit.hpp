#pragma once

#include "evergreen/latent_basis.hpp"
#include "evergreen/trajectory.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace evergreen {

/// Largest linear predictor accepted before the likelihood is declared
/// divergent; exp(700) is close to the double-precision limit.
inline constexpr double kEtaOverflow = 700.0;

/// Poisson log-likelihood without the log(y!) term:
/// sum_j [y_j * eta_j - exp(eta_j)]. Values are comparable only with other
/// likelihoods computed here. Throws NumericalError if any eta_j > 700.
double poisson_loglik(std::span<const Count> counts, std::span<const double> eta);

struct GradHess {
    Eigen::VectorXd gradient;  // g_k = sum_j (y_j - e^eta_j) phi_k(t_j)
    Eigen::MatrixXd hessian;   // H_kl = -sum_j e^eta_j phi_k(t_j) phi_l(t_j)
};

GradHess loglik_grad_hess(std::span<const Count> counts, std::span<const double> eta, const LatentBasis& basis);

struct FitOptions {
    int max_iterations = 100;
    int max_halvings = 30;
    double gradient_tolerance = 1e-8;
    double step_tolerance = 1e-10;
    /// Also converged once the predicted gain g' step is below this fraction
    /// of 1 + |loglik|, where rounding decides step acceptance.
    double decrement_tolerance = 1e-13;
    double ridge = 1e-6;
};

struct PaperFit {
    std::string id;
    std::vector<double> scores;
    std::vector<double> eta;
    std::vector<double> intensity;
    double loglik = 0.0;
    double mse = 0.0;
    int iterations = 0;
    bool converged = false;
    bool ridge = false;  // fitted with the ridge fallback
    std::string message;
};

/// Maximizes the Poisson likelihood over the scores by Newton's method with
/// step halving, starting from the projection of ln(y+1) - mean onto the
/// basis. The objective is concave, so a converged point is the global
/// maximum. If the starting point overflows or the Hessian loses definiteness,
/// the fit restarts from zero on l(xi) - ridge/2 * |xi|^2 and sets `ridge`.
PaperFit fit_scores(const CountTrajectory& traj, const LatentBasis& basis, const FitOptions& options = {});

/// Independent per-item fits; failures are recorded in the fit, never thrown.
/// The output is identical for any thread count.
std::vector<PaperFit> fit_corpus(const Corpus& corpus, const LatentBasis& basis, const FitOptions& options = {},
                                 unsigned threads = 1);

/// (1/T) sum_j (y_j - intensity_j)^2.
double fit_mse(std::span<const Count> counts, std::span<const double> intensity);

/// Rebuilds eta, intensity, loglik and mse from stored scores.
PaperFit refit_curves(const CountTrajectory& traj, const LatentBasis& basis, PaperFit fit);

}  // namespace evergreen
