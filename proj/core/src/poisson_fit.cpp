#include "evergreen/poisson_fit.hpp"

#include "evergreen/error.hpp"
#include "evergreen/parallel.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace evergreen {

LatentBasis LatentBasis::prefix(int k) const {
    if (k < 0 || k > this->k()) throw ConfigError("basis prefix " + std::to_string(k) + " exceeds K = " + std::to_string(this->k()));
    LatentBasis out = *this;
    out.eigenvalues.resize(static_cast<std::size_t>(k));
    out.eigenfunctions = eigenfunctions.topRows(k);
    return out;
}

std::vector<double> LatentBasis::eta(std::span<const double> scores) const {
    if (static_cast<int>(scores.size()) != k()) throw ConfigError("score vector length does not match basis K");
    std::vector<double> out(mean);
    for (int kk = 0; kk < k(); ++kk)
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] += scores[static_cast<std::size_t>(kk)] * eigenfunctions(kk, static_cast<Eigen::Index>(j));
    return out;
}

int LatentBasis::positive_count() const noexcept {
    int n = 0;
    for (double v : spectrum)
        if (v > 0.0) ++n;
    return n;
}

double poisson_loglik(std::span<const Count> counts, std::span<const double> eta) {
    if (counts.size() != eta.size()) throw ConfigError("poisson_loglik: length mismatch");
    double ll = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (eta[j] > kEtaOverflow) throw NumericalError("linear predictor exceeds 700: divergence guard");
        ll += static_cast<double>(counts[j]) * eta[j] - std::exp(eta[j]);
    }
    return ll;
}

GradHess loglik_grad_hess(std::span<const Count> counts, std::span<const double> eta, const LatentBasis& basis) {
    if (counts.size() != eta.size() || eta.size() != basis.grid_size)
        throw ConfigError("loglik_grad_hess: length mismatch");
    const int k = basis.k();
    GradHess out{Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, k)};
    const auto& phi = basis.eigenfunctions;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (eta[j] > kEtaOverflow) throw NumericalError("linear predictor exceeds 700: divergence guard");
        const double lambda = std::exp(eta[j]);
        const double resid = static_cast<double>(counts[j]) - lambda;
        const auto col = phi.col(static_cast<Eigen::Index>(j));
        out.gradient += resid * col;
        out.hessian.noalias() -= lambda * col * col.transpose();
    }
    return out;
}

double fit_mse(std::span<const Count> counts, std::span<const double> intensity) {
    if (counts.size() != intensity.size() || counts.empty()) throw ConfigError("fit_mse: length mismatch");
    double ss = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        const double r = static_cast<double>(counts[j]) - intensity[j];
        ss += r * r;
    }
    return ss / static_cast<double>(counts.size());
}

namespace {

struct Overflow {};

struct NewtonOutcome {
    Eigen::VectorXd scores;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

// Penalized objective l(xi) - ridge/2 |xi|^2, -inf when the guard trips.
double objective(const CountTrajectory& traj, const LatentBasis& basis, const Eigen::VectorXd& xi, double ridge,
                 std::vector<double>& eta) {
    eta = basis.eta(std::span<const double>(xi.data(), static_cast<std::size_t>(xi.size())));
    for (double e : eta)
        if (e > kEtaOverflow) return -std::numeric_limits<double>::infinity();
    return poisson_loglik(traj.counts, eta) - 0.5 * ridge * xi.squaredNorm();
}

NewtonOutcome newton(const CountTrajectory& traj, const LatentBasis& basis, Eigen::VectorXd xi, double ridge,
                     const FitOptions& opt) {
    std::vector<double> eta;
    double ll = objective(traj, basis, xi, ridge, eta);
    if (!std::isfinite(ll)) throw Overflow{};

    NewtonOutcome out;
    std::vector<double> trial_eta;
    for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
        GradHess gh = loglik_grad_hess(traj.counts, eta, basis);
        if (ridge > 0.0) {
            gh.gradient -= ridge * xi;
            gh.hessian.diagonal().array() -= ridge;
        }
        if (gh.gradient.cwiseAbs().maxCoeff() < opt.gradient_tolerance) {
            out.converged = true;
            break;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(-gh.hessian);
        if (llt.info() != Eigen::Success) {
            if (ridge == 0.0) throw Overflow{};
            out.message = "Hessian not negative definite";
            break;
        }
        const Eigen::VectorXd step = llt.solve(gh.gradient);
        if (!step.allFinite()) {
            if (ridge == 0.0) throw Overflow{};
            out.message = "non-finite Newton step";
            break;
        }
        if (step.cwiseAbs().maxCoeff() < opt.step_tolerance ||
            gh.gradient.dot(step) < opt.decrement_tolerance * (1.0 + std::abs(ll))) {
            xi += step;
            ll = objective(traj, basis, xi, ridge, eta);
            out.converged = true;
            ++out.iterations;
            break;
        }
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, scale *= 0.5) {
            const Eigen::VectorXd candidate = xi + scale * step;
            const double trial = objective(traj, basis, candidate, ridge, trial_eta);
            if (trial >= ll) {
                xi = candidate;
                ll = trial;
                eta.swap(trial_eta);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.message = "step halving failed to increase the likelihood";
            break;
        }
    }
    if (!out.converged && out.message.empty()) out.message = "iteration cap reached";
    out.scores = std::move(xi);
    return out;
}

}  // namespace

PaperFit refit_curves(const CountTrajectory& traj, const LatentBasis& basis, PaperFit fit) {
    fit.id = traj.id;
    fit.eta = basis.eta(fit.scores);
    fit.intensity.resize(fit.eta.size());
    for (std::size_t j = 0; j < fit.eta.size(); ++j) fit.intensity[j] = std::exp(fit.eta[j]);
    fit.loglik = poisson_loglik(traj.counts, fit.eta);
    fit.mse = fit_mse(traj.counts, fit.intensity);
    return fit;
}

PaperFit fit_scores(const CountTrajectory& traj, const LatentBasis& basis, const FitOptions& options) {
    if (traj.counts.size() != basis.grid_size) throw ConfigError("fit_scores: trajectory and basis grids differ");
    const int k = basis.k();
    PaperFit fit;
    fit.id = traj.id;

    if (k == 0) {
        fit.converged = true;
        return refit_curves(traj, basis, std::move(fit));
    }

    const std::vector<double> z = log_transform(traj);
    Eigen::VectorXd start(k);
    for (int kk = 0; kk < k; ++kk) {
        double s = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j)
            s += (z[j] - basis.mean[j]) * basis.eigenfunctions(kk, static_cast<Eigen::Index>(j));
        start(kk) = s * basis.delta;
    }

    NewtonOutcome outcome;
    try {
        outcome = newton(traj, basis, start, 0.0, options);
    } catch (const Overflow&) {
        fit.ridge = true;
        try {
            outcome = newton(traj, basis, Eigen::VectorXd::Zero(k), options.ridge, options);
        } catch (const Overflow&) {
            outcome = NewtonOutcome{Eigen::VectorXd::Zero(k), 0, false, "divergence guard tripped at the origin"};
        }
    }
    fit.scores.assign(outcome.scores.data(), outcome.scores.data() + k);
    fit.iterations = outcome.iterations;
    fit.converged = outcome.converged;
    fit.message = fit.ridge && outcome.message.empty() ? "ridge fallback" : outcome.message;
    return refit_curves(traj, basis, std::move(fit));
}

std::vector<PaperFit> fit_corpus(const Corpus& corpus, const LatentBasis& basis, const FitOptions& options,
                                 unsigned threads) {
    if (corpus.grid().size() != basis.grid_size) throw ConfigError("fit_corpus: corpus and basis grids differ");
    std::vector<PaperFit> fits(corpus.size());
    parallel_for(corpus.size(), threads, [&](std::size_t i) {
        try {
            fits[i] = fit_scores(corpus[i], basis, options);
        } catch (const Error& e) {
            fits[i].id = corpus[i].id;
            fits[i].scores.assign(static_cast<std::size_t>(basis.k()), 0.0);
            fits[i].converged = false;
            fits[i].message = e.what();
        }
    });
    return fits;
}

}  // namespace evergreen
