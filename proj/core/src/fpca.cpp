#include "evergreen/fpca.hpp"

#include "evergreen/error.hpp"
#include "evergreen/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace evergreen {

std::vector<double> cross_sectional_log_mean(const Corpus& corpus) {
    if (corpus.empty()) throw DataError("cannot estimate a mean from an empty corpus");
    const std::size_t t = corpus.grid().size();
    std::vector<double> mean(t, 0.0);
    for (const auto& item : corpus.items())
        for (std::size_t j = 0; j < t; ++j) mean[j] += std::log1p(static_cast<double>(item.counts[j]));
    for (double& m : mean) m /= static_cast<double>(corpus.size());
    return mean;
}

SmoothCurve estimate_mean(const Corpus& corpus, const MeanPolicy& policy) {
    const std::vector<double> raw = cross_sectional_log_mean(corpus);
    const std::vector<double> x = corpus.grid().points();
    const double h = policy.bandwidth ? *policy.bandwidth : gcv_bandwidth(x, raw, policy.degree, policy.candidates);
    auto fit = local_poly_smooth(x, raw, policy.degree, h, x);
    return {std::move(fit.values), std::move(fit.derivative), h};
}

Eigen::MatrixXd covariance_matrix(const Corpus& corpus, std::span<const double> mean) {
    if (corpus.size() < 2) throw DataError("covariance needs at least two items");
    const auto t = static_cast<Eigen::Index>(corpus.grid().size());
    if (mean.size() != static_cast<std::size_t>(t)) throw ConfigError("covariance_matrix: mean length mismatch");
    Eigen::MatrixXd dev(static_cast<Eigen::Index>(corpus.size()), t);
    for (std::size_t i = 0; i < corpus.size(); ++i)
        for (Eigen::Index j = 0; j < t; ++j)
            dev(static_cast<Eigen::Index>(i), j) =
                std::log1p(static_cast<double>(corpus[i].counts[static_cast<std::size_t>(j)])) -
                mean[static_cast<std::size_t>(j)];
    Eigen::MatrixXd cov = dev.transpose() * dev / static_cast<double>(corpus.size() - 1);
    return 0.5 * (cov + cov.transpose());
}

LatentBasis truncate_basis(const SymmetricEigen& eigen, const SmoothCurve& mean, BasisPolicy policy,
                           std::vector<double> raw_mean) {
    LatentBasis basis;
    basis.grid_size = mean.values.size();
    if (static_cast<std::size_t>(eigen.eigenfunctions.cols()) != basis.grid_size)
        throw ConfigError("truncate_basis: eigenfunctions and mean have different grids");
    basis.bandwidth = mean.bandwidth;
    basis.raw_mean = std::move(raw_mean);
    basis.mean = mean.values;
    basis.mean_derivative = mean.derivative;
    // Eigenvalues at rounding level relative to the largest one are noise.
    double largest = 0.0;
    for (double v : eigen.eigenvalues) largest = std::max(largest, v);
    const double floor = 1e-12 * std::max(1.0, largest);
    basis.spectrum.reserve(eigen.eigenvalues.size());
    for (double v : eigen.eigenvalues) basis.spectrum.push_back(v > floor ? v : 0.0);

    double total = 0.0;
    for (double v : basis.spectrum) total += v;
    basis.fve.resize(basis.spectrum.size());
    double running = 0.0;
    for (std::size_t k = 0; k < basis.spectrum.size(); ++k) {
        running += basis.spectrum[k];
        basis.fve[k] = total > 0.0 ? std::min(1.0, running / total) : 0.0;
    }

    const int positive = basis.positive_count();
    int keep = 0;
    if (policy.kind == BasisPolicy::Kind::fixed) {
        if (policy.k < 0) throw ConfigError("number of eigenfunctions must be nonnegative");
        keep = policy.k;
    } else {
        if (!(policy.tau > 0.0 && policy.tau <= 1.0)) throw ConfigError("FVE threshold must lie in (0, 1]");
        keep = positive;
        for (int k = 0; k < positive; ++k)
            if (basis.fve[static_cast<std::size_t>(k)] >= policy.tau - 1e-12) {
                keep = k + 1;
                break;
            }
    }
    if (keep > positive)
        throw ConfigError("requested " + std::to_string(keep) + " eigenfunctions but only " + std::to_string(positive) +
                          " eigenvalues are positive");
    basis.eigenvalues.assign(basis.spectrum.begin(), basis.spectrum.begin() + keep);
    basis.eigenfunctions = eigen.eigenfunctions.topRows(keep);
    return basis;
}

LatentBasis estimate_basis(const Corpus& corpus, const MeanPolicy& mean_policy, BasisPolicy basis_policy) {
    SmoothCurve mean = estimate_mean(corpus, mean_policy);
    const Eigen::MatrixXd cov = covariance_matrix(corpus, mean.values);
    const SymmetricEigen eigen = eigendecompose_symmetric(cov, corpus.grid().delta());
    return truncate_basis(eigen, mean, basis_policy, cross_sectional_log_mean(corpus));
}

SelectionTable select_k_loglik(const Corpus& corpus, const LatentBasis& basis, const SelectionOptions& options) {
    if (options.folds < 2) throw ConfigError("K selection needs at least two folds");
    if (options.k_values.empty()) throw ConfigError("K selection needs a nonempty K range");
    if (corpus.size() < static_cast<std::size_t>(2 * options.folds))
        throw DataError("K selection needs at least two items per fold");
    std::vector<int> ks = options.k_values;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    if (ks.front() < 0 || ks.back() > basis.k())
        throw ConfigError("K range exceeds the " + std::to_string(basis.k()) + " available eigenfunctions");

    const std::size_t n = corpus.size();
    const std::size_t folds = static_cast<std::size_t>(options.folds);
    std::vector<double> cv_sum(ks.size(), 0.0);
    std::vector<int> cv_count(ks.size(), 0);
    std::vector<int> excluded(ks.size(), 0);

    MeanPolicy mean_policy;
    mean_policy.bandwidth = basis.bandwidth;
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, held;
        for (std::size_t i = 0; i < n; ++i) (i % folds == f ? held : train).push_back(i);
        const Corpus training = corpus.subset(train);
        const Corpus holdout = corpus.subset(held);
        const LatentBasis fold_basis = estimate_basis(training, mean_policy, BasisPolicy::fixed(ks.back()));
        for (std::size_t c = 0; c < ks.size(); ++c) {
            const auto fits = fit_corpus(holdout, fold_basis.prefix(ks[c]), options.fit, options.threads);
            for (const auto& fit : fits) {
                if (!fit.converged) {
                    ++excluded[c];
                    continue;
                }
                cv_sum[c] += fit.loglik;
                ++cv_count[c];
            }
        }
    }

    SelectionTable table;
    table.folds = options.folds;
    double best_aic = 0.0;
    for (std::size_t c = 0; c < ks.size(); ++c) {
        SelectionRow row;
        row.k = ks[c];
        row.excluded = excluded[c];
        if (cv_count[c] == 0) throw NumericalError("no held-out fit converged for K = " + std::to_string(ks[c]));
        row.cv_loglik = cv_sum[c] / cv_count[c];
        row.aic = -2.0 * row.cv_loglik + 2.0 * row.k;
        row.fve = row.k == 0 ? 0.0 : basis.fve[static_cast<std::size_t>(row.k - 1)];
        const auto fits = fit_corpus(corpus, basis.prefix(row.k), options.fit, options.threads);
        for (const auto& fit : fits) row.insample_loglik += fit.loglik;
        if (table.rows.empty() || row.aic < best_aic) {
            best_aic = row.aic;
            table.recommended_k = row.k;
        }
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace evergreen
