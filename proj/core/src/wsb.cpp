#include "evergreen/wsb.hpp"

#include "evergreen/error.hpp"
#include "evergreen/nelder_mead.hpp"
#include "evergreen/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <unordered_map>

namespace evergreen {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double wsb_cumulative(double t, const WsbParams& p) {
    if (!(t > 0.0)) throw ConfigError("WSB cumulative curve is defined for t > 0 only");
    return p.m * std::expm1(p.lambda * normal_cdf((std::log(t) - p.mu) / p.sigma));
}

std::vector<double> wsb_annual(const WsbParams& p, const TimeGrid& grid) {
    std::vector<double> annual(grid.size());
    double previous = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double c = wsb_cumulative(grid.at(j), p);
        annual[j] = c - previous;
        previous = c;
    }
    return annual;
}

double wsb_objective(const CountTrajectory& traj, const WsbParams& p) {
    double ss = 0.0;
    Count observed = 0;
    for (std::size_t j = 0; j < traj.counts.size(); ++j) {
        observed += traj.counts[j];
        const double r = static_cast<double>(observed) - wsb_cumulative(static_cast<double>(j + 1), p);
        ss += r * r;
    }
    return ss;
}

WsbFit wsb_curves(const CountTrajectory& traj, WsbFit fit) {
    const TimeGrid grid(traj.counts.size());
    fit.id = traj.id;
    fit.annual = wsb_annual(fit.params, grid);
    fit.cumulative.resize(grid.size());
    double running = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) fit.cumulative[j] = running += fit.annual[j];
    fit.mse = fit_mse(traj.counts, fit.annual);
    return fit;
}

WsbFit fit_wsb(const CountTrajectory& traj, const WsbOptions& options) {
    if (!(options.m > 0.0)) throw ConfigError("WSB constant m must be positive");
    const Count total = traj.total();
    if (total < 1) throw DataError("WSB fit needs at least one event; item '" + traj.id + "' is all zero");

    const Box box{{0.0, -2.0, 0.05}, {20.0, 5.0, 5.0}};
    NelderMeadOptions nm;
    nm.max_iterations = options.max_iterations;
    nm.initial_step = {0.5, 0.5, 0.3};

    auto objective = [&](std::span<const double> x) {
        return wsb_objective(traj, WsbParams{x[0], x[1], x[2], options.m});
    };

    const double lambda0 = std::log1p(static_cast<double>(total) / options.m);
    WsbFit fit;
    fit.id = traj.id;
    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (double mu0 : {std::numbers::ln2, std::log(8.0)}) {
        for (double sigma0 : {0.5, 1.5}) {
            const std::vector<double> start = box.clamp({lambda0, mu0, sigma0});
            if (!std::isfinite(objective(start))) {
                ++fit.excluded_starts;
                continue;
            }
            NelderMeadResult run = nelder_mead(objective, start, box, nm);
            if (run.value < best.value) best = std::move(run);
        }
    }
    if (!std::isfinite(best.value)) {
        fit.converged = false;
        fit.message = "every multistart produced a non-finite objective";
        fit.params = WsbParams{lambda0, std::numbers::ln2, 0.5, options.m};
        fit.objective = std::numeric_limits<double>::max();
        return wsb_curves(traj, std::move(fit));
    }
    if (options.polish) {
        NelderMeadResult polished = nelder_mead(objective, best.x, box, nm);
        if (polished.value <= best.value) best = std::move(polished);
    }
    fit.params = WsbParams{best.x[0], best.x[1], best.x[2], options.m};
    fit.objective = best.value;
    fit.converged = best.converged;
    if (!best.converged) fit.message = "Nelder-Mead iteration cap reached";
    return wsb_curves(traj, std::move(fit));
}

std::vector<WsbFit> fit_wsb_corpus(const Corpus& corpus, const WsbOptions& options, unsigned threads) {
    std::vector<WsbFit> fits(corpus.size());
    parallel_for(corpus.size(), threads, [&](std::size_t i) {
        try {
            fits[i] = fit_wsb(corpus[i], options);
        } catch (const DataError& e) {
            WsbFit failed;
            failed.params = WsbParams{0.0, std::numbers::ln2, 0.5, options.m};
            failed.message = e.what();
            fits[i] = wsb_curves(corpus[i], std::move(failed));
        }
    });
    return fits;
}

ModelComparison compare_models(std::span<const PaperFit> fits, std::span<const WsbFit> wsb, std::size_t kde_points) {
    std::unordered_map<std::string, const WsbFit*> by_id;
    for (const auto& w : wsb) by_id.emplace(w.id, &w);
    std::set<std::string> fpca_ids;
    for (const auto& f : fits) fpca_ids.insert(f.id);

    std::set<std::string> only;
    for (const auto& f : fits)
        if (!by_id.contains(f.id)) only.insert(f.id);
    for (const auto& w : wsb)
        if (!fpca_ids.contains(w.id)) only.insert(w.id);
    if (!only.empty() || fits.empty()) {
        std::string listing;
        for (const auto& id : only) listing += (listing.empty() ? "" : ", ") + id;
        throw DataError(fits.empty() ? "model comparison: no items in common"
                                     : "model comparison: ids present in only one model: " + listing);
    }

    ModelComparison out;
    std::vector<double> log_wsb, log_fpca;
    for (const auto& f : fits) {
        const WsbFit& w = *by_id.at(f.id);
        ComparisonRow row{f.id, std::log10(std::max(w.mse, kMseFloor)), std::log10(std::max(f.mse, kMseFloor))};
        log_wsb.push_back(row.log10_mse_wsb);
        log_fpca.push_back(row.log10_mse_fpca);
        out.rows.push_back(std::move(row));
    }

    try {
        out.bandwidth_wsb = silverman_bandwidth(log_wsb);
        out.bandwidth_fpca = silverman_bandwidth(log_fpca);
    } catch (const NumericalError&) {
        return out;
    }
    std::vector<double> pooled = log_wsb;
    pooled.insert(pooled.end(), log_fpca.begin(), log_fpca.end());
    out.eval = kde_eval_grid(pooled, std::max(out.bandwidth_wsb, out.bandwidth_fpca), kde_points);
    out.density_wsb = gaussian_kde(log_wsb, KdeBandwidth::fixed(out.bandwidth_wsb), out.eval).density;
    out.density_fpca = gaussian_kde(log_fpca, KdeBandwidth::fixed(out.bandwidth_fpca), out.eval).density;
    return out;
}

}  // namespace evergreen
