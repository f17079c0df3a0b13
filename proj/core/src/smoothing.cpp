#include "evergreen/smoothing.hpp"

#include "evergreen/error.hpp"
#include "evergreen/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace evergreen {

namespace {

void check_degree_bandwidth(int degree, double bandwidth) {
    if (degree != 1 && degree != 2) throw ConfigError("local polynomial degree must be 1 or 2");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw ConfigError("bandwidth must be positive");
}

[[noreturn]] void singular_at(double x0) {
    std::ostringstream msg;
    msg << "local polynomial design is singular at eval point " << x0;
    throw NumericalError(msg.str());
}

// Weights for the intercept (row 0) and slope (row 1) of the local fit at x0.
// The design is built in the scaled variable v = (x - x0) / h, so the slope
// row is divided by h on the way out.
Eigen::MatrixXd local_weights(std::span<const double> x, int degree, double h, double x0) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const int p = degree + 1;
    Eigen::MatrixXd design(n, p);
    Eigen::VectorXd w(n);
    Eigen::Index effective = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = (x[static_cast<std::size_t>(i)] - x0) / h;
        w(i) = std::exp(-0.5 * v * v);
        if (w(i) > 0.0) ++effective;
        double power = 1.0;
        for (int a = 0; a < p; ++a, power *= v) design(i, a) = power;
    }
    if (effective < p) singular_at(x0);

    const Eigen::MatrixXd weighted = design.transpose() * w.asDiagonal();
    const Eigen::MatrixXd normal = weighted * design;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(normal, Eigen::EigenvaluesOnly);
    const auto& ev = spectrum.eigenvalues();
    if (!(ev(0) > 1e-12 * ev(p - 1))) singular_at(x0);

    Eigen::MatrixXd rows = normal.ldlt().solve(weighted).topRows(2);
    rows.row(1) /= h;
    return rows;
}

}  // namespace

LocalPolyFit local_poly_smooth(std::span<const double> x, std::span<const double> y, int degree,
                               double bandwidth, std::span<const double> eval) {
    check_degree_bandwidth(degree, bandwidth);
    if (x.size() != y.size()) throw ConfigError("local_poly_smooth: x and y differ in length");
    if (x.size() < static_cast<std::size_t>(degree + 1))
        throw NumericalError("local_poly_smooth: fewer data points than degree + 1");

    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    LocalPolyFit fit;
    fit.values.resize(eval.size());
    fit.derivative.resize(eval.size());
    for (std::size_t e = 0; e < eval.size(); ++e) {
        const Eigen::MatrixXd rows = local_weights(x, degree, bandwidth, eval[e]);
        fit.values[e] = rows.row(0).dot(yv);
        fit.derivative[e] = rows.row(1).dot(yv);
    }
    return fit;
}

std::vector<double> local_poly_weights(std::span<const double> x, int degree, double bandwidth, double x0) {
    check_degree_bandwidth(degree, bandwidth);
    const Eigen::MatrixXd rows = local_weights(x, degree, bandwidth, x0);
    std::vector<double> weights(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index i = 0; i < rows.cols(); ++i) weights[static_cast<std::size_t>(i)] = rows(0, i);
    return weights;
}

double gcv_score(std::span<const double> x, std::span<const double> y, int degree, double bandwidth) {
    check_degree_bandwidth(degree, bandwidth);
    if (x.size() != y.size()) throw ConfigError("gcv_score: x and y differ in length");
    const auto n = static_cast<double>(x.size());
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    double rss = 0.0;
    double trace = 0.0;
    try {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Eigen::MatrixXd rows = local_weights(x, degree, bandwidth, x[i]);
            const double fitted = rows.row(0).dot(yv);
            rss += (y[i] - fitted) * (y[i] - fitted);
            trace += rows(0, static_cast<Eigen::Index>(i));
        }
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
    }
    const double dof = n - trace;
    if (!(dof > 1e-8 * n)) return std::numeric_limits<double>::infinity();
    return n * rss / (dof * dof);
}

double gcv_bandwidth(std::span<const double> x, std::span<const double> y, int degree,
                     std::span<const double> candidates) {
    if (candidates.empty()) throw ConfigError("gcv_bandwidth: no candidate bandwidths");
    std::vector<double> sorted(candidates.begin(), candidates.end());
    std::sort(sorted.begin(), sorted.end());

    double mean_square = 0.0;
    for (double v : y) mean_square += v * v;
    mean_square /= std::max<double>(1.0, static_cast<double>(y.size()));
    const double tie = 1e-12 * std::max(mean_square, std::numeric_limits<double>::min());

    double best_h = 0.0;
    double best_score = std::numeric_limits<double>::infinity();
    for (double h : sorted) {
        const double score = gcv_score(x, y, degree, h);
        if (!std::isfinite(score)) continue;
        if (!std::isfinite(best_score) || score < best_score - tie) {
            best_score = score;
            best_h = h;
        }
    }
    if (!std::isfinite(best_score)) throw NumericalError("gcv_bandwidth: every candidate bandwidth is singular");
    return best_h;
}

double silverman_bandwidth(std::span<const double> samples) {
    if (samples.size() < 2) throw NumericalError("Silverman bandwidth needs at least two samples");
    const double sd = stats::sd(samples);
    if (!(sd > 0.0))
        throw NumericalError("samples have zero variance; Silverman bandwidth undefined, use a fixed bandwidth");
    std::vector<double> v(samples.begin(), samples.end());
    const double iqr = stats::quantile(v, 0.75) - stats::quantile(v, 0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

DensityEstimate gaussian_kde(std::span<const double> samples, KdeBandwidth bandwidth, std::span<const double> eval) {
    if (samples.empty()) throw NumericalError("gaussian_kde: no samples");
    double h = bandwidth.value;
    if (bandwidth.rule == KdeBandwidth::Rule::silverman) {
        h = silverman_bandwidth(samples);
    } else if (!(h > 0.0) || !std::isfinite(h)) {
        throw ConfigError("gaussian_kde: fixed bandwidth must be positive");
    }
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    DensityEstimate out{{eval.begin(), eval.end()}, std::vector<double>(eval.size(), 0.0), h};
    for (std::size_t e = 0; e < eval.size(); ++e) {
        double sum = 0.0;
        for (double s : samples) {
            const double u = (eval[e] - s) / h;
            sum += std::exp(-0.5 * u * u);
        }
        out.density[e] = norm * sum;
    }
    return out;
}

std::vector<double> kde_eval_grid(std::span<const double> samples, double bandwidth, std::size_t points) {
    if (samples.empty()) throw NumericalError("kde_eval_grid: no samples");
    if (points < 2) throw ConfigError("kde_eval_grid: need at least two points");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it - 4.0 * bandwidth;
    const double hi = *hi_it + 4.0 * bandwidth;
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

}  // namespace evergreen
