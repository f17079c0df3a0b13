#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evergreen {

/// A curve sampled on the yearly grid together with its first derivative.
struct SmoothCurve {
    std::vector<double> values;
    std::vector<double> derivative;
    double bandwidth = 0.0;
};

struct LocalPolyFit {
    std::vector<double> values;
    std::vector<double> derivative;
};

/// Gaussian-kernel local polynomial regression of degree 1 or 2, evaluated
/// at each point of `eval`. The value is the local intercept and the
/// derivative the local slope. Throws NumericalError naming the eval point
/// when the weighted design is singular there.
LocalPolyFit local_poly_smooth(std::span<const double> x, std::span<const double> y, int degree,
                               double bandwidth, std::span<const double> eval);

/// Row of the smoother matrix at x0: value(x0) = sum_i weights[i] * y[i].
std::vector<double> local_poly_weights(std::span<const double> x, int degree, double bandwidth, double x0);

/// GCV(h) = n * RSS(h) / (n - tr S_h)^2. Returns +inf when the fit is
/// singular somewhere on the data or tr S_h >= n.
double gcv_score(std::span<const double> x, std::span<const double> y, int degree, double bandwidth);

/// Candidate minimizing GCV; scores within 1e-12 of mean(y^2) count as tied
/// and the smaller bandwidth wins.
double gcv_bandwidth(std::span<const double> x, std::span<const double> y, int degree,
                     std::span<const double> candidates);

inline const std::vector<double>& default_bandwidth_candidates() {
    static const std::vector<double> candidates{1.0, 1.5, 2.0, 3.0, 4.0, 6.0};
    return candidates;
}

struct KdeBandwidth {
    enum class Rule { silverman, fixed };
    Rule rule = Rule::silverman;
    double value = 0.0;

    static KdeBandwidth silverman() { return {}; }
    static KdeBandwidth fixed(double h) { return {Rule::fixed, h}; }
};

struct DensityEstimate {
    std::vector<double> eval;
    std::vector<double> density;
    double bandwidth = 0.0;
};

/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd when the IQR is
/// zero. Throws NumericalError for fewer than two samples or zero variance.
double silverman_bandwidth(std::span<const double> samples);

DensityEstimate gaussian_kde(std::span<const double> samples, KdeBandwidth bandwidth, std::span<const double> eval);

/// `points` equally spaced values covering [min - 4h, max + 4h].
std::vector<double> kde_eval_grid(std::span<const double> samples, double bandwidth, std::size_t points);

}  // namespace evergreen
