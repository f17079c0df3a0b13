#pragma once

#include <span>
#include <vector>

namespace evergreen::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator).
double sd(std::span<const double> x);
/// Linear-interpolation quantile (type 7), p in [0, 1].
double quantile(std::vector<double> x, double p);
double median(std::vector<double> x);
double pearson(std::span<const double> x, std::span<const double> y);
/// Composite trapezoid rule over possibly nonuniform abscissae.
double trapezoid(std::span<const double> x, std::span<const double> y);

}  // namespace evergreen::stats
