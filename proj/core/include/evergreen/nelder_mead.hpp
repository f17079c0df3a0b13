#pragma once

#include <functional>
#include <span>
#include <vector>

namespace evergreen {

struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    std::vector<double> clamp(std::vector<double> x) const;
};

struct NelderMeadOptions {
    int max_iterations = 2000;
    double f_tolerance = 1e-12;  // relative spread of simplex values
    double x_tolerance = 1e-9;   // absolute simplex diameter per coordinate
    std::vector<double> initial_step;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Minimizes `f` inside `box`. Every trial point (reflection, expansion,
/// contraction, shrink) is clamped into the box; non-finite objective values
/// rank as +inf. Standard coefficients 1, 2, 1/2, 1/2.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                             const Box& box, const NelderMeadOptions& options);

}  // namespace evergreen
