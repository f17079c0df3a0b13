#include "evergreen/nelder_mead.hpp"

#include "evergreen/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace evergreen {

std::vector<double> Box::clamp(std::vector<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower[i], upper[i]);
    return x;
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> start,
                             const Box& box, const NelderMeadOptions& options) {
    const std::size_t n = start.size();
    if (box.lower.size() != n || box.upper.size() != n || options.initial_step.size() != n)
        throw ConfigError("nelder_mead: dimension mismatch");

    auto eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> simplex(n + 1);
    std::vector<double> values(n + 1);
    simplex[0] = box.clamp(std::move(start));
    for (std::size_t i = 0; i < n; ++i) {
        auto vertex = simplex[0];
        vertex[i] += options.initial_step[i];
        if (vertex[i] > box.upper[i]) vertex[i] = simplex[0][i] - options.initial_step[i];
        simplex[i + 1] = box.clamp(std::move(vertex));
    }
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    auto affine = [&](const std::vector<double>& base, const std::vector<double>& toward, double coef) {
        std::vector<double> p(n);
        for (std::size_t d = 0; d < n; ++d) p[d] = base[d] + coef * (toward[d] - base[d]);
        return box.clamp(std::move(p));
    };

    NelderMeadResult result;
    for (result.iterations = 0; result.iterations < options.max_iterations; ++result.iterations) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];

        double diameter = 0.0;
        for (std::size_t v = 0; v <= n; ++v)
            for (std::size_t d = 0; d < n; ++d) diameter = std::max(diameter, std::abs(simplex[v][d] - simplex[best][d]));
        const double spread = values[worst] - values[best];
        if (std::isfinite(spread) && spread <= options.f_tolerance * std::abs(values[best]) &&
            diameter <= options.x_tolerance) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t v = 0; v <= n; ++v) {
            if (v == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[v][d] / static_cast<double>(n);
        }

        const auto reflected = affine(centroid, simplex[worst], -1.0);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            const auto expanded = affine(centroid, simplex[worst], -2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const auto contracted = outside ? affine(centroid, reflected, 0.5) : affine(centroid, simplex[worst], 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t v = 0; v <= n; ++v) {
            if (v == best) continue;
            simplex[v] = affine(simplex[best], simplex[v], 0.5);
            values[v] = eval(simplex[v]);
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    return result;
}

}  // namespace evergreen
