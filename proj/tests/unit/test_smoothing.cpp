#include "evergreen/error.hpp"
#include "evergreen/rng.hpp"
#include "evergreen/smoothing.hpp"
#include "evergreen/stats.hpp"
#include "evergreen/synthgen.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace evergreen;

namespace {

std::vector<double> range(int lo, int hi) {
    std::vector<double> x;
    for (int i = lo; i <= hi; ++i) x.push_back(i);
    return x;
}

// Smoother matrix rebuilt row by row from the explicit normal equations.
Eigen::MatrixXd smoother_matrix(const std::vector<double>& x, int degree, double h) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd s(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::MatrixXd X(n, degree + 1);
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(r)];
            w(i) = std::exp(-0.5 * d * d / (h * h));
            for (int p = 0; p <= degree; ++p) X(i, p) = std::pow(d, p);
        }
        const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
        s.row(r) = (XtW * X).inverse().row(0) * XtW;
    }
    return s;
}

}  // namespace

TEST(LocalPoly, LinearReproducesAffineExactly) {
    const auto x = range(1, 10);
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    for (double h : {0.5, 1.0, 3.0, 50.0}) {
        const auto fit = local_poly_smooth(x, y, 1, h, x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_NEAR(fit.values[i], y[i], 1e-9 * std::abs(y[i]));
            EXPECT_NEAR(fit.derivative[i], 2.0, 1e-9);
        }
    }
}

TEST(LocalPoly, ConstantAndShiftEquivariance) {
    const auto x = range(1, 30);
    std::vector<double> y(x.size(), 5.0);
    const auto fit = local_poly_smooth(x, y, 2, 2.0, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(fit.values[i], 5.0, 1e-9);
        EXPECT_NEAR(fit.derivative[i], 0.0, 1e-9);
    }
    std::mt19937_64 rng(4);
    std::vector<double> noisy, shifted;
    for (double v : x) {
        noisy.push_back(std::sin(v / 4) + 0.3 * standard_normal(rng));
        shifted.push_back(noisy.back() + 7.5);
    }
    const auto a = local_poly_smooth(x, noisy, 2, 1.5, x);
    const auto b = local_poly_smooth(x, shifted, 2, 1.5, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(b.values[i], a.values[i] + 7.5, 1e-9);
        EXPECT_NEAR(b.derivative[i], a.derivative[i], 1e-9);
    }
}

TEST(LocalPoly, QuadraticMatchesExplicitNormalEquations) {
    const auto x = range(1, 30);
    std::mt19937_64 rng(11);
    std::vector<double> y;
    for (double v : x) y.push_back(std::log(2 * std::pow(v, 1.5) * std::exp(-v / 8) + 0.5) + 0.2 * standard_normal(rng));
    const double h = 2.0, x0 = 5.0;

    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x0;
        const double w = std::exp(-0.5 * d * d / (h * h));
        const Eigen::Vector3d row(1.0, d, d * d);
        A += w * row * row.transpose();
        b += w * y[i] * row;
    }
    const Eigen::Vector3d beta = A.fullPivLu().solve(b);
    const std::vector<double> eval{x0};
    const auto fit = local_poly_smooth(x, y, 2, h, eval);
    EXPECT_NEAR(fit.values[0], beta(0), 1e-10);
    EXPECT_NEAR(fit.derivative[0], beta(1), 1e-10);

    const auto w = local_poly_weights(x, 2, h, x0);
    double value = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) value += w[i] * y[i];
    EXPECT_NEAR(value, beta(0), 1e-10);
}

TEST(LocalPoly, SingularDesignNamesEvalPoint) {
    const std::vector<double> x{1.0, 1.0, 2.0};
    const std::vector<double> y{1.0, 2.0, 3.0};
    const std::vector<double> eval{1.5};
    try {
        local_poly_smooth(x, y, 2, 1.0, eval);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("1.5"), std::string::npos);
    }
    // Far-away eval point: every Gaussian weight underflows to zero.
    const std::vector<double> far{1e6};
    EXPECT_THROW(local_poly_smooth(range(1, 10), range(1, 10), 1, 0.5, far), NumericalError);
    EXPECT_THROW(local_poly_smooth(x, y, 3, 1.0, eval), ConfigError);
    EXPECT_THROW(local_poly_smooth(x, y, 1, 0.0, eval), ConfigError);
}

TEST(Gcv, MatchesRecomputedTable) {
    const auto x = range(1, 30);
    std::mt19937_64 rng(21);
    std::vector<double> y;
    for (double v : x) y.push_back(std::sin(v / 3.0) + 0.25 * standard_normal(rng));
    const std::vector<double> candidates{0.5, 2.0, 8.0};

    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    double best = std::numeric_limits<double>::infinity();
    double best_h = 0.0;
    for (double h : candidates) {
        const Eigen::MatrixXd s = smoother_matrix(x, 2, h);
        const double rss = (yv - s * yv).squaredNorm();
        const double n = static_cast<double>(x.size());
        const double gcv = n * rss / std::pow(n - s.trace(), 2);
        EXPECT_NEAR(gcv_score(x, y, 2, h), gcv, 1e-8 * gcv);
        if (gcv < best) {
            best = gcv;
            best_h = h;
        }
    }
    EXPECT_EQ(gcv_bandwidth(x, y, 2, candidates), best_h);
}

TEST(Gcv, LinearDataTiesToSmallestCandidate) {
    const auto x = range(1, 30);
    std::vector<double> y;
    for (double v : x) y.push_back(3 - 0.5 * v);
    const std::vector<double> candidates{6.0, 1.0, 3.0};
    EXPECT_EQ(gcv_bandwidth(x, y, 1, candidates), 1.0);
}

TEST(Gcv, SingularCandidatesAreSkipped) {
    const auto x = range(1, 10);
    std::vector<double> y;
    for (double v : x) y.push_back(std::cos(v));
    // h = 1e-3 leaves one effective point per fit.
    const std::vector<double> one_good{1e-3, 2.0};
    EXPECT_EQ(gcv_bandwidth(x, y, 2, one_good), 2.0);
    const std::vector<double> none{1e-3};
    EXPECT_THROW(gcv_bandwidth(x, y, 2, none), NumericalError);
}

TEST(Kde, AnalyticCases) {
    const std::vector<double> zero{0.0};
    const std::vector<double> at0{0.0};
    EXPECT_NEAR(gaussian_kde(zero, KdeBandwidth::fixed(1.0), at0).density[0], 1 / std::sqrt(2 * std::numbers::pi), 1e-12);
    const std::vector<double> pair{-1.0, 1.0};
    EXPECT_NEAR(gaussian_kde(pair, KdeBandwidth::fixed(1.0), at0).density[0],
                std::exp(-0.5) / std::sqrt(2 * std::numbers::pi), 1e-12);
}

TEST(Kde, SilvermanRecoversNormalDensity) {
    std::mt19937_64 rng(500);
    std::vector<double> s(500);
    for (double& v : s) v = standard_normal(rng);
    std::vector<double> sorted = s;
    const double iqr = stats::quantile(sorted, 0.75) - stats::quantile(sorted, 0.25);
    const double expected_h = 0.9 * std::min(stats::sd(s), iqr / 1.34) * std::pow(500.0, -0.2);
    EXPECT_NEAR(silverman_bandwidth(s), expected_h, 1e-12);

    const auto grid = kde_eval_grid(s, expected_h, 801);
    const auto kde = gaussian_kde(s, KdeBandwidth::silverman(), grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_GE(kde.density[i], 0.0);
        worst = std::max(worst, std::abs(kde.density[i] - std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2 * std::numbers::pi)));
    }
    EXPECT_LT(worst, 0.05);
    const double mass = stats::trapezoid(grid, kde.density);
    EXPECT_GE(mass, 0.98);
    EXPECT_LE(mass, 1.0 + 1e-9);
}

TEST(Kde, ZeroVarianceNeedsFixedBandwidth) {
    const std::vector<double> same{2.0, 2.0, 2.0};
    const std::vector<double> eval{2.0};
    try {
        gaussian_kde(same, KdeBandwidth::silverman(), eval);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("fixed"), std::string::npos);
    }
    EXPECT_GT(gaussian_kde(same, KdeBandwidth::fixed(0.5), eval).density[0], 0.0);
}
