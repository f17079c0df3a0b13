#include "evergreen/error.hpp"
#include "evergreen/nelder_mead.hpp"
#include "evergreen/stats.hpp"
#include "evergreen/wsb.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace evergreen;

namespace {

// Phi(x) = 1/2 + erf(x / sqrt 2) / 2 with erf from its all-positive series,
// summed in long double.
double phi_series(double x) {
    const long double z = static_cast<long double>(x) / std::sqrt(2.0L);
    long double term = z;
    long double sum = z;
    for (int n = 1; n < 400; ++n) {
        term *= 2.0L * z * z / (2.0L * n + 1.0L);
        sum += term;
        if (std::fabs(term) < 1e-30L * std::fabs(sum)) break;
    }
    const long double erf = 2.0L / std::sqrt(std::numbers::pi_v<long double>) * std::exp(-z * z) * sum;
    return static_cast<double>(0.5L + 0.5L * erf);
}

CountTrajectory rounded_wsb(const WsbParams& p, std::size_t t) {
    CountTrajectory traj{"w", {}};
    double previous = 0.0;
    for (std::size_t j = 1; j <= t; ++j) {
        const double c = std::round(wsb_cumulative(double(j), p));
        traj.counts.push_back(static_cast<Count>(c - previous));
        previous = c;
    }
    return traj;
}

}  // namespace

TEST(NormalCdf, MatchesSeriesOracle) {
    EXPECT_EQ(normal_cdf(0.0), 0.5);
    EXPECT_NEAR(normal_cdf(1.96), 0.9750021, 1e-6);
    double previous = 0.0;
    for (int i = -600; i <= 600; ++i) {
        const double x = i / 100.0;
        const double v = normal_cdf(x);
        EXPECT_NEAR(v, phi_series(x), 1e-6) << x;
        EXPECT_NEAR(v + normal_cdf(-x), 1.0, 1e-15);
        EXPECT_GE(v, previous);
        previous = v;
    }
}

TEST(WsbCurve, AnalyticValues) {
    WsbParams p{1.0, 0.0, 1.0, 30.0};
    EXPECT_NEAR(wsb_cumulative(1.0, p), 30 * (std::exp(0.5) - 1), 1e-12);
    EXPECT_NEAR(wsb_cumulative(1e12, p), 30 * (std::numbers::e - 1), 1e-9);
    EXPECT_THROW(wsb_cumulative(0.0, p), ConfigError);
    WsbParams flat{0.0, 1.0, 0.5, 30.0};
    for (double v : wsb_annual(flat, TimeGrid(30))) EXPECT_EQ(v, 0.0);
}

TEST(WsbCurve, AnnualTelescopesAndIsBounded) {
    const WsbParams p{1.7, 1.1, 0.8, 30.0};
    const auto annual = wsb_annual(p, TimeGrid(30));
    double sum = 0.0;
    double previous = 0.0;
    for (std::size_t j = 0; j < 30; ++j) {
        const double c = wsb_cumulative(double(j + 1), p);
        EXPECT_NEAR(annual[j], c - previous, 1e-12);
        previous = c;
        sum += annual[j];
    }
    EXPECT_NEAR(sum, wsb_cumulative(30.0, p), 1e-10);

    const double ceiling = p.m * (std::exp(p.lambda) - 1);
    double last = 0.0;
    for (int i = 1; i <= 3000; ++i) {
        const double c = wsb_cumulative(i / 100.0, p);
        EXPECT_GE(c, last);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, ceiling);
        last = c;
    }
}

TEST(NelderMead, RosenbrockAndBox) {
    const auto rosen = [](std::span<const double> x) {
        return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
    };
    NelderMeadOptions options;
    options.max_iterations = 5000;
    options.initial_step = {0.5, 0.5};
    const Box wide{{-5, -5}, {5, 5}};
    const auto r = nelder_mead(rosen, {-1.2, 1.0}, wide, options);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 1.0, 1e-4);

    // Unconstrained minimum at (3, -2); the box pins the answer to its corner.
    const auto bowl = [](std::span<const double> x) { return std::pow(x[0] - 3, 2) + std::pow(x[1] + 2, 2); };
    const Box tight{{0, 0}, {1, 1}};
    options.initial_step = {0.2, 0.2};
    const auto b = nelder_mead(bowl, {0.5, 0.5}, tight, options);
    EXPECT_NEAR(b.x[0], 1.0, 1e-6);
    EXPECT_NEAR(b.x[1], 0.0, 1e-6);
}

TEST(FitWsb, RecoversNoiselessParameters) {
    const WsbParams truth{1.2, 0.8, 0.6, 30.0};
    const auto traj = rounded_wsb(truth, 30);
    const auto fit = fit_wsb(traj);
    ASSERT_TRUE(fit.converged) << fit.message;
    EXPECT_NEAR(fit.params.lambda, truth.lambda, 0.1 * truth.lambda);
    EXPECT_NEAR(fit.params.mu, truth.mu, 0.1 * truth.mu);
    EXPECT_NEAR(fit.params.sigma, truth.sigma, 0.1 * truth.sigma);

    const auto annual = wsb_annual(truth, TimeGrid(30));
    EXPECT_LE(fit.mse, fit_mse(traj.counts, annual) + 0.5);
}

TEST(FitWsb, SingleCitationAndStartingPoints) {
    CountTrajectory traj{"one", std::vector<Count>(30, 0)};
    traj.counts[0] = 1;
    const auto fit = fit_wsb(traj);
    EXPECT_NEAR(fit.cumulative[0], 1.0, 0.05);
    EXPECT_NEAR(fit.cumulative[29], 1.0, 0.05);
    for (std::size_t j = 1; j < 30; ++j) EXPECT_GE(fit.cumulative[j], fit.cumulative[j - 1]);

    const double lambda0 = std::log(1.0 + 1.0 / 30.0);
    for (double mu : {std::log(2.0), std::log(8.0)})
        for (double sigma : {0.5, 1.5}) EXPECT_LE(fit.objective, wsb_objective(traj, {lambda0, mu, sigma, 30.0}));
    EXPECT_NEAR(fit.objective, wsb_objective(traj, fit.params), 1e-12);
    EXPECT_THROW(fit_wsb(CountTrajectory{"z", std::vector<Count>(30, 0)}), DataError);
}

TEST(FitWsb, StaysInsideBox) {
    CountTrajectory traj{"late", std::vector<Count>(30, 0)};
    for (std::size_t j = 25; j < 30; ++j) traj.counts[j] = 400;
    const auto fit = fit_wsb(traj);
    EXPECT_GE(fit.params.lambda, 0.0);
    EXPECT_LE(fit.params.lambda, 20.0);
    EXPECT_GE(fit.params.mu, -2.0);
    EXPECT_LE(fit.params.mu, 5.0);
    EXPECT_GE(fit.params.sigma, 0.05);
    EXPECT_LE(fit.params.sigma, 5.0);
}

TEST(FitWsb, CorpusFlagsZeroItems) {
    std::vector<CountTrajectory> items{{"z", std::vector<Count>(5, 0)}, {"a", {1, 2, 3, 1, 0}}};
    const Corpus corpus(TimeGrid(5), items);
    const auto fits = fit_wsb_corpus(corpus, {}, 2);
    EXPECT_FALSE(fits[0].converged);
    EXPECT_FALSE(fits[0].message.empty());
    EXPECT_TRUE(fits[1].converged);
}

TEST(Compare, DiagonalFloorAndMismatch) {
    std::vector<PaperFit> fits(3);
    std::vector<WsbFit> wsb(3);
    const double mses[] = {0.0, 2.5, 40.0};
    for (int i = 0; i < 3; ++i) {
        fits[i].id = wsb[i].id = "p" + std::to_string(i);
        fits[i].mse = wsb[i].mse = mses[i];
    }
    const auto cmp = compare_models(fits, wsb, 64);
    ASSERT_EQ(cmp.rows.size(), 3u);
    EXPECT_EQ(cmp.rows[0].log10_mse_fpca, -12.0);
    for (const auto& row : cmp.rows) EXPECT_EQ(row.log10_mse_wsb, row.log10_mse_fpca);
    EXPECT_EQ(cmp.eval.size(), 64u);
    EXPECT_NEAR(stats::trapezoid(cmp.eval, cmp.density_fpca), 1.0, 0.02);
    EXPECT_EQ(cmp.density_fpca, cmp.density_wsb);

    wsb[2].id = "other";
    try {
        compare_models(fits, wsb);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("p2"), std::string::npos);
        EXPECT_NE(what.find("other"), std::string::npos);
    }
    const std::vector<PaperFit> none;
    const std::vector<WsbFit> none_wsb;
    EXPECT_THROW(compare_models(none, none_wsb), DataError);
}
