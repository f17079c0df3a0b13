#include "evergreen/error.hpp"
#include "evergreen/poisson_fit.hpp"
#include "evergreen/stats.hpp"
#include "evergreen/synthgen.hpp"

#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace evergreen;

namespace {

LatentBasis constant_basis(std::size_t t) {
    LatentBasis b;
    b.grid_size = t;
    b.mean.assign(t, 0.0);
    b.raw_mean = b.mean;
    b.mean_derivative = b.mean;
    b.eigenfunctions = Eigen::MatrixXd::Constant(1, static_cast<Eigen::Index>(t), 1 / std::sqrt(double(t)));
    b.eigenvalues = {1.0};
    b.spectrum = {1.0};
    b.fve = {1.0};
    return b;
}

double loglik_at(const CountTrajectory& traj, const LatentBasis& b, const std::vector<double>& xi) {
    return poisson_loglik(traj.counts, b.eta(xi));
}

double max_abs_gradient(const CountTrajectory& traj, const LatentBasis& b, const std::vector<double>& xi) {
    const auto gh = loglik_grad_hess(traj.counts, b.eta(xi), b);
    return gh.gradient.cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Loglik, AnalyticValues) {
    const std::vector<Count> y0{0, 0};
    const std::vector<double> e0{0, 0};
    EXPECT_DOUBLE_EQ(poisson_loglik(y0, e0), -2.0);
    const std::vector<Count> y1{1};
    const std::vector<double> e1{0};
    EXPECT_DOUBLE_EQ(poisson_loglik(y1, e1), -1.0);
    const std::vector<Count> y2{2};
    const std::vector<double> e2{std::log(2.0)};
    EXPECT_NEAR(poisson_loglik(y2, e2), 2 * std::log(2.0) - 2, 1e-12);
    EXPECT_NEAR(poisson_loglik(y2, e2), -0.61371, 1e-5);
}

TEST(Loglik, OverflowGuard) {
    const std::vector<Count> y{1, 1};
    const std::vector<double> ok{700.0, 0.0};
    EXPECT_NO_THROW(poisson_loglik(y, ok));
    const std::vector<double> bad{0.0, 700.5};
    EXPECT_THROW(poisson_loglik(y, bad), NumericalError);
}

TEST(Gradient, AnalyticStationaryPoint) {
    const std::size_t t = 9;
    const auto b = constant_basis(t);
    const CountTrajectory traj{"c", std::vector<Count>(t, 3)};
    const std::vector<double> xi{std::sqrt(double(t)) * std::log(3.0)};
    EXPECT_LT(max_abs_gradient(traj, b, xi), 1e-12);
}

TEST(Gradient, MatchesCentralDifferences) {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const auto b = testkit::known_basis(30, 4);
        std::vector<double> truth(4), xi(4);
        for (auto& v : truth) v = 0.7 * standard_normal(rng);
        for (auto& v : xi) v = 0.7 * standard_normal(rng);
        const auto traj = testkit::draw_item(b, truth, rng);
        const auto gh = loglik_grad_hess(traj.counts, b.eta(xi), b);

        const double h = 1e-5;
        Eigen::VectorXd fd_g(4);
        Eigen::MatrixXd fd_h(4, 4);
        for (int k = 0; k < 4; ++k) {
            auto plus = xi, minus = xi;
            plus[k] += h;
            minus[k] -= h;
            fd_g(k) = (loglik_at(traj, b, plus) - loglik_at(traj, b, minus)) / (2 * h);
            const auto gp = loglik_grad_hess(traj.counts, b.eta(plus), b).gradient;
            const auto gm = loglik_grad_hess(traj.counts, b.eta(minus), b).gradient;
            fd_h.col(k) = (gp - gm) / (2 * h);
        }
        EXPECT_LT((gh.gradient - fd_g).cwiseAbs().maxCoeff() / gh.gradient.cwiseAbs().maxCoeff(), 1e-6);
        EXPECT_LT((gh.hessian - fd_h).cwiseAbs().maxCoeff() / gh.hessian.cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Loglik, ConcaveAlongMidpoints) {
    std::mt19937_64 rng(5);
    const auto b = testkit::known_basis(30, 3);
    const auto traj = testkit::draw_item(b, {0.5, -0.3, 0.2}, rng);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> a(3), c(3), m(3);
        for (int k = 0; k < 3; ++k) {
            a[k] = standard_normal(rng);
            c[k] = standard_normal(rng);
            m[k] = 0.5 * (a[k] + c[k]);
        }
        EXPECT_GE(loglik_at(traj, b, m), 0.5 * (loglik_at(traj, b, a) + loglik_at(traj, b, c)) - 1e-12);
    }
}

TEST(FitScores, ConstantItemOnFourYears) {
    const auto b = constant_basis(4);
    const CountTrajectory traj{"c", {2, 2, 2, 2}};
    const auto fit = fit_scores(traj, b);
    ASSERT_TRUE(fit.converged) << fit.message;
    EXPECT_NEAR(fit.scores[0], 2 * std::log(2.0), 1e-10);
    for (double v : fit.intensity) EXPECT_NEAR(v, 2.0, 1e-10);
    EXPECT_NEAR(fit.mse, 0.0, 1e-18);
}

TEST(FitScores, ZeroDimensionalBasis) {
    const auto b = testkit::known_basis(30, 0);
    std::mt19937_64 rng(1);
    const auto traj = testkit::draw_item(b, {}, rng);
    const auto fit = fit_scores(traj, b);
    EXPECT_TRUE(fit.scores.empty());
    EXPECT_TRUE(fit.converged);
    for (std::size_t j = 0; j < 30; ++j) EXPECT_DOUBLE_EQ(fit.intensity[j], std::exp(b.mean[j]));
    EXPECT_DOUBLE_EQ(fit.loglik, poisson_loglik(traj.counts, b.mean));
}

TEST(FitScores, GridSearchFindsNothingBetter) {
    std::mt19937_64 rng(61);
    for (int rep = 0; rep < 3; ++rep) {
        const auto b = testkit::known_basis(6, 2);
        const auto traj = testkit::draw_item(b, {0.8 * standard_normal(rng), 0.8 * standard_normal(rng)}, rng);
        const auto fit = fit_scores(traj, b);
        ASSERT_TRUE(fit.converged) << fit.message;
        for (int a = 0; a <= 60; ++a)
            for (int c = 0; c <= 60; ++c) {
                const std::vector<double> xi{fit.scores[0] - 3 + 0.1 * a, fit.scores[1] - 3 + 0.1 * c};
                EXPECT_LE(loglik_at(traj, b, xi), fit.loglik + 1e-12 * (1 + std::abs(fit.loglik)));
            }
    }
}

TEST(FitScores, ConvergedFitsSatisfyScoreEquations) {
    const Corpus corpus = testkit::small_corpus(300, 19);
    const auto b = testkit::known_basis(30, 4);
    for (const auto& item : corpus.items()) {
        const auto fit = fit_scores(item, b);
        ASSERT_TRUE(fit.converged) << item.id << ": " << fit.message;
        EXPECT_LT(max_abs_gradient(item, b, fit.scores), 1e-8) << item.id;
        for (std::size_t j = 0; j < 30; ++j) EXPECT_DOUBLE_EQ(fit.intensity[j], std::exp(fit.eta[j]));
        std::vector<double> lambda(fit.intensity);
        EXPECT_NEAR(fit.mse, fit_mse(item.counts, lambda), 1e-10 * std::max(1.0, fit.mse));
    }
}

TEST(FitScores, RidgeFallbackOnOverflowingStart) {
    // Counts far above the mean push the starting projection past the guard.
    auto b = testkit::known_basis(30, 2);
    for (double& m : b.mean) m = -400.0;
    CountTrajectory traj{"big", std::vector<Count>(30, 0)};
    traj.counts[0] = 1000000;
    const auto fit = fit_scores(traj, b);
    EXPECT_FALSE(fit.message.empty() && !fit.converged);
    for (double v : fit.scores) EXPECT_TRUE(std::isfinite(v));
}

TEST(FitCorpus, SingletonPermutationAndThreads) {
    const Corpus corpus = testkit::small_corpus(120, 23);
    const auto b = testkit::known_basis(30, 4);
    const std::vector<std::size_t> first{0};
    const auto single = fit_corpus(corpus.subset(first), b);
    const auto direct = fit_scores(corpus[0], b);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0].scores, direct.scores);
    EXPECT_EQ(single[0].loglik, direct.loglik);

    const auto one = fit_corpus(corpus, b, {}, 1);
    const auto four = fit_corpus(corpus, b, {}, 4);
    std::vector<std::size_t> reversed(corpus.size());
    for (std::size_t i = 0; i < reversed.size(); ++i) reversed[i] = corpus.size() - 1 - i;
    const auto rev = fit_corpus(corpus.subset(reversed), b, {}, 3);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(one[i].scores, four[i].scores);
        EXPECT_EQ(one[i].iterations, four[i].iterations);
        EXPECT_EQ(one[i].scores, rev[corpus.size() - 1 - i].scores);
        EXPECT_EQ(one[i].id, rev[corpus.size() - 1 - i].id);
    }
}

TEST(FitCorpus, RecoversGeneratingScores) {
    GeneratorSpec spec;
    spec.n = 500;
    spec.seed = 99;
    spec.eigenvalues = {1.0, 0.8};
    const auto sim = simulate_corpus(spec);
    auto b = testkit::known_basis(30, 2);
    b.mean = sim.truth.mean;
    b.eigenfunctions = sim.truth.basis;
    const auto fits = fit_corpus(sim.corpus, b);
    for (int k = 0; k < 2; ++k) {
        std::vector<double> est, truth;
        for (std::size_t i = 0; i < fits.size(); ++i) {
            est.push_back(fits[i].scores[k]);
            truth.push_back(sim.truth.items[i].scores[k]);
        }
        EXPECT_GT(stats::pearson(est, truth), 0.9) << "component " << k + 1;
    }
}

TEST(Mse, Examples) {
    const std::vector<Count> y{0, 2};
    const std::vector<double> ones{1.0, 1.0};
    EXPECT_DOUBLE_EQ(fit_mse(y, ones), 1.0);
    const std::vector<double> exact{0.0, 2.0};
    EXPECT_DOUBLE_EQ(fit_mse(y, exact), 0.0);

    std::mt19937_64 rng(2);
    std::vector<Count> yy(30);
    std::vector<double> lam(30);
    double naive = 0.0;
    for (std::size_t j = 0; j < 30; ++j) {
        yy[j] = poisson_draw(rng, 5.0);
        lam[j] = 5.0 * uniform01(rng) + 0.1;
        naive += (yy[j] - lam[j]) * (yy[j] - lam[j]);
    }
    EXPECT_NEAR(fit_mse(yy, lam), naive / 30, 1e-12);
}
