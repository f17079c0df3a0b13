#include "evergreen/error.hpp"
#include "evergreen/symmetric_eigen.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace evergreen;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    return 0.5 * (a + a.transpose());
}

}  // namespace

TEST(SymmetricEigen, TwoByTwoAnalytic) {
    Eigen::MatrixXd c(2, 2);
    c << 2, 1, 1, 2;
    const auto e = eigendecompose_symmetric(c, 1.0);
    ASSERT_EQ(e.eigenvalues.size(), 2u);
    EXPECT_NEAR(e.eigenvalues[0], 3.0, 1e-12);
    EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-12);
    const double r = 1 / std::sqrt(2.0);
    EXPECT_NEAR(e.eigenfunctions(0, 0), r, 1e-12);
    EXPECT_NEAR(e.eigenfunctions(0, 1), r, 1e-12);
    // Sum vanishes, so the first coordinate is positive.
    EXPECT_NEAR(e.eigenfunctions(1, 0), r, 1e-12);
    EXPECT_NEAR(e.eigenfunctions(1, 1), -r, 1e-12);
}

TEST(SymmetricEigen, IdentityGivesOrthonormalPair) {
    const auto e = eigendecompose_symmetric(Eigen::MatrixXd::Identity(2, 2), 1.0);
    EXPECT_NEAR(e.eigenvalues[0], 1.0, 1e-14);
    EXPECT_NEAR(e.eigenvalues[1], 1.0, 1e-14);
    const Eigen::MatrixXd gram = e.eigenfunctions * e.eigenfunctions.transpose();
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SymmetricEigen, RandomReconstructionAndResidual) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Eigen::MatrixXd c = random_symmetric(8, seed);
        const auto e = eigendecompose_symmetric(c, 1.0);
        const Eigen::MatrixXd v = e.eigenfunctions.transpose();
        const Eigen::VectorXd lambda = Eigen::Map<const Eigen::VectorXd>(e.eigenvalues.data(), 8);
        EXPECT_LT((c - v * lambda.asDiagonal() * v.transpose()).cwiseAbs().maxCoeff(), 1e-8);
        for (int k = 0; k < 8; ++k) {
            EXPECT_LT((c * v.col(k) - lambda(k) * v.col(k)).norm(), 1e-8);
            if (k > 0) EXPECT_GE(lambda(k - 1), lambda(k));
        }
    }
}

TEST(SymmetricEigen, AgreesWithReferenceSolver) {
    const Eigen::MatrixXd a = random_symmetric(30, 9);
    const Eigen::MatrixXd c = a * a.transpose();
    const auto e = eigendecompose_symmetric(c, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(c);
    for (int k = 0; k < 30; ++k) {
        EXPECT_NEAR(e.eigenvalues[static_cast<std::size_t>(k)], ref.eigenvalues()(29 - k), 1e-9 * ref.eigenvalues()(29));
    }
    // Leading eigenvector up to sign.
    const double overlap = std::abs(e.eigenfunctions.row(0).dot(ref.eigenvectors().col(29)));
    EXPECT_NEAR(overlap, 1.0, 1e-9);
}

TEST(SymmetricEigen, DeltaScalingAndSignConvention) {
    const Eigen::MatrixXd a = random_symmetric(6, 4);
    const Eigen::MatrixXd c = a * a.transpose();
    const double delta = 0.25;
    const auto e = eigendecompose_symmetric(c, delta);
    const auto unit = eigendecompose_symmetric(c, 1.0);
    for (int k = 0; k < 6; ++k) {
        EXPECT_NEAR(e.eigenvalues[static_cast<std::size_t>(k)], delta * unit.eigenvalues[static_cast<std::size_t>(k)], 1e-10);
        EXPECT_NEAR(e.eigenfunctions.row(k).squaredNorm() * delta, 1.0, 1e-10);
        EXPECT_GE(e.eigenfunctions.row(k).sum(), 0.0);
    }
    const auto again = eigendecompose_symmetric(c, delta);
    EXPECT_EQ(again.eigenfunctions, e.eigenfunctions);
}

TEST(SymmetricEigen, RejectsBadInput) {
    Eigen::MatrixXd c(2, 2);
    c << 1, 0.5, 0.4, 1;
    EXPECT_THROW(eigendecompose_symmetric(c, 1.0), ConfigError);
    EXPECT_THROW(eigendecompose_symmetric(Eigen::MatrixXd::Zero(2, 3), 1.0), ConfigError);
    Eigen::MatrixXd n = Eigen::MatrixXd::Identity(2, 2);
    n(0, 0) = std::nan("");
    EXPECT_THROW(eigendecompose_symmetric(n, 1.0), ConfigError);
}
