#include "evergreen/clustering.hpp"
#include "evergreen/error.hpp"

#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

using namespace evergreen;

namespace {

Eigen::MatrixXd random_points(int n, int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = g(rng);
    return x;
}

// Identity eigenfunctions on a zero mean: centroid c has intensity exp(c).
LatentBasis identity_basis(std::size_t t) {
    LatentBasis b;
    b.grid_size = t;
    b.mean.assign(t, 0.0);
    b.raw_mean = b.mean;
    b.mean_derivative = b.mean;
    b.eigenfunctions = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
    b.eigenvalues.assign(t, 1.0);
    b.spectrum = b.eigenvalues;
    b.fve.assign(t, 1.0);
    return b;
}

Eigen::RowVectorXd log_curve(const std::vector<double>& curve) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(curve.size()));
    for (std::size_t j = 0; j < curve.size(); ++j) r(static_cast<Eigen::Index>(j)) = std::log(curve[j]);
    return r;
}

std::vector<double> increasing(std::size_t t) {
    std::vector<double> c;
    for (std::size_t j = 1; j <= t; ++j) c.push_back(1.0 + 0.2 * double(j));
    return c;
}

std::vector<double> peaked(std::size_t t, double peak, double level, double floor_ratio) {
    std::vector<double> c;
    for (std::size_t j = 1; j <= t; ++j) {
        const double s = double(j);
        const double bump = s <= peak ? s / peak : 1.0 - (1.0 - floor_ratio) * (s - peak) / (double(t) - peak);
        c.push_back(level * std::max(bump, 1e-3));
    }
    return c;
}

double ss_of_partition(const Eigen::MatrixXd& x, const std::vector<int>& a, int k) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> size(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < x.rows(); ++i) {
        c.row(a[i]) += x.row(i);
        ++size[static_cast<std::size_t>(a[i])];
    }
    for (int j = 0; j < k; ++j) c.row(j) /= size[static_cast<std::size_t>(j)];
    return within_cluster_ss(x, c, a);
}

}  // namespace

TEST(KMeans, MatchesExhaustivePartitionSearch) {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
        const Eigen::MatrixXd x = random_points(8, 2, seed);
        double best = std::numeric_limits<double>::infinity();
        for (int mask = 1; mask < 255; ++mask) {
            std::vector<int> a(8);
            for (int i = 0; i < 8; ++i) a[i] = (mask >> i) & 1;
            best = std::min(best, ss_of_partition(x, a, 2));
        }
        const auto model = kmeans(x, 2, seed);
        EXPECT_NEAR(model.within_ss, best, 1e-12 * best);
        EXPECT_NEAR(model.within_ss, within_cluster_ss(x, model.centroids, model.assignments), 1e-12);
    }
}

TEST(KMeans, SeparationIdentityAndGrandMean) {
    Eigen::MatrixXd two(2, 2);
    two << 0, 0, 10, 10;
    const auto sep = kmeans(two, 2, 1);
    EXPECT_NE(sep.assignments[0], sep.assignments[1]);
    EXPECT_EQ(sep.within_ss, 0.0);

    const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 3, 2.5);
    const auto one = kmeans(same, 1, 1);
    EXPECT_EQ(one.centroids.row(0), same.row(0));
    EXPECT_EQ(one.within_ss, 0.0);

    const Eigen::MatrixXd x = random_points(50, 3, 8);
    const auto grand = kmeans(x, 1, 1);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    EXPECT_LT((grand.centroids.row(0) - mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(grand.within_ss, (x.rowwise() - mean).squaredNorm(), 1e-9);
    EXPECT_THROW(kmeans(two, 3, 1), ConfigError);
}

TEST(KMeans, LloydNeverIncreasesObjective) {
    const Eigen::MatrixXd x = random_points(400, 4, 17);
    for (int k : {2, 5, 9}) {
        const auto model = kmeans(x, k, 3);
        ASSERT_FALSE(model.objective_trace.empty());
        for (std::size_t i = 1; i < model.objective_trace.size(); ++i)
            EXPECT_LE(model.objective_trace[i], model.objective_trace[i - 1] * (1 + 1e-12));
        // Nearest-centroid property.
        for (int i = 0; i < x.rows(); ++i) {
            const double own = (x.row(i) - model.centroids.row(model.assignments[i])).squaredNorm();
            for (int c = 0; c < k; ++c) EXPECT_LE(own, (x.row(i) - model.centroids.row(c)).squaredNorm() + 1e-12);
        }
    }
}

TEST(KMeans, WithinSsNonincreasingInK) {
    const Eigen::MatrixXd x = random_points(300, 3, 5);
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 8; ++k) {
        const auto model = kmeans(x, k, 11);
        EXPECT_LE(model.within_ss, previous + 1e-9);
        previous = model.within_ss;
    }
}

TEST(KMedoids, MatchesExhaustiveMedoidPairs) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Eigen::MatrixXd x = random_points(7, 2, 40 + seed);
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 7; ++a)
            for (int b = a + 1; b < 7; ++b) {
                double cost = 0.0;
                for (int i = 0; i < 7; ++i)
                    cost += std::min((x.row(i) - x.row(a)).squaredNorm(), (x.row(i) - x.row(b)).squaredNorm());
                best = std::min(best, cost);
            }
        const auto model = kmedoids(x, 2);
        EXPECT_NEAR(model.within_ss, best, 1e-12 * best);
        ASSERT_EQ(model.medoids.size(), 2u);
    }
}

TEST(KMedoids, TrivialAndSeparated) {
    const Eigen::MatrixXd x = random_points(5, 2, 9);
    const auto all = kmedoids(x, 5);
    EXPECT_EQ(all.within_ss, 0.0);
    EXPECT_EQ(std::set<int>(all.assignments.begin(), all.assignments.end()).size(), 5u);

    const auto one = kmedoids(x, 1);
    int best = 0;
    for (int i = 1; i < 5; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < 5; ++j) {
            a += (x.row(j) - x.row(i)).squaredNorm();
            b += (x.row(j) - x.row(best)).squaredNorm();
        }
        if (a < b) best = i;
    }
    EXPECT_EQ(one.medoids[0], best);

    Eigen::MatrixXd triples(6, 2);
    triples << 0, 0, 0.1, 0, 0, 0.1, 50, 50, 50.1, 50, 50, 50.1;
    const auto sep = kmedoids(triples, 2);
    EXPECT_NE(sep.medoids[0] < 3, sep.medoids[1] < 3);
}

TEST(Ward, MatchesCentroidFormulaTrace) {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
        const Eigen::MatrixXd x = random_points(6, 2, seed);
        // Clusters keyed by smallest member; Ward cost 2 na nb / (na + nb) |ca - cb|^2.
        std::map<int, std::vector<int>> clusters;
        for (int i = 0; i < 6; ++i) clusters[i] = {i};
        const auto merges = ward_merges(x);
        ASSERT_EQ(merges.size(), 5u);
        for (const auto& merge : merges) {
            double best = std::numeric_limits<double>::infinity();
            int ba = -1, bb = -1;
            for (auto p = clusters.begin(); p != clusters.end(); ++p)
                for (auto q = std::next(p); q != clusters.end(); ++q) {
                    Eigen::RowVectorXd ca = Eigen::RowVectorXd::Zero(2), cb = Eigen::RowVectorXd::Zero(2);
                    for (int i : p->second) ca += x.row(i);
                    for (int i : q->second) cb += x.row(i);
                    const double na = double(p->second.size()), nb = double(q->second.size());
                    ca /= na;
                    cb /= nb;
                    const double d = 2 * na * nb / (na + nb) * (ca - cb).squaredNorm();
                    if (d < best) {
                        best = d;
                        ba = p->first;
                        bb = q->first;
                    }
                }
            EXPECT_EQ(merge.a, ba);
            EXPECT_EQ(merge.b, bb);
            EXPECT_NEAR(merge.height, best, 1e-10 * best);
            auto& into = clusters[ba];
            into.insert(into.end(), clusters[bb].begin(), clusters[bb].end());
            clusters.erase(bb);
        }
        const auto cut = ward_cut(x, merges, 3);
        EXPECT_EQ(cut.assignments[0], 0);
        EXPECT_EQ(*std::max_element(cut.assignments.begin(), cut.assignments.end()), 2);
    }
}

TEST(Ward, PairsMergeFirstAndTrivialCut) {
    Eigen::MatrixXd x(4, 1);
    x << 0, 100, 0.5, 100.2;
    const auto merges = ward_merges(x);
    EXPECT_EQ(merges[0].a, 1);
    EXPECT_EQ(merges[0].b, 3);
    EXPECT_EQ(merges[1].a, 0);
    EXPECT_EQ(merges[1].b, 2);
    const auto two = ward(x, 2);
    EXPECT_EQ(two.assignments, (std::vector<int>{0, 1, 0, 1}));
    const auto four = ward(x, 4);
    EXPECT_EQ(four.assignments, (std::vector<int>{0, 1, 2, 3}));
    EXPECT_EQ(four.within_ss, 0.0);
}

TEST(Labels, RulesOnConstructedCentroids) {
    const std::size_t t = 30;
    const auto basis = identity_basis(t);
    ClusterModel model;
    model.k = 4;
    model.centroids.resize(4, static_cast<Eigen::Index>(t));
    model.centroids.row(0) = log_curve(peaked(t, 5, 1.0, 0.3));
    model.centroids.row(1) = log_curve(increasing(t));
    model.centroids.row(2) = log_curve(peaked(t, 5, 6.0, 0.3));
    model.centroids.row(3) = log_curve(peaked(t, 20, 3.0, 0.5));
    const auto labels = label_clusters(model, basis);
    const std::vector<ShapeLabel> expected{ShapeLabel::normal_low, ShapeLabel::evergreen, ShapeLabel::normal_high,
                                           ShapeLabel::delayed};
    EXPECT_EQ(labels, expected);

    // Permuting cluster indices permutes the labels.
    ClusterModel swapped = model;
    const std::vector<int> perm{3, 2, 1, 0};
    for (int c = 0; c < 4; ++c) swapped.centroids.row(c) = model.centroids.row(perm[c]);
    const auto relabeled = label_clusters(swapped, basis);
    for (int c = 0; c < 4; ++c) EXPECT_EQ(relabeled[c], labels[perm[c]]);

    const auto curves = centroid_curves(model, basis);
    EXPECT_NEAR(curves[1][29], increasing(t)[29], 1e-12);
}

TEST(Labels, ClassifyItem) {
    const std::size_t t = 30;
    EXPECT_EQ(classify_item(increasing(t)), ItemClass::evergreen);
    EXPECT_EQ(classify_item(std::vector<double>(t, 4.0)), ItemClass::evergreen);
    EXPECT_EQ(classify_item(peaked(t, 3, 10.0, 0.1)), ItemClass::flash_in_the_pan);
    EXPECT_EQ(classify_item(peaked(t, 3, 10.0, 0.5)), ItemClass::normal_document);
    EXPECT_EQ(classify_item(peaked(t, 20, 10.0, 0.5)), ItemClass::delayed_document);
    for (double scale : {0.01, 3.0, 1000.0}) {
        for (const auto& curve : {increasing(t), peaked(t, 20, 1.0, 0.5), peaked(t, 3, 1.0, 0.1)}) {
            std::vector<double> scaled = curve;
            for (double& v : scaled) v *= scale;
            EXPECT_EQ(classify_item(scaled), classify_item(curve));
        }
    }
    EXPECT_TRUE(is_nondeclining(std::vector<double>{1, 2, 1.95, 3}, 0.05));
    EXPECT_FALSE(is_nondeclining(std::vector<double>{1, 2, 1.8, 3}, 0.05));
}

TEST(Metrics, AdjustedRandIndex) {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    const std::vector<int> renamed{2, 2, 0, 0, 1, 1};
    EXPECT_NEAR(adjusted_rand_index(a, renamed), 1.0, 1e-12);
    // Hand-computed: contingency {2,0 | 1,1 | 0,2} over pairs.
    const std::vector<int> b{0, 0, 0, 1, 1, 1};
    const double index = 1 + 0 + 1;  // sum C(n_ij, 2)
    const double rows = 3, cols = 6;
    const double expected_index = rows * cols / 15.0;
    const double expected = (index - expected_index) / (0.5 * (rows + cols) - expected_index);
    EXPECT_NEAR(adjusted_rand_index(a, b), expected, 1e-12);
}

TEST(Metrics, Silhouette) {
    Eigen::MatrixXd x(4, 1);
    x << 0, 1, 10, 11;
    const std::vector<int> a{0, 0, 1, 1};
    // Point 0: a = 1, b = (10 + 11) / 2 = 10.5.
    const double s0 = 1 - 1 / 10.5, s1 = 1 - 1 / 9.5;
    EXPECT_NEAR(silhouette(x, a, 2), (s0 + s1 + s1 + s0) / 4, 1e-12);
    EXPECT_EQ(silhouette(x, a, 1), 0.0);
    const std::vector<int> single{0, 0, 0, 1};
    const double w0 = (11 - 5.5) / 11, w1 = (10 - 5.0) / 10, w2 = (1 - 9.5) / 9.5;
    EXPECT_NEAR(silhouette(x, single, 2), (w0 + w1 + w2 + 0.0) / 4, 1e-12);
}

TEST(Sweep, SingleCellAndThreadDeterminism) {
    const Eigen::MatrixXd x = random_points(200, 4, 23);
    const auto basis = testkit::known_basis(30, 4);
    ClusterOptions options;
    options.k = 2;
    options.seed = 7;
    const std::vector<int> ks{2};
    const std::vector<ClusterMethod> methods{ClusterMethod::kmeans};
    const auto report = robustness_sweep(x, basis, ks, methods, options);
    const auto direct = cluster_scores(x, basis, options);
    ASSERT_EQ(report.cells.size(), 1u);
    EXPECT_EQ(report.cells[0].model.assignments, direct.assignments);
    EXPECT_EQ(report.cells[0].within_ss, direct.within_ss);

    const std::vector<int> many{2, 3, 4};
    const std::vector<ClusterMethod> all{ClusterMethod::kmeans, ClusterMethod::kmedoids, ClusterMethod::ward};
    const auto serial = robustness_sweep(x, basis, many, all, options, 1);
    const auto parallel = robustness_sweep(x, basis, many, all, options, 4);
    ASSERT_EQ(serial.cells.size(), 9u);
    for (std::size_t c = 0; c < serial.cells.size(); ++c) {
        EXPECT_EQ(serial.cells[c].model.assignments, parallel.cells[c].model.assignments);
        EXPECT_EQ(serial.cells[c].silhouette, parallel.cells[c].silhouette);
    }
    ASSERT_EQ(serial.ari.size(), parallel.ari.size());
    for (std::size_t i = 0; i < serial.ari.size(); ++i) EXPECT_EQ(serial.ari[i].ari, parallel.ari[i].ari);
}

TEST(Sweep, ZeroDimensionalScoresRefused) {
    const Eigen::MatrixXd none(10, 0);
    EXPECT_THROW(cluster_scores(none, testkit::known_basis(30, 0), {}), ConfigError);
}
