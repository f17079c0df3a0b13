#include "evergreen/clustering.hpp"

#include "evergreen/error.hpp"
#include "evergreen/parallel.hpp"
#include "evergreen/rng.hpp"
#include "evergreen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace evergreen {

std::string to_string(ClusterMethod method) {
    switch (method) {
        case ClusterMethod::kmeans: return "kmeans";
        case ClusterMethod::kmedoids: return "kmedoids";
        case ClusterMethod::ward: return "ward";
    }
    return "?";
}

ClusterMethod parse_method(const std::string& name) {
    if (name == "kmeans") return ClusterMethod::kmeans;
    if (name == "kmedoids" || name == "pam") return ClusterMethod::kmedoids;
    if (name == "ward") return ClusterMethod::ward;
    throw ConfigError("unknown clustering method '" + name + "' (expected kmeans, kmedoids or ward)");
}

std::string to_string(ShapeLabel label) {
    switch (label) {
        case ShapeLabel::evergreen: return "evergreen";
        case ShapeLabel::delayed: return "delayed";
        case ShapeLabel::normal_low: return "normal-low";
        case ShapeLabel::normal_high: return "normal-high";
    }
    return "?";
}

ShapeLabel parse_shape_label(const std::string& name) {
    for (ShapeLabel l : kShapeLabels)
        if (to_string(l) == name) return l;
    throw DataError("unknown shape label '" + name + "'");
}

std::string to_string(ItemClass cls) {
    switch (cls) {
        case ItemClass::flash_in_the_pan: return "flash-in-the-pan";
        case ItemClass::normal_document: return "normal-document";
        case ItemClass::delayed_document: return "delayed-document";
        case ItemClass::evergreen: return "evergreen";
    }
    return "?";
}

std::vector<int> ClusterModel::cluster_sizes() const {
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    return sizes;
}

double within_cluster_ss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids, std::span<const int> assignments) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        ss += (points.row(i) - centroids.row(assignments[static_cast<std::size_t>(i)])).squaredNorm();
    return ss;
}

namespace {

void check_points(const Eigen::MatrixXd& points, int k) {
    if (k < 1) throw ConfigError("number of clusters must be at least 1");
    if (points.rows() < k)
        throw ConfigError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(points.rows()) + " points");
    if (points.cols() == 0) throw ConfigError("cannot cluster zero-dimensional scores");
    if (!points.allFinite()) throw DataError("cluster input contains non-finite values");
}

Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& points, std::span<const int> assignments, int k,
                              std::vector<int>& counts) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, points.cols());
    counts.assign(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int a = assignments[static_cast<std::size_t>(i)];
        means.row(a) += points.row(i);
        ++counts[static_cast<std::size_t>(a)];
    }
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0) means.row(c) /= counts[static_cast<std::size_t>(c)];
    return means;
}

int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

Eigen::MatrixXd kmeans_pp(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centers(k, points.cols());
    auto first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
    centers.row(0) = points.row(std::min(first, n - 1));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (points.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double running = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                running += d2[static_cast<std::size_t>(i)];
                if (running > target && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::min(static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n)), n - 1);
        }
        centers.row(c) = points.row(pick);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] =
                std::min(d2[static_cast<std::size_t>(i)], (points.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

// Single-point transfers: x leaves cluster a for b when
// n_b/(n_b+1)|x-c_b|^2 < n_a/(n_a-1)|x-c_a|^2, which lowers within_ss.
// Catches Lloyd fixed points that are not local optima under moves.
bool transfer_pass(const Eigen::MatrixXd& points, std::vector<int>& assignments, Eigen::MatrixXd& centroids,
                   std::vector<int>& counts) {
    bool moved = false;
    const auto k = centroids.rows();
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int a = assignments[static_cast<std::size_t>(i)];
        const double na = counts[static_cast<std::size_t>(a)];
        if (na < 2) continue;
        const double from = na / (na - 1) * (points.row(i) - centroids.row(a)).squaredNorm();
        int target = -1;
        double best = from * (1 - 1e-12);
        for (Eigen::Index b = 0; b < k; ++b) {
            if (b == a) continue;
            const double nb = counts[static_cast<std::size_t>(b)];
            const double to = nb / (nb + 1) * (points.row(i) - centroids.row(b)).squaredNorm();
            if (to < best) {
                best = to;
                target = static_cast<int>(b);
            }
        }
        if (target < 0) continue;
        const double nb = counts[static_cast<std::size_t>(target)];
        centroids.row(a) = (na * centroids.row(a) - points.row(i)) / (na - 1);
        centroids.row(target) = (nb * centroids.row(target) + points.row(i)) / (nb + 1);
        --counts[static_cast<std::size_t>(a)];
        ++counts[static_cast<std::size_t>(target)];
        assignments[static_cast<std::size_t>(i)] = target;
        moved = true;
    }
    return moved;
}

ClusterModel lloyd(const Eigen::MatrixXd& points, int k, Eigen::MatrixXd centroids, int max_iterations) {
    const Eigen::Index n = points.rows();
    ClusterModel model;
    model.method = ClusterMethod::kmeans;
    model.k = k;
    model.assignments.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> counts;

    for (model.iterations = 0; model.iterations < max_iterations;) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int a = nearest(centroids, points.row(i));
            if (a != model.assignments[static_cast<std::size_t>(i)]) {
                model.assignments[static_cast<std::size_t>(i)] = a;
                changed = true;
            }
        }
        if (!changed) {
            // Lloyd is stable; try transfers before stopping.
            if (!transfer_pass(points, model.assignments, centroids, counts)) break;
            ++model.iterations;
            centroids = cluster_means(points, model.assignments, k, counts);
            model.objective_trace.push_back(within_cluster_ss(points, centroids, model.assignments));
            continue;
        }
        ++model.iterations;
        centroids = cluster_means(points, model.assignments, k, counts);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int a = model.assignments[static_cast<std::size_t>(i)];
                if (counts[static_cast<std::size_t>(a)] < 2) continue;
                const double d = (points.row(i) - centroids.row(a)).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            model.assignments[static_cast<std::size_t>(far)] = c;
            centroids = cluster_means(points, model.assignments, k, counts);
        }
        model.objective_trace.push_back(within_cluster_ss(points, centroids, model.assignments));
    }
    model.centroids = std::move(centroids);
    model.within_ss = within_cluster_ss(points, model.centroids, model.assignments);
    return model;
}

}  // namespace

ClusterModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts, int max_iterations) {
    check_points(points, k);
    if (restarts < 1) throw ConfigError("k-means needs at least one restart");
    ClusterModel best;
    for (int r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        ClusterModel run = lloyd(points, k, kmeans_pp(points, k, rng), max_iterations);
        if (r == 0 || run.within_ss < best.within_ss) best = std::move(run);
    }
    best.seed = seed;
    return best;
}

namespace {

struct MedoidRun {
    std::vector<int> medoids;
    std::vector<int> nearest;
    double cost = 0.0;
    int iterations = 0;
};

// BUILD: first medoid minimizes the distance sum, then greedy additions;
// ties go to the smaller index.
std::vector<int> pam_build(const Eigen::MatrixXd& dist, int k) {
    const Eigen::Index n = dist.rows();
    std::vector<int> medoids;
    std::vector<char> is_medoid(static_cast<std::size_t>(n), 0);
    std::vector<double> near(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (int c = 0; c < k; ++c) {
        Eigen::Index pick = -1;
        double best_gain = -1.0;
        for (Eigen::Index h = 0; h < n; ++h) {
            if (is_medoid[static_cast<std::size_t>(h)]) continue;
            double gain = 0.0;
            if (c == 0) {
                gain = -dist.col(h).sum();
            } else {
                for (Eigen::Index j = 0; j < n; ++j) gain += std::max(0.0, near[static_cast<std::size_t>(j)] - dist(j, h));
            }
            if (pick < 0 || gain > best_gain) {
                best_gain = gain;
                pick = h;
            }
        }
        medoids.push_back(static_cast<int>(pick));
        is_medoid[static_cast<std::size_t>(pick)] = 1;
        for (Eigen::Index j = 0; j < n; ++j)
            near[static_cast<std::size_t>(j)] = std::min(near[static_cast<std::size_t>(j)], dist(j, pick));
    }
    return medoids;
}

// Distinct medoids drawn with probability proportional to the distance to
// the nearest medoid chosen so far.
std::vector<int> pam_sample(const Eigen::MatrixXd& dist, int k, std::mt19937_64& rng) {
    const Eigen::Index n = dist.rows();
    std::vector<int> medoids{static_cast<int>(std::min<Eigen::Index>(
        static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n)), n - 1))};
    std::vector<double> near(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) near[static_cast<std::size_t>(j)] = dist(j, medoids[0]);
    while (static_cast<int>(medoids.size()) < k) {
        double total = 0.0;
        for (double v : near) total += v;
        Eigen::Index pick = -1;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double running = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                running += near[static_cast<std::size_t>(j)];
                if (running > target && near[static_cast<std::size_t>(j)] > 0.0) {
                    pick = j;
                    break;
                }
            }
        }
        if (pick < 0) {
            // Remaining points coincide with medoids: take the first unused index.
            for (Eigen::Index j = 0; j < n && pick < 0; ++j)
                if (std::find(medoids.begin(), medoids.end(), static_cast<int>(j)) == medoids.end()) pick = j;
        }
        medoids.push_back(static_cast<int>(pick));
        for (Eigen::Index j = 0; j < n; ++j)
            near[static_cast<std::size_t>(j)] = std::min(near[static_cast<std::size_t>(j)], dist(j, pick));
    }
    return medoids;
}

// SWAP with eager exchanges: candidates are visited cyclically and the first
// improving (medoid, candidate) exchange is applied at once. For a candidate
// h the change of every possible exchange is found in one pass over the
// points. Stops after a full cycle without an improving exchange, so no
// single exchange lowers the cost when it returns.
MedoidRun pam_swap(const Eigen::MatrixXd& dist, std::vector<int> medoids) {
    const Eigen::Index n = dist.rows();
    const auto un = static_cast<std::size_t>(n);
    const int k = static_cast<int>(medoids.size());
    std::vector<char> is_medoid(un, 0);
    for (int m : medoids) is_medoid[static_cast<std::size_t>(m)] = 1;
    std::vector<double> d1(un), d2(un);
    std::vector<int> n1(un);
    std::vector<double> removal(static_cast<std::size_t>(k));
    auto refresh = [&] {
        double cost = 0.0;
        std::fill(removal.begin(), removal.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            double best = std::numeric_limits<double>::infinity(), second = best;
            int who = 0;
            for (int c = 0; c < k; ++c) {
                const double d = dist(j, medoids[static_cast<std::size_t>(c)]);
                if (d < best) {
                    second = best;
                    best = d;
                    who = c;
                } else if (d < second) {
                    second = d;
                }
            }
            const auto uj = static_cast<std::size_t>(j);
            d1[uj] = best;
            d2[uj] = second;
            n1[uj] = who;
            cost += best;
            if (k > 1) removal[static_cast<std::size_t>(who)] += second - best;
        }
        return cost;
    };

    double cost = refresh();
    int swaps = 0;
    std::vector<double> delta(static_cast<std::size_t>(k));
    Eigen::Index since_last = 0;
    for (Eigen::Index h = 0; since_last < n; h = (h + 1) % n, ++since_last) {
        if (is_medoid[static_cast<std::size_t>(h)]) continue;
        std::copy(removal.begin(), removal.end(), delta.begin());
        double shared = 0.0;
        if (k == 1) {
            for (Eigen::Index j = 0; j < n; ++j) shared += dist(j, h) - d1[static_cast<std::size_t>(j)];
        } else {
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                const double dh = dist(j, h);
                if (dh < d1[uj]) {
                    shared += dh - d1[uj];
                    delta[static_cast<std::size_t>(n1[uj])] += d1[uj] - d2[uj];
                } else if (dh < d2[uj]) {
                    delta[static_cast<std::size_t>(n1[uj])] += dh - d2[uj];
                }
            }
        }
        int best_c = 0;
        for (int c = 1; c < k; ++c)
            if (delta[static_cast<std::size_t>(c)] < delta[static_cast<std::size_t>(best_c)]) best_c = c;
        const double change = delta[static_cast<std::size_t>(best_c)] + shared;
        if (!(change < -1e-12 * std::max(cost, 1e-300))) continue;
        is_medoid[static_cast<std::size_t>(medoids[static_cast<std::size_t>(best_c)])] = 0;
        medoids[static_cast<std::size_t>(best_c)] = static_cast<int>(h);
        is_medoid[static_cast<std::size_t>(h)] = 1;
        cost = refresh();
        ++swaps;
        since_last = 0;
    }
    return {std::move(medoids), std::move(n1), cost, swaps};
}

}  // namespace

ClusterModel kmedoids(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts) {
    check_points(points, k);
    if (restarts < 1) throw ConfigError("k-medoids needs at least one restart");
    const Eigen::Index n = points.rows();
    // Symmetric; the helpers read it by column.
    Eigen::MatrixXd dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = (points.row(i) - points.row(j)).squaredNorm();
    }

    MedoidRun best = pam_swap(dist, pam_build(dist, k));
    for (int r = 1; r < restarts; ++r) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        MedoidRun run = pam_swap(dist, pam_sample(dist, k, rng));
        if (run.cost < best.cost) best = std::move(run);
    }

    ClusterModel model;
    model.method = ClusterMethod::kmedoids;
    model.k = k;
    model.seed = seed;
    model.iterations = best.iterations;
    model.medoids = best.medoids;
    model.centroids.resize(k, points.cols());
    for (int c = 0; c < k; ++c) model.centroids.row(c) = points.row(best.medoids[static_cast<std::size_t>(c)]);
    model.assignments = std::move(best.nearest);
    model.within_ss = within_cluster_ss(points, model.centroids, model.assignments);
    return model;
}

std::vector<WardMerge> ward_merges(const Eigen::MatrixXd& points) {
    const Eigen::Index n = points.rows();
    if (n == 0) return {};
    if (!points.allFinite()) throw DataError("cluster input contains non-finite values");
    const auto un = static_cast<std::size_t>(n);
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).squaredNorm();
    }
    std::vector<char> active(un, 1);
    std::vector<double> size(un, 1.0);
    std::vector<Eigen::Index> nn(un, -1);
    std::vector<double> nnd(un, std::numeric_limits<double>::infinity());

    // nn[i] is the nearest active j > i (smallest j on ties). d stays
    // symmetric, so scans read down a column.
    auto rescan = [&](Eigen::Index i) {
        nn[static_cast<std::size_t>(i)] = -1;
        nnd[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (active[static_cast<std::size_t>(j)] && d(j, i) < nnd[static_cast<std::size_t>(i)]) {
                nnd[static_cast<std::size_t>(i)] = d(j, i);
                nn[static_cast<std::size_t>(i)] = j;
            }
    };
    for (Eigen::Index i = 0; i < n; ++i) rescan(i);

    std::vector<WardMerge> merges;
    merges.reserve(un - 1);
    for (Eigen::Index step = 0; step + 1 < n; ++step) {
        Eigen::Index a = -1;
        for (Eigen::Index i = 0; i < n; ++i)
            if (active[static_cast<std::size_t>(i)] && nn[static_cast<std::size_t>(i)] >= 0 &&
                (a < 0 || nnd[static_cast<std::size_t>(i)] < nnd[static_cast<std::size_t>(a)]))
                a = i;
        const Eigen::Index b = nn[static_cast<std::size_t>(a)];
        const double dab = d(a, b);
        merges.push_back({static_cast<int>(a), static_cast<int>(b), dab});

        const double na = size[static_cast<std::size_t>(a)], nb = size[static_cast<std::size_t>(b)];
        for (Eigen::Index k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == a || k == b) continue;
            const double nk = size[static_cast<std::size_t>(k)];
            const double updated = ((na + nk) * d(k, a) + (nb + nk) * d(k, b) - nk * dab) / (na + nb + nk);
            d(k, a) = d(a, k) = updated;
        }
        active[static_cast<std::size_t>(b)] = 0;
        size[static_cast<std::size_t>(a)] = na + nb;

        for (Eigen::Index k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)]) continue;
            const auto uk = static_cast<std::size_t>(k);
            if (k == a || nn[uk] == a || nn[uk] == b) {
                rescan(k);
            } else if (k < a && (d(k, a) < nnd[uk] || (d(k, a) == nnd[uk] && a < nn[uk]))) {
                nnd[uk] = d(k, a);
                nn[uk] = a;
            }
        }
    }
    return merges;
}

ClusterModel ward_cut(const Eigen::MatrixXd& points, std::span<const WardMerge> merges, int k) {
    check_points(points, k);
    const Eigen::Index n = points.rows();
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = static_cast<int>(i);
    const std::size_t applied = static_cast<std::size_t>(n - k);
    for (std::size_t m = 0; m < applied; ++m) parent[static_cast<std::size_t>(merges[m].b)] = merges[m].a;
    auto root = [&](int i) {
        while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
        return i;
    };
    std::map<int, int> cluster_of_root;
    ClusterModel model;
    model.method = ClusterMethod::ward;
    model.k = k;
    model.assignments.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int r = root(static_cast<int>(i));
        auto [it, inserted] = cluster_of_root.emplace(r, static_cast<int>(cluster_of_root.size()));
        model.assignments[static_cast<std::size_t>(i)] = it->second;
    }
    std::vector<int> counts;
    model.centroids = cluster_means(points, model.assignments, k, counts);
    model.within_ss = within_cluster_ss(points, model.centroids, model.assignments);
    model.iterations = static_cast<int>(applied);
    return model;
}

ClusterModel ward(const Eigen::MatrixXd& points, int k) {
    check_points(points, k);
    const auto merges = ward_merges(points);
    return ward_cut(points, merges, k);
}

bool is_nondeclining(std::span<const double> curve, double tolerance) {
    if (curve.empty()) return true;
    const double eps = tolerance * *std::max_element(curve.begin(), curve.end());
    double running = curve.front();
    for (double v : curve) {
        if (v < running - eps) return false;
        running = std::max(running, v);
    }
    return true;
}

namespace {

std::size_t peak_index(std::span<const double> curve) {
    return static_cast<std::size_t>(std::max_element(curve.begin(), curve.end()) - curve.begin());
}

}  // namespace

std::vector<std::vector<double>> centroid_curves(const ClusterModel& model, const LatentBasis& basis) {
    if (model.centroids.cols() != basis.k())
        throw ConfigError("centroid dimension " + std::to_string(model.centroids.cols()) + " differs from basis K " +
                          std::to_string(basis.k()));
    std::vector<std::vector<double>> curves;
    for (Eigen::Index c = 0; c < model.centroids.rows(); ++c) {
        std::vector<double> scores(static_cast<std::size_t>(basis.k()));
        for (int kk = 0; kk < basis.k(); ++kk) {
            const double s = model.scale.empty() ? 1.0 : model.scale[static_cast<std::size_t>(kk)];
            scores[static_cast<std::size_t>(kk)] = model.centroids(c, kk) * s;
        }
        auto eta = basis.eta(scores);
        for (double& e : eta) e = std::exp(e);
        curves.push_back(std::move(eta));
    }
    return curves;
}

std::vector<ShapeLabel> label_clusters(const ClusterModel& model, const LatentBasis& basis,
                                       const LabelThresholds& thresholds) {
    const auto curves = centroid_curves(model, basis);
    const double late = thresholds.delayed_fraction * static_cast<double>(basis.grid_size);
    std::vector<ShapeLabel> labels(curves.size(), ShapeLabel::normal_low);
    std::vector<std::size_t> normal;
    std::vector<double> normal_levels;
    for (std::size_t c = 0; c < curves.size(); ++c) {
        if (is_nondeclining(curves[c], thresholds.evergreen_tolerance)) {
            labels[c] = ShapeLabel::evergreen;
        } else if (static_cast<double>(peak_index(curves[c]) + 1) > late) {
            labels[c] = ShapeLabel::delayed;
        } else {
            normal.push_back(c);
            normal_levels.push_back(stats::mean(curves[c]));
        }
    }
    if (!normal.empty()) {
        const double med = stats::median(normal_levels);
        for (std::size_t i = 0; i < normal.size(); ++i)
            labels[normal[i]] = normal_levels[i] > med ? ShapeLabel::normal_high : ShapeLabel::normal_low;
    }
    return labels;
}

ItemClass classify_item(std::span<const double> intensity, const LabelThresholds& thresholds) {
    if (intensity.empty()) throw ConfigError("classify_item: empty intensity curve");
    if (is_nondeclining(intensity, thresholds.evergreen_tolerance)) return ItemClass::evergreen;
    const auto t = static_cast<double>(intensity.size());
    const std::size_t peak = peak_index(intensity);
    const double peak_year = static_cast<double>(peak + 1);
    if (peak_year <= thresholds.flash_peak_fraction * t &&
        intensity.back() < thresholds.flash_end_ratio * intensity[peak])
        return ItemClass::flash_in_the_pan;
    if (peak_year > thresholds.delayed_fraction * t) return ItemClass::delayed_document;
    return ItemClass::normal_document;
}

ItemClass classify_item(const PaperFit& fit, const LabelThresholds& thresholds) {
    return classify_item(std::span<const double>(fit.intensity), thresholds);
}

double silhouette(const Eigen::MatrixXd& points, std::span<const int> assignments, int k) {
    const Eigen::Index n = points.rows();
    if (k < 2 || n < 2) return 0.0;
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int own = assignments[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(own)] < 2) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) sums[static_cast<std::size_t>(assignments[static_cast<std::size_t>(j)])] += (points.row(i) - points.row(j)).norm();
        const double a = sums[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != own && sizes[static_cast<std::size_t>(c)] > 0) b = std::min(b, sums[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)]);
        const double denom = std::max(a, b);
        if (std::isfinite(b) && denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw ConfigError("adjusted_rand_index: partitions differ in length");
    const auto n = static_cast<double>(a.size());
    if (a.size() < 2) return 1.0;
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& [key, count] : joint) index += choose2(count);
    for (const auto& [key, count] : rows) sum_rows += choose2(count);
    for (const auto& [key, count] : cols) sum_cols += choose2(count);
    const double expected = sum_rows * sum_cols / choose2(n);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return index == expected ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

Eigen::MatrixXd standardize_scores(const Eigen::MatrixXd& scores, std::span<const double> eigenvalues) {
    if (static_cast<std::size_t>(scores.cols()) != eigenvalues.size())
        throw ConfigError("standardize: eigenvalue count differs from score dimension");
    Eigen::MatrixXd out = scores;
    for (Eigen::Index k = 0; k < out.cols(); ++k) {
        const double lambda = eigenvalues[static_cast<std::size_t>(k)];
        if (!(lambda > 0.0)) throw NumericalError("cannot standardize by a nonpositive eigenvalue");
        out.col(k) /= std::sqrt(lambda);
    }
    return out;
}

Eigen::MatrixXd score_matrix(std::span<const PaperFit> fits) {
    if (fits.empty()) return {};
    const auto d = static_cast<Eigen::Index>(fits.front().scores.size());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(fits.size()), d);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (static_cast<Eigen::Index>(fits[i].scores.size()) != d) throw ConfigError("score vectors differ in length");
        for (Eigen::Index k = 0; k < d; ++k) m(static_cast<Eigen::Index>(i), k) = fits[i].scores[static_cast<std::size_t>(k)];
    }
    return m;
}

namespace {

ClusterModel run_method(const Eigen::MatrixXd& points, ClusterMethod method, int k, const ClusterOptions& options,
                        const std::vector<WardMerge>* merges) {
    switch (method) {
        case ClusterMethod::kmeans: return kmeans(points, k, options.seed, options.restarts);
        case ClusterMethod::kmedoids: return kmedoids(points, k, options.seed, options.restarts);
        case ClusterMethod::ward: return merges ? ward_cut(points, *merges, k) : ward(points, k);
    }
    throw ConfigError("unknown clustering method");
}

Eigen::MatrixXd prepared(const Eigen::MatrixXd& scores, const LatentBasis& basis, const ClusterOptions& options,
                         std::vector<double>& scale) {
    if (scores.cols() == 0) throw ConfigError("clustering refused: scores are zero-dimensional (K basis = 0)");
    if (scores.cols() != basis.k()) throw ConfigError("score dimension differs from basis K");
    scale.clear();
    if (!options.standardize) return scores;
    for (double lambda : basis.eigenvalues) scale.push_back(std::sqrt(lambda));
    return standardize_scores(scores, basis.eigenvalues);
}

}  // namespace

ClusterModel cluster_scores(const Eigen::MatrixXd& scores, const LatentBasis& basis, const ClusterOptions& options) {
    std::vector<double> scale;
    const Eigen::MatrixXd points = prepared(scores, basis, options, scale);
    ClusterModel model = run_method(points, options.method, options.k, options, nullptr);
    model.seed = options.seed;
    model.scale = std::move(scale);
    model.labels = label_clusters(model, basis, options.thresholds);
    return model;
}

SweepReport robustness_sweep(const Eigen::MatrixXd& scores, const LatentBasis& basis, std::span<const int> k_values,
                             std::span<const ClusterMethod> methods, const ClusterOptions& options, unsigned threads) {
    if (k_values.empty() || methods.empty()) throw ConfigError("robustness sweep needs nonempty K and method lists");
    std::vector<double> scale;
    const Eigen::MatrixXd points = prepared(scores, basis, options, scale);

    std::vector<WardMerge> merges;
    if (std::find(methods.begin(), methods.end(), ClusterMethod::ward) != methods.end()) merges = ward_merges(points);

    SweepReport report;
    for (ClusterMethod m : methods)
        for (int k : k_values) {
            SweepCell cell;
            cell.method = m;
            cell.k = k;
            report.cells.push_back(std::move(cell));
        }
    parallel_for(report.cells.size(), threads, [&](std::size_t i) {
        SweepCell& cell = report.cells[i];
        cell.model = run_method(points, cell.method, cell.k, options, &merges);
        cell.model.seed = options.seed;
        cell.model.scale = scale;
        cell.model.labels = label_clusters(cell.model, basis, options.thresholds);
        cell.within_ss = cell.model.within_ss;
        cell.silhouette = silhouette(points, cell.model.assignments, cell.k);
        const auto sizes = cell.model.cluster_sizes();
        for (int c = 0; c < cell.k; ++c)
            cell.label_counts[static_cast<std::size_t>(cell.model.labels[static_cast<std::size_t>(c)])] +=
                sizes[static_cast<std::size_t>(c)];
    });

    for (int k : k_values)
        for (std::size_t a = 0; a < methods.size(); ++a)
            for (std::size_t b = a + 1; b < methods.size(); ++b) {
                const SweepCell* ca = nullptr;
                const SweepCell* cb = nullptr;
                for (const auto& cell : report.cells) {
                    if (cell.k == k && cell.method == methods[a]) ca = &cell;
                    if (cell.k == k && cell.method == methods[b]) cb = &cell;
                }
                report.ari.push_back({k, methods[a], methods[b], adjusted_rand_index(ca->model.assignments, cb->model.assignments)});
            }
    return report;
}

}  // namespace evergreen
