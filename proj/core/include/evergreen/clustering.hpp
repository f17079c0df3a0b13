#pragma once

#include "evergreen/latent_basis.hpp"
#include "evergreen/poisson_fit.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace evergreen {

enum class ClusterMethod { kmeans, kmedoids, ward };

std::string to_string(ClusterMethod method);
ClusterMethod parse_method(const std::string& name);

enum class ShapeLabel { evergreen, delayed, normal_low, normal_high };
inline constexpr std::array kShapeLabels{ShapeLabel::evergreen, ShapeLabel::delayed, ShapeLabel::normal_low,
                                         ShapeLabel::normal_high};
std::string to_string(ShapeLabel label);
ShapeLabel parse_shape_label(const std::string& name);

enum class ItemClass { flash_in_the_pan, normal_document, delayed_document, evergreen };
std::string to_string(ItemClass cls);

/// Partition of score vectors. `centroids` live in the clustered coordinates;
/// when `scale` is nonempty the points were divided by it per dimension
/// before clustering.
struct ClusterModel {
    ClusterMethod method = ClusterMethod::kmeans;
    int k = 0;
    Eigen::MatrixXd centroids;  // k x d
    std::vector<int> assignments;
    double within_ss = 0.0;
    std::uint64_t seed = 0;
    int iterations = 0;
    std::vector<double> scale;
    std::vector<ShapeLabel> labels;
    std::vector<int> medoids;             // kmedoids only
    std::vector<double> objective_trace;  // kmeans: within_ss after every Lloyd iteration of the best restart

    std::vector<int> cluster_sizes() const;
};

/// sum_i |x_i - c_{a(i)}|^2.
double within_cluster_ss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids, std::span<const int> assignments);

/// k-means++ seeding then Lloyd iterations until assignments are stable or
/// 300 iterations, with single-point transfers tried whenever Lloyd settles;
/// best of `restarts` by within_ss. Restart r draws from
/// derive_seed(seed, r). An empty cluster is re-seeded at the point farthest
/// from its centroid.
ClusterModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10, int max_iterations = 300);

/// PAM with squared Euclidean cost; medoids are data points. SWAP runs from
/// the BUILD medoids and from `restarts - 1` distance-weighted random draws
/// (restart r uses derive_seed(seed, r)); the cheapest result wins.
ClusterModel kmedoids(const Eigen::MatrixXd& points, int k, std::uint64_t seed = 0, int restarts = 10);

struct WardMerge {
    int a = 0;  // surviving slot (smaller)
    int b = 0;  // absorbed slot
    double height = 0.0;
};

/// Full agglomerative Ward dendrogram via Lance-Williams updates on squared
/// Euclidean distances. Clusters live in slots named by their first point;
/// ties go to the lexicographically smallest (a, b).
std::vector<WardMerge> ward_merges(const Eigen::MatrixXd& points);

/// Applies the first n - k merges and numbers clusters by smallest member.
ClusterModel ward_cut(const Eigen::MatrixXd& points, std::span<const WardMerge> merges, int k);

ClusterModel ward(const Eigen::MatrixXd& points, int k);

struct LabelThresholds {
    double evergreen_tolerance = 0.05;  // fraction of the curve maximum
    double delayed_fraction = 0.5;      // peak later than this fraction of T
    double flash_peak_fraction = 1.0 / 6.0;
    double flash_end_ratio = 0.2;
};

/// True when no point falls more than tolerance * max below the running
/// maximum of the preceding points.
bool is_nondeclining(std::span<const double> curve, double tolerance);

/// Intensity exp(mean + sum_k c_k phi_k) of every centroid, in original score units.
std::vector<std::vector<double>> centroid_curves(const ClusterModel& model, const LatentBasis& basis);

/// Labels each cluster: evergreen if its centroid curve never declines;
/// delayed if it peaks after delayed_fraction * T; otherwise normal-high when
/// its mean level is above the median over normal clusters, else normal-low.
std::vector<ShapeLabel> label_clusters(const ClusterModel& model, const LatentBasis& basis,
                                       const LabelThresholds& thresholds = {});

ItemClass classify_item(std::span<const double> intensity, const LabelThresholds& thresholds = {});
ItemClass classify_item(const PaperFit& fit, const LabelThresholds& thresholds = {});

/// Mean silhouette width (Euclidean); singletons contribute 0; 0 for k < 2.
double silhouette(const Eigen::MatrixXd& points, std::span<const int> assignments, int k);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Divides dimension k by sqrt(lambda_k).
Eigen::MatrixXd standardize_scores(const Eigen::MatrixXd& scores, std::span<const double> eigenvalues);

struct ClusterOptions {
    ClusterMethod method = ClusterMethod::kmeans;
    int k = 4;
    std::uint64_t seed = 1;
    int restarts = 10;
    bool standardize = false;
    LabelThresholds thresholds;
};

/// Stacks the scores of `fits` into an n x K matrix.
Eigen::MatrixXd score_matrix(std::span<const PaperFit> fits);

/// Clusters score vectors with the chosen method and labels the clusters.
/// Throws ConfigError for zero-dimensional scores.
ClusterModel cluster_scores(const Eigen::MatrixXd& scores, const LatentBasis& basis, const ClusterOptions& options);

struct SweepCell {
    ClusterMethod method = ClusterMethod::kmeans;
    int k = 0;
    ClusterModel model;
    double within_ss = 0.0;
    double silhouette = 0.0;
    std::array<int, 4> label_counts{};  // items per ShapeLabel, in kShapeLabels order
};

struct PairwiseAri {
    int k = 0;
    ClusterMethod a = ClusterMethod::kmeans;
    ClusterMethod b = ClusterMethod::kmeans;
    double ari = 0.0;
};

struct SweepReport {
    std::vector<SweepCell> cells;  // method-major, K ascending
    std::vector<PairwiseAri> ari;
};

/// Runs every (method, K) cell. Cells are independent; the report is the
/// same for any thread count.
SweepReport robustness_sweep(const Eigen::MatrixXd& scores, const LatentBasis& basis, std::span<const int> k_values,
                             std::span<const ClusterMethod> methods, const ClusterOptions& options, unsigned threads = 1);

}  // namespace evergreen
