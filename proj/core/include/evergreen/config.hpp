#pragma once

#include "evergreen/clustering.hpp"
#include "evergreen/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace evergreen {

struct PipelineConfig {
    std::string input;
    std::string output_dir = ".";
    std::uint64_t seed = 1;
    int k_basis = 4;
    std::optional<double> fve;  // when set, K is the smallest reaching this FVE
    int k_clusters = 4;
    ClusterMethod method = ClusterMethod::kmeans;
    Count min_total = 0;
    double m_wsb = 30.0;
    bool standardize = false;
    std::size_t eval_grid = 512;  // KDE evaluation points
    std::optional<double> bandwidth;  // mean smoother; GCV when unset
    int restarts = 10;
    int folds = 5;
    std::vector<int> selection_k{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> sweep_k{2, 3, 4, 5, 6};
    std::vector<ClusterMethod> sweep_methods{ClusterMethod::kmeans, ClusterMethod::kmedoids, ClusterMethod::ward};
    std::vector<Count> thresholds{0, 10};
    LabelThresholds labels;
    unsigned threads = 1;  // never affects results

    /// Throws ConfigError for out-of-range values.
    void validate() const;
};

}  // namespace evergreen
