#include "evergreen/config.hpp"

#include "evergreen/error.hpp"

#include <string>

namespace evergreen {

void PipelineConfig::validate() const {
    if (k_basis < 0) throw ConfigError("--k-basis must be nonnegative");
    if (fve && !(*fve > 0.0 && *fve <= 1.0)) throw ConfigError("--fve must lie in (0, 1]");
    if (k_clusters < 1) throw ConfigError("--k-clusters must be at least 1");
    if (min_total < 0) throw ConfigError("--min-total must be nonnegative");
    if (!(m_wsb > 0.0)) throw ConfigError("--m-wsb must be positive");
    if (eval_grid < 2) throw ConfigError("--eval-grid must be at least 2");
    if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("bandwidth must be positive");
    if (restarts < 1) throw ConfigError("restarts must be at least 1");
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (selection_k.empty()) throw ConfigError("selection K range is empty");
    for (int k : selection_k)
        if (k < 0) throw ConfigError("selection K values must be nonnegative");
    for (int k : sweep_k)
        if (k < 1) throw ConfigError("sweep K values must be positive");
    for (Count t : thresholds)
        if (t < 0) throw ConfigError("thresholds must be nonnegative");
    if (!(labels.evergreen_tolerance >= 0.0)) throw ConfigError("evergreen tolerance must be nonnegative");
}

}  // namespace evergreen
