#pragma once

#include "evergreen/model_file.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace evergreen {

inline constexpr std::array<const char*, 9> kPlotIds{
    "mean_deriv", "eigenfunctions", "k_selection",  "gof_kde", "gof_scatter",
    "cluster_curves", "robustness", "thresholds", "exemplar_trajectories"};

/// Plot ids whose stages are present in `model`.
std::vector<std::string> available_plots(const ModelFile& model);

/// Writes <id>.csv and <id>.svg into `dir` for each requested id and returns
/// the paths written. Everything is computed from the model alone. Throws
/// ConfigError for an unknown id or when the stage a plot needs is missing.
std::vector<std::string> emit_plots(const ModelFile& model, std::span<const std::string> which, const std::string& dir);

/// `id,cluster,label` for the primary clustering, plus `class` when the
/// label stage has run.
void write_assignments_csv(const ModelFile& model, const std::string& path);

}  // namespace evergreen
