#pragma once

#include "evergreen/config.hpp"
#include "evergreen/model_file.hpp"

#include <string>

namespace evergreen {

/// Stage names in pipeline order.
inline constexpr const char* kStageNames[] = {"ingest", "fit", "baseline", "cluster", "label", "sensitivity"};

/// Reads `config.input`.
Corpus load_input(const PipelineConfig& config);

/// Each stage records its output in the model and throws, naming itself,
/// when a prerequisite stage is missing or the stage fails.
ModelFile ingest_stage(const PipelineConfig& config, Corpus input);
void fit_stage(ModelFile& model);
void baseline_stage(ModelFile& model);
void cluster_stage(ModelFile& model);
void label_stage(ModelFile& model);
void sensitivity_stage(ModelFile& model);

struct RunOptions {
    bool baseline = true;
    bool sensitivity = true;
};

ModelFile run_pipeline(const PipelineConfig& config, const RunOptions& options = {});
ModelFile run_pipeline(const PipelineConfig& config, Corpus input, const RunOptions& options = {});

/// Basis and per-item fits for one corpus under `config`, without the K
/// selection table. Shared by the fit stage and the threshold sweep.
struct BasisFits {
    LatentBasis basis;
    std::vector<PaperFit> fits;
};
BasisFits fit_basis_and_scores(const Corpus& corpus, const PipelineConfig& config);

ClusterOptions cluster_options(const PipelineConfig& config);

}  // namespace evergreen
