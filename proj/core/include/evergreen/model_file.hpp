#pragma once

#include "evergreen/clustering.hpp"
#include "evergreen/config.hpp"
#include "evergreen/fpca.hpp"
#include "evergreen/latent_basis.hpp"
#include "evergreen/poisson_fit.hpp"
#include "evergreen/trajectory.hpp"
#include "evergreen/wsb.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace evergreen {

inline constexpr int kSchemaVersion = 1;

struct IngestStage {
    Corpus input;  // as read, before the total-count filter
    std::size_t kept = 0;
    std::size_t dropped = 0;

    /// The filtered corpus the later stages work on.
    Corpus filtered(Count min_total) const;
};

struct FitStage {
    LatentBasis basis;
    SelectionTable selection;
    std::vector<PaperFit> fits;
};

struct BaselineStage {
    double m = 30.0;
    std::vector<WsbFit> fits;
    ModelComparison comparison;
};

struct LabelStage {
    std::vector<ItemClass> item_classes;  // one per fit
};

struct ThresholdRun {
    Count threshold = 0;
    std::size_t n_items = 0;
    std::size_t common_items = 0;
    int k_basis = 0;
    double ari_vs_base = 1.0;
    double evergreen_persistence = 1.0;  // NaN when the base run has no evergreen items
    std::size_t evergreen_size = 0;
    std::array<int, 4> label_counts{};
    std::vector<std::string> ids;
    std::vector<int> assignments;
    std::vector<ShapeLabel> labels;  // per cluster
};

struct SensitivityStage {
    SweepReport sweep;
    std::vector<ThresholdRun> thresholds;
};

/// Everything a run produced. Stages that did not run are empty.
struct ModelFile {
    int schema_version = kSchemaVersion;
    std::string created;
    PipelineConfig config;
    std::optional<IngestStage> ingest;
    std::optional<FitStage> fit;
    std::optional<BaselineStage> baseline;
    std::optional<ClusterModel> cluster;
    std::optional<LabelStage> label;
    std::optional<SensitivityStage> sensitivity;
};

/// Canonical JSON text. The checksum is SHA-256 over the same document with
/// `checksum` and `created` removed, so it is reproducible across runs.
std::string serialize_model(const ModelFile& model);
ModelFile deserialize_model(const std::string& text);

void save_model(const std::string& path, const ModelFile& model);
/// Throws DataError on a schema version mismatch, a checksum mismatch, or a
/// truncated or unparsable file.
ModelFile load_model(const std::string& path);

/// UTC ISO-8601 time, or SOURCE_DATE_EPOCH when that is set.
std::string current_timestamp();

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

}  // namespace evergreen
