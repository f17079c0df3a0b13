#include "evergreen/pipeline.hpp"

#include "evergreen/error.hpp"
#include "evergreen/symmetric_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace evergreen {

namespace {

template <class Fn>
void in_stage(const std::string& name, Fn&& fn) {
    const std::string prefix = "stage '" + name + "': ";
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(prefix + e.what());
    }
}

[[noreturn]] void missing(const std::string& stage, const std::string& needed) {
    throw ConfigError("stage '" + stage + "' needs the '" + needed + "' stage, which has not run");
}

MeanPolicy mean_policy(const PipelineConfig& config) {
    MeanPolicy policy;
    policy.bandwidth = config.bandwidth;
    return policy;
}

BasisPolicy basis_policy(const PipelineConfig& config) {
    return config.fve ? BasisPolicy::fve(*config.fve) : BasisPolicy::fixed(config.k_basis);
}

struct Decomposition {
    SmoothCurve mean;
    std::vector<double> raw_mean;
    SymmetricEigen eigen;
};

Decomposition decompose(const Corpus& corpus, const PipelineConfig& config) {
    if (corpus.size() < 2)
        throw DataError("need at least two items after filtering, have " + std::to_string(corpus.size()));
    Decomposition d{estimate_mean(corpus, mean_policy(config)), cross_sectional_log_mean(corpus), {}};
    d.eigen = eigendecompose_symmetric(covariance_matrix(corpus, d.mean.values), corpus.grid().delta());
    return d;
}

Corpus filtered_corpus(const ModelFile& model) { return model.ingest->filtered(model.config.min_total); }

std::vector<double> intensity_of(const PaperFit& fit, const LatentBasis& basis) {
    if (!fit.intensity.empty()) return fit.intensity;
    auto eta = basis.eta(fit.scores);
    for (double& e : eta) e = std::exp(e);
    return eta;
}

}  // namespace

Corpus load_input(const PipelineConfig& config) {
    if (config.input.empty()) throw ConfigError("no input corpus given (--input)");
    return read_corpus_file(config.input);
}

ClusterOptions cluster_options(const PipelineConfig& config) {
    ClusterOptions options;
    options.method = config.method;
    options.k = config.k_clusters;
    options.seed = config.seed;
    options.restarts = config.restarts;
    options.standardize = config.standardize;
    options.thresholds = config.labels;
    return options;
}

BasisFits fit_basis_and_scores(const Corpus& corpus, const PipelineConfig& config) {
    const Decomposition d = decompose(corpus, config);
    BasisFits out;
    out.basis = truncate_basis(d.eigen, d.mean, basis_policy(config), d.raw_mean);
    out.fits = fit_corpus(corpus, out.basis, FitOptions{}, config.threads);
    return out;
}

ModelFile ingest_stage(const PipelineConfig& config, Corpus input) {
    ModelFile model;
    in_stage("ingest", [&] {
        config.validate();
        model.config = config;
        const FilterResult filtered = filter_by_total(input, config.min_total);
        model.ingest = IngestStage{std::move(input), filtered.kept, filtered.dropped};
    });
    return model;
}

void fit_stage(ModelFile& model) {
    if (!model.ingest) missing("fit", "ingest");
    in_stage("fit", [&] {
        const PipelineConfig& config = model.config;
        const Corpus corpus = filtered_corpus(model);
        const Decomposition d = decompose(corpus, config);

        FitStage stage;
        stage.basis = truncate_basis(d.eigen, d.mean, basis_policy(config), d.raw_mean);

        // The selection table needs the widest basis the K range asks for.
        const int widest = std::min(stage.basis.positive_count(), *std::max_element(config.selection_k.begin(), config.selection_k.end()));
        if (corpus.size() >= static_cast<std::size_t>(2 * config.folds) && widest >= 1) {
            const LatentBasis full = truncate_basis(d.eigen, d.mean, BasisPolicy::fixed(widest), d.raw_mean);
            SelectionOptions options;
            options.k_values.clear();
            for (int k : config.selection_k)
                if (k <= widest) options.k_values.push_back(k);
            options.folds = config.folds;
            options.threads = config.threads;
            stage.selection = select_k_loglik(corpus, full, options);
        }
        stage.fits = fit_corpus(corpus, stage.basis, FitOptions{}, config.threads);
        model.fit = std::move(stage);
    });
}

void baseline_stage(ModelFile& model) {
    if (!model.ingest) missing("baseline", "ingest");
    if (!model.fit) missing("baseline", "fit");
    in_stage("baseline", [&] {
        const Corpus corpus = filtered_corpus(model);
        WsbOptions options;
        options.m = model.config.m_wsb;
        BaselineStage stage;
        stage.m = options.m;
        stage.fits = fit_wsb_corpus(corpus, options, model.config.threads);
        stage.comparison = compare_models(model.fit->fits, stage.fits, model.config.eval_grid);
        model.baseline = std::move(stage);
    });
}

void cluster_stage(ModelFile& model) {
    if (!model.fit) missing("cluster", "fit");
    in_stage("cluster", [&] {
        const Eigen::MatrixXd scores = score_matrix(model.fit->fits);
        model.cluster = cluster_scores(scores, model.fit->basis, cluster_options(model.config));
    });
}

void label_stage(ModelFile& model) {
    if (!model.fit) missing("label", "fit");
    if (!model.cluster) missing("label", "cluster");
    in_stage("label", [&] {
        const LatentBasis& basis = model.fit->basis;
        model.cluster->labels = label_clusters(*model.cluster, basis, model.config.labels);
        LabelStage stage;
        for (const auto& fit : model.fit->fits)
            stage.item_classes.push_back(classify_item(std::span<const double>(intensity_of(fit, basis)), model.config.labels));
        model.label = std::move(stage);
    });
}

void sensitivity_stage(ModelFile& model) {
    if (!model.ingest) missing("sensitivity", "ingest");
    if (!model.fit) missing("sensitivity", "fit");
    in_stage("sensitivity", [&] {
        const PipelineConfig& config = model.config;
        if (config.thresholds.empty()) throw ConfigError("threshold list is empty");
        SensitivityStage stage;
        if (!config.sweep_k.empty() && !config.sweep_methods.empty())
            stage.sweep = robustness_sweep(score_matrix(model.fit->fits), model.fit->basis, config.sweep_k,
                                           config.sweep_methods, cluster_options(config), config.threads);

        std::unordered_map<std::string, std::pair<int, bool>> base;  // id -> (cluster, evergreen)
        for (std::size_t r = 0; r < config.thresholds.size(); ++r) {
            const Count threshold = config.thresholds[r];
            const Corpus corpus = filter_by_total(model.ingest->input, threshold).corpus;
            if (corpus.size() < static_cast<std::size_t>(config.k_clusters))
                throw DataError("threshold " + std::to_string(threshold) + " leaves " + std::to_string(corpus.size()) +
                                " items, fewer than K = " + std::to_string(config.k_clusters));
            const BasisFits bf = fit_basis_and_scores(corpus, config);
            const ClusterModel cm = cluster_scores(score_matrix(bf.fits), bf.basis, cluster_options(config));

            ThresholdRun run;
            run.threshold = threshold;
            run.n_items = corpus.size();
            run.k_basis = bf.basis.k();
            run.labels = cm.labels;
            run.assignments = cm.assignments;
            for (const auto& item : corpus.items()) run.ids.push_back(item.id);
            const auto sizes = cm.cluster_sizes();
            for (int c = 0; c < cm.k; ++c) {
                run.label_counts[static_cast<std::size_t>(cm.labels[static_cast<std::size_t>(c)])] += sizes[static_cast<std::size_t>(c)];
                if (cm.labels[static_cast<std::size_t>(c)] == ShapeLabel::evergreen)
                    run.evergreen_size += static_cast<std::size_t>(sizes[static_cast<std::size_t>(c)]);
            }
            auto evergreen_at = [&](std::size_t i) {
                return cm.labels[static_cast<std::size_t>(cm.assignments[i])] == ShapeLabel::evergreen;
            };

            if (r == 0) {
                for (std::size_t i = 0; i < run.ids.size(); ++i) base.emplace(run.ids[i], std::pair{cm.assignments[i], evergreen_at(i)});
                run.common_items = run.ids.size();
                run.ari_vs_base = 1.0;
                run.evergreen_persistence = run.evergreen_size > 0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
            } else {
                std::vector<int> a, b;
                std::size_t base_evergreen = 0, kept_evergreen = 0;
                for (std::size_t i = 0; i < run.ids.size(); ++i) {
                    const auto it = base.find(run.ids[i]);
                    if (it == base.end()) continue;
                    a.push_back(it->second.first);
                    b.push_back(cm.assignments[i]);
                    if (it->second.second) {
                        ++base_evergreen;
                        if (evergreen_at(i)) ++kept_evergreen;
                    }
                }
                run.common_items = a.size();
                run.ari_vs_base = adjusted_rand_index(a, b);
                run.evergreen_persistence = base_evergreen > 0
                                                ? static_cast<double>(kept_evergreen) / static_cast<double>(base_evergreen)
                                                : std::numeric_limits<double>::quiet_NaN();
            }
            stage.thresholds.push_back(std::move(run));
        }
        model.sensitivity = std::move(stage);
    });
}

ModelFile run_pipeline(const PipelineConfig& config, const RunOptions& options) {
    Corpus input = [&] {
        Corpus c(TimeGrid(2), {});
        in_stage("ingest", [&] { c = load_input(config); });
        return c;
    }();
    return run_pipeline(config, std::move(input), options);
}

ModelFile run_pipeline(const PipelineConfig& config, Corpus input, const RunOptions& options) {
    ModelFile model = ingest_stage(config, std::move(input));
    fit_stage(model);
    if (options.baseline) baseline_stage(model);
    if (model.fit->basis.k() == 0)
        throw ConfigError("stage 'cluster': clustering refused, scores are zero-dimensional (K basis = 0)");
    cluster_stage(model);
    label_stage(model);
    if (options.sensitivity) sensitivity_stage(model);
    model.created = current_timestamp();
    return model;
}

}  // namespace evergreen
