// evergreen: cluster count trajectories with a functional Poisson model.

#include "evergreen/error.hpp"
#include "evergreen/model_file.hpp"
#include "evergreen/pipeline.hpp"
#include "evergreen/plots.hpp"
#include "evergreen/svg.hpp"
#include "evergreen/synthgen.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace evergreen;

namespace {

struct Options {
    PipelineConfig config;
    std::optional<double> fve;
    std::optional<double> bandwidth;
    std::string method = "kmeans";
    std::string thresholds = "0,10";
    std::string sweep_k = "2..6";
    std::string sweep_methods = "kmeans,kmedoids,ward";
    std::string selection_k = "1..8";

    // simulate
    std::size_t n = 2000;
    std::size_t years = 30;
    std::string eigenvalues = "1,0.8,0.8,0.8";
    std::string weights;
    std::string family = "polynomial";
    std::string format = "csv";
    std::string mean = "gamma";

    // plot
    std::string which;

    // run
    bool no_baseline = false;
    bool no_sensitivity = false;
};

std::vector<std::string> split(const std::string& text, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, sep)) {
        const auto a = part.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        out.push_back(part.substr(a, part.find_last_not_of(" \t") - a + 1));
    }
    return out;
}

long long to_integer(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("cannot read '" + s + "' as an integer in " + what);
}

double to_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("cannot read '" + s + "' as a number in " + what);
}

// "2..6" or "2,3,5"
std::vector<int> int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    for (const auto& part : split(text)) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(static_cast<int>(to_integer(part, what)));
            continue;
        }
        const auto lo = to_integer(part.substr(0, dots), what), hi = to_integer(part.substr(dots + 2), what);
        if (hi < lo) throw ConfigError("empty range '" + part + "' in " + what);
        for (auto k = lo; k <= hi; ++k) out.push_back(static_cast<int>(k));
    }
    if (out.empty()) throw ConfigError(what + " is empty");
    return out;
}

std::vector<double> double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(text)) out.push_back(to_double(part, what));
    return out;
}

PipelineConfig resolve(Options& o) {
    PipelineConfig c = o.config;
    c.fve = o.fve;
    c.bandwidth = o.bandwidth;
    c.method = parse_method(o.method);
    c.thresholds.clear();
    for (int t : int_list(o.thresholds, "--thresholds")) c.thresholds.push_back(t);
    c.sweep_k = int_list(o.sweep_k, "--sweep-k");
    c.selection_k = int_list(o.selection_k, "--selection-k");
    c.sweep_methods.clear();
    for (const auto& m : split(o.sweep_methods)) c.sweep_methods.push_back(parse_method(m));
    if (c.threads == 0) c.threads = std::max(1u, std::thread::hardware_concurrency());
    c.validate();
    return c;
}

std::string model_path(const PipelineConfig& c) { return (fs::path(c.output_dir) / "model.json").string(); }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

// Loads the model a later stage builds on; the current flags replace the
// stored configuration, keeping the input path when none was given.
ModelFile load_for(const std::string& stage, const PipelineConfig& config) {
    const std::string path = model_path(config);
    if (!fs::exists(path))
        throw ConfigError("stage '" + stage + "' needs an existing model at '" + path + "'; run 'ingest' first");
    ModelFile model = load_model(path);
    PipelineConfig merged = config;
    if (merged.input.empty()) merged.input = model.config.input;
    model.config = merged;
    return model;
}

void save(ModelFile& model) {
    ensure_dir(model.config.output_dir);
    model.created = current_timestamp();
    save_model(model_path(model.config), model);
    std::cout << "model: " << model_path(model.config) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

void write_fit_outputs(const ModelFile& model) {
    const auto& fit = *model.fit;
    std::ostringstream csv;
    csv << "id";
    for (int k = 0; k < fit.basis.k(); ++k) csv << ",xi" << (k + 1);
    csv << ",loglik,mse,converged,iterations,ridge\n";
    for (const auto& f : fit.fits) {
        csv << f.id;
        for (double s : f.scores) csv << ',' << format_number(s);
        csv << ',' << format_number(f.loglik) << ',' << format_number(f.mse) << ',' << (f.converged ? 1 : 0) << ','
            << f.iterations << ',' << (f.ridge ? 1 : 0) << '\n';
    }
    write_text(fs::path(model.config.output_dir) / "scores.csv", csv.str());

    int failed = 0;
    for (const auto& f : fit.fits)
        if (!f.converged) ++failed;
    std::cout << "fit: " << fit.fits.size() << " items, K = " << fit.basis.k() << ", bandwidth = " << fit.basis.bandwidth;
    if (fit.basis.k() > 0) std::cout << ", FVE = " << fit.basis.fve.at(static_cast<std::size_t>(fit.basis.k() - 1));
    std::cout << ", not converged = " << failed << '\n';
    if (!fit.selection.rows.empty()) std::cout << "fit: held-out AIC recommends K = " << fit.selection.recommended_k << '\n';
    for (const auto& f : fit.fits)
        if (!f.converged) std::cerr << "warning: item '" << f.id << "' did not converge: " << f.message << '\n';
}

void write_baseline_outputs(const ModelFile& model) {
    const auto& b = *model.baseline;
    std::ostringstream cmp, wsb;
    cmp << "id,log10_mse_wsb,log10_mse_fpca\n";
    for (const auto& r : b.comparison.rows)
        cmp << r.id << ',' << format_number(r.log10_mse_wsb) << ',' << format_number(r.log10_mse_fpca) << '\n';
    wsb << "id,lambda,mu,sigma,m,mse,objective,converged\n";
    for (const auto& f : b.fits)
        wsb << f.id << ',' << format_number(f.params.lambda) << ',' << format_number(f.params.mu) << ','
            << format_number(f.params.sigma) << ',' << format_number(f.params.m) << ',' << format_number(f.mse) << ','
            << format_number(f.objective) << ',' << (f.converged ? 1 : 0) << '\n';
    write_text(fs::path(model.config.output_dir) / "comparison.csv", cmp.str());
    write_text(fs::path(model.config.output_dir) / "wsb_fits.csv", wsb.str());

    std::vector<double> a, f;
    for (const auto& r : b.comparison.rows) {
        a.push_back(r.log10_mse_wsb);
        f.push_back(r.log10_mse_fpca);
    }
    std::sort(a.begin(), a.end());
    std::sort(f.begin(), f.end());
    if (!a.empty())
        std::cout << "baseline: median log10 MSE  WSB = " << a[a.size() / 2] << ", functional Poisson = " << f[f.size() / 2]
                  << '\n';
}

void write_cluster_outputs(const ModelFile& model) {
    write_assignments_csv(model, (fs::path(model.config.output_dir) / "assignments.csv").string());
    const auto& cm = *model.cluster;
    const auto sizes = cm.cluster_sizes();
    std::cout << "cluster: " << to_string(cm.method) << " K = " << cm.k << ", within_ss = " << cm.within_ss << '\n';
    for (int c = 0; c < cm.k; ++c)
        std::cout << "  cluster " << c << ": " << to_string(cm.labels.at(static_cast<std::size_t>(c))) << " (n = "
                  << sizes[static_cast<std::size_t>(c)] << ")\n";
}

void write_sensitivity_outputs(const ModelFile& model) {
    const auto& s = *model.sensitivity;
    std::ostringstream json;
    json << "{\n";
    for (std::size_t i = 0; i < s.sweep.cells.size(); ++i) {
        const auto& c = s.sweep.cells[i];
        json << "  \"" << to_string(c.method) << ":K=" << c.k << "\": {\"within_ss\": " << format_number(c.within_ss)
             << ", \"silhouette\": " << format_number(c.silhouette) << ", \"label_counts\": {";
        for (std::size_t l = 0; l < kShapeLabels.size(); ++l)
            json << (l ? ", " : "") << '"' << to_string(kShapeLabels[l]) << "\": " << c.label_counts[l];
        json << "}}" << (i + 1 < s.sweep.cells.size() ? "," : "") << '\n';
    }
    json << "}\n";
    write_text(fs::path(model.config.output_dir) / "sweep.json", json.str());
    for (const auto& a : s.sweep.ari)
        std::cout << "sensitivity: K = " << a.k << " ARI(" << to_string(a.a) << ", " << to_string(a.b) << ") = " << a.ari
                  << '\n';
    for (const auto& r : s.thresholds)
        std::cout << "sensitivity: threshold " << r.threshold << ": " << r.n_items << " items, ARI vs first = "
                  << r.ari_vs_base << ", evergreen persistence = " << r.evergreen_persistence << '\n';
}

void emit_all_plots(const ModelFile& model, const std::string& which) {
    std::vector<std::string> ids = which.empty() ? available_plots(model) : split(which);
    const std::string dir = (fs::path(model.config.output_dir) / "plots").string();
    const auto files = emit_plots(model, ids, dir);
    std::cout << "plot: wrote " << files.size() << " files to " << dir << '\n';
}

// Later stages are stale once an earlier one reruns.
void reset_after(ModelFile& model, const std::string& stage) {
    const std::vector<std::string> order(std::begin(kStageNames), std::end(kStageNames));
    const auto pos = std::find(order.begin(), order.end(), stage) - order.begin();
    auto after = [&](const char* s) { return std::find(order.begin(), order.end(), s) - order.begin() > pos; };
    if (after("fit")) model.fit.reset();
    if (after("baseline")) model.baseline.reset();
    if (after("cluster")) model.cluster.reset();
    if (after("label")) model.label.reset();
    if (after("sensitivity")) model.sensitivity.reset();
}

GeneratorSpec generator_spec(const Options& o) {
    GeneratorSpec spec;
    spec.n = o.n;
    spec.t = o.years;
    spec.seed = o.config.seed;
    spec.family = parse_basis_family(o.family);
    spec.eigenvalues = double_list(o.eigenvalues, "--eigenvalues");
    if (o.mean == "flat") {
        spec.mean.kind = MeanCurve::Kind::flat;
    } else if (o.mean != "gamma") {
        throw ConfigError("unknown mean curve '" + o.mean + "' (expected gamma or flat)");
    }
    if (!o.weights.empty()) {
        const auto w = double_list(o.weights, "--weights");
        const auto mean = spec.mean.evaluate(spec.t);
        spec.archetypes = planted_archetypes(mean, make_basis(spec.t, spec.k(), spec.family));
        if (w.size() != 4 && w.size() != spec.archetypes.size())
            throw ConfigError("--weights takes 4 (normal-low, normal-high, delayed, evergreen) or 5 (plus flash) values");
        for (std::size_t a = 0; a < spec.archetypes.size(); ++a) spec.archetypes[a].weight = a < w.size() ? w[a] : 0.0;
    }
    validate(spec);
    return spec;
}

int simulate(const Options& o, const PipelineConfig& config) {
    const GeneratorSpec spec = generator_spec(o);
    const Simulation sim = simulate_corpus(spec);
    ensure_dir(config.output_dir);
    const CorpusFormat format = parse_format(o.format);
    const fs::path corpus = fs::path(config.output_dir) / (format == CorpusFormat::csv ? "corpus.csv" : "corpus.jsonl");
    std::ofstream out(corpus, std::ios::binary);
    if (!out) throw DataError("cannot write '" + corpus.string() + "'");
    write_corpus(out, sim.corpus, format);
    write_truth_file((fs::path(config.output_dir) / "truth.json").string(), sim.truth);
    std::cout << "simulate: " << sim.corpus.size() << " items, T = " << spec.t << " -> " << corpus.string() << '\n';
    return 0;
}

int dispatch(const std::string& command, Options& o) {
    PipelineConfig config = resolve(o);
    if (command == "simulate") return simulate(o, config);
    ensure_dir(config.output_dir);

    if (command == "ingest") {
        ModelFile model = ingest_stage(config, load_input(config));
        std::cout << "ingest: " << model.ingest->input.size() << " items, T = " << model.ingest->input.grid().size()
                  << ", kept " << model.ingest->kept << ", dropped " << model.ingest->dropped << " (min total "
                  << config.min_total << ")\n";
        save(model);
        return 0;
    }
    if (command == "run") {
        ModelFile model = ingest_stage(config, load_input(config));
        // Keep whatever finished when a later stage fails.
        try {
            fit_stage(model);
            write_fit_outputs(model);
            if (!o.no_baseline) {
                baseline_stage(model);
                write_baseline_outputs(model);
            }
            cluster_stage(model);
            label_stage(model);
            write_cluster_outputs(model);
            if (!o.no_sensitivity) {
                sensitivity_stage(model);
                write_sensitivity_outputs(model);
            }
        } catch (const Error&) {
            save(model);
            throw;
        }
        save(model);
        emit_all_plots(model, o.which);
        return 0;
    }
    if (command == "plot") {
        const ModelFile model = load_for("plot", config);
        emit_all_plots(model, o.which);
        return 0;
    }

    ModelFile model = load_for(command, config);
    reset_after(model, command);
    if (command == "fit") {
        if (model.ingest) {
            const auto filtered = filter_by_total(model.ingest->input, config.min_total);
            model.ingest->kept = filtered.kept;
            model.ingest->dropped = filtered.dropped;
        }
        fit_stage(model);
        write_fit_outputs(model);
    } else if (command == "baseline") {
        baseline_stage(model);
        write_baseline_outputs(model);
    } else if (command == "cluster") {
        cluster_stage(model);
        write_cluster_outputs(model);
    } else if (command == "label") {
        label_stage(model);
        write_cluster_outputs(model);
    } else if (command == "sensitivity") {
        sensitivity_stage(model);
        write_sensitivity_outputs(model);
    }
    save(model);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster count trajectories with a functional Poisson model"};
    app.require_subcommand(1, 1);
    app.set_config("--config", "", "key=value configuration file (command-line flags take precedence)");

    Options o;
    PipelineConfig& c = o.config;
    app.add_option("--input", c.input, "Corpus file (.csv or .jsonl)");
    app.add_option("--output-dir", c.output_dir, "Directory for the model and outputs")->capture_default_str();
    app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
    app.add_option("--k-basis", c.k_basis, "Number of eigenfunctions")->capture_default_str();
    app.add_option("--fve", o.fve, "Choose K as the smallest reaching this fraction of variance");
    app.add_option("--k-clusters", c.k_clusters, "Number of clusters")->capture_default_str();
    app.add_option("--method", o.method, "kmeans, kmedoids or ward")->capture_default_str();
    app.add_option("--min-total", c.min_total, "Drop items with fewer total counts")->capture_default_str();
    app.add_option("--m-wsb", c.m_wsb, "WSB constant m")->capture_default_str();
    app.add_flag("--standardize", c.standardize, "Divide score k by sqrt(lambda_k) before clustering");
    app.add_option("--eval-grid", c.eval_grid, "KDE evaluation points")->capture_default_str();
    app.add_option("--threads", c.threads, "Worker threads (0: all cores); results do not depend on it")
        ->capture_default_str();
    app.add_option("--bandwidth", o.bandwidth, "Mean smoother bandwidth (GCV when omitted)");
    app.add_option("--restarts", c.restarts, "k-means restarts")->capture_default_str();
    app.add_option("--folds", c.folds, "Cross-validation folds for K selection")->capture_default_str();
    app.add_option("--selection-k", o.selection_k, "K values for the selection table")->capture_default_str();
    app.add_option("--thresholds", o.thresholds, "Minimum totals for the threshold sweep")->capture_default_str();
    app.add_option("--sweep-k", o.sweep_k, "K values for the robustness sweep")->capture_default_str();
    app.add_option("--sweep-methods", o.sweep_methods, "Methods for the robustness sweep")->capture_default_str();
    app.add_option("--evergreen-tolerance", c.labels.evergreen_tolerance, "Allowed decline, relative to the curve maximum")
        ->capture_default_str();

    std::vector<std::pair<std::string, std::string>> commands{
        {"ingest", "Read and filter a corpus"},
        {"fit", "Estimate the basis, the K selection table and per-item scores"},
        {"baseline", "Fit the WSB model and compare goodness of fit"},
        {"cluster", "Cluster the scores"},
        {"label", "Label clusters and classify items by shape"},
        {"sensitivity", "Method/K robustness sweep and threshold sweep"},
        {"simulate", "Generate a synthetic corpus with known truth"},
        {"plot", "Write plot CSV and SVG files from a saved model"},
        {"run", "All stages and plots"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        if (name == "simulate") {
            sub->add_option("--n", o.n, "Number of items")->capture_default_str();
            sub->add_option("--years", o.years, "Grid length T")->capture_default_str();
            sub->add_option("--eigenvalues", o.eigenvalues, "Within-archetype score variances")->capture_default_str();
            sub->add_option("--weights", o.weights, "Archetype weights");
            sub->add_option("--family", o.family, "polynomial or fourier")->capture_default_str();
            sub->add_option("--mean", o.mean, "gamma or flat")->capture_default_str();
            sub->add_option("--format", o.format, "csv or jsonl")->capture_default_str();
        }
        if (name == "plot" || name == "run") sub->add_option("--which", o.which, "Comma-separated plot ids (default: all available)");
        if (name == "run") {
            sub->add_flag("--no-baseline", o.no_baseline, "Skip the WSB baseline");
            sub->add_flag("--no-sensitivity", o.no_sensitivity, "Skip the sensitivity sweeps");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return dispatch(app.get_subcommands().front()->get_name(), o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
