#include "evergreen/plots.hpp"

#include "evergreen/error.hpp"
#include "evergreen/svg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace evergreen {

namespace {

using Csv = std::vector<std::vector<std::string>>;

struct Figure {
    Csv csv;
    PlotSpec svg;
    std::vector<std::pair<std::string, Csv>> extra;  // additional CSV files
};

std::string csv_text(const Csv& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

[[noreturn]] void needs(const std::string& plot, const std::string& stage) {
    throw ConfigError("plot '" + plot + "' needs the '" + stage + "' stage, which is missing from the model");
}

std::vector<double> years(std::size_t t) {
    std::vector<double> out(t);
    for (std::size_t j = 0; j < t; ++j) out[j] = static_cast<double>(j + 1);
    return out;
}

Figure mean_deriv(const ModelFile& m) {
    if (!m.fit) needs("mean_deriv", "fit");
    const LatentBasis& b = m.fit->basis;
    Figure f;
    f.csv.push_back({"t", "raw_mean", "mean", "derivative"});
    const auto t = years(b.grid_size);
    for (std::size_t j = 0; j < b.grid_size; ++j)
        f.csv.push_back({format_number(t[j]), format_number(b.raw_mean.at(j)), format_number(b.mean[j]),
                         format_number(b.mean_derivative[j])});
    f.svg = {"Mean of ln(y+1) and its derivative", "year", "value",
             {{"raw mean", t, b.raw_mean, Series::Style::scatter},
              {"smoothed mean", t, b.mean, Series::Style::line},
              {"derivative", t, b.mean_derivative, Series::Style::line}}};
    return f;
}

Figure eigenfunctions(const ModelFile& m) {
    if (!m.fit) needs("eigenfunctions", "fit");
    const LatentBasis& b = m.fit->basis;
    Figure f;
    std::vector<std::string> header{"t"};
    for (int k = 0; k < b.k(); ++k) header.push_back("phi" + std::to_string(k + 1));
    f.csv.push_back(header);
    const auto t = years(b.grid_size);
    for (std::size_t j = 0; j < b.grid_size; ++j) {
        std::vector<std::string> row{format_number(t[j])};
        for (int k = 0; k < b.k(); ++k) row.push_back(format_number(b.eigenfunctions(k, static_cast<Eigen::Index>(j))));
        f.csv.push_back(std::move(row));
    }
    f.svg = {"Leading eigenfunctions", "year", "phi_k(t)", {}};
    for (int k = 0; k < b.k(); ++k) {
        std::vector<double> y(b.grid_size);
        for (std::size_t j = 0; j < b.grid_size; ++j) y[j] = b.eigenfunctions(k, static_cast<Eigen::Index>(j));
        f.svg.series.push_back({"phi" + std::to_string(k + 1), t, y, Series::Style::line});
    }
    return f;
}

Figure k_selection(const ModelFile& m) {
    if (!m.fit) needs("k_selection", "fit");
    const auto& rows = m.fit->selection.rows;
    if (rows.empty()) throw DataError("plot 'k_selection': the model has no selection table (too few items)");
    Figure f;
    f.csv.push_back({"K", "cv_loglik", "aic", "insample_loglik", "fve", "excluded"});
    std::vector<double> k, aic, fve;
    for (const auto& r : rows) {
        f.csv.push_back({std::to_string(r.k), format_number(r.cv_loglik), format_number(r.aic),
                         format_number(r.insample_loglik), format_number(r.fve), std::to_string(r.excluded)});
        k.push_back(r.k);
        aic.push_back(r.aic);
    }
    f.svg = {"Number of eigenfunctions: held-out AIC (recommended K = " +
                 std::to_string(m.fit->selection.recommended_k) + ")",
             "K", "AIC", {{"AIC", k, aic, Series::Style::line}}};
    return f;
}

Figure gof_kde(const ModelFile& m) {
    if (!m.baseline) needs("gof_kde", "baseline");
    const auto& c = m.baseline->comparison;
    Figure f;
    f.csv.push_back({"x", "density_wsb", "density_fpca"});
    for (std::size_t i = 0; i < c.eval.size(); ++i)
        f.csv.push_back({format_number(c.eval[i]), format_number(c.density_wsb.at(i)), format_number(c.density_fpca.at(i))});
    f.svg = {"Kernel densities of log10 MSE", "log10 MSE", "density",
             {{"WSB", c.eval, c.density_wsb, Series::Style::line},
              {"functional Poisson", c.eval, c.density_fpca, Series::Style::line}}};
    return f;
}

Figure gof_scatter(const ModelFile& m) {
    if (!m.baseline) needs("gof_scatter", "baseline");
    const auto& rows = m.baseline->comparison.rows;
    Figure f;
    f.csv.push_back({"id", "log10_mse_wsb", "log10_mse_fpca"});
    Series s{"items", {}, {}, Series::Style::scatter};
    for (const auto& r : rows) {
        f.csv.push_back({r.id, format_number(r.log10_mse_wsb), format_number(r.log10_mse_fpca)});
        s.x.push_back(r.log10_mse_wsb);
        s.y.push_back(r.log10_mse_fpca);
    }
    f.svg = {"Per-item log10 MSE", "WSB", "functional Poisson", {s}, false, true};
    return f;
}

Figure cluster_curves(const ModelFile& m) {
    if (!m.fit) needs("cluster_curves", "fit");
    if (!m.cluster) needs("cluster_curves", "cluster");
    const auto curves = centroid_curves(*m.cluster, m.fit->basis);
    const auto sizes = m.cluster->cluster_sizes();
    const auto t = years(m.fit->basis.grid_size);
    Figure f;
    std::vector<std::string> header{"t"};
    for (std::size_t c = 0; c < curves.size(); ++c) header.push_back("cluster_" + std::to_string(c));
    f.csv.push_back(header);
    for (std::size_t j = 0; j < t.size(); ++j) {
        std::vector<std::string> row{format_number(t[j])};
        for (const auto& curve : curves) row.push_back(format_number(curve[j]));
        f.csv.push_back(std::move(row));
    }
    f.svg = {"Cluster centroid intensities", "year", "expected annual count", {}};
    for (std::size_t c = 0; c < curves.size(); ++c) {
        std::string name = "cluster " + std::to_string(c);
        if (c < m.cluster->labels.size()) name += ": " + to_string(m.cluster->labels[c]);
        name += " (n=" + std::to_string(sizes[c]) + ")";
        f.svg.series.push_back({name, t, curves[c], Series::Style::line});
    }
    return f;
}

Figure robustness(const ModelFile& m) {
    if (!m.sensitivity) needs("robustness", "sensitivity");
    const auto& sweep = m.sensitivity->sweep;
    Figure f;
    f.csv.push_back({"method", "K", "within_ss", "silhouette", "n_evergreen", "n_delayed", "n_normal_low", "n_normal_high"});
    std::vector<Series> series;
    for (const auto& c : sweep.cells) {
        std::vector<std::string> row{to_string(c.method), std::to_string(c.k), format_number(c.within_ss),
                                     format_number(c.silhouette)};
        for (int n : c.label_counts) row.push_back(std::to_string(n));
        f.csv.push_back(std::move(row));
        auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) { return s.name == to_string(c.method); });
        if (it == series.end()) {
            series.push_back({to_string(c.method), {}, {}, Series::Style::line});
            it = series.end() - 1;
        }
        it->x.push_back(c.k);
        it->y.push_back(c.silhouette);
    }
    Csv ari{{"K", "method_a", "method_b", "ari"}};
    for (const auto& a : sweep.ari) ari.push_back({std::to_string(a.k), to_string(a.a), to_string(a.b), format_number(a.ari)});
    f.extra.emplace_back("robustness_ari", std::move(ari));
    f.svg = {"Clustering robustness: silhouette by K and method", "K", "mean silhouette", std::move(series)};
    return f;
}

Figure thresholds(const ModelFile& m) {
    if (!m.sensitivity) needs("thresholds", "sensitivity");
    Figure f;
    f.csv.push_back({"threshold", "n_items", "common_items", "k_basis", "ari_vs_base", "evergreen_persistence",
                     "evergreen_size"});
    Series ari{"ARI vs first threshold", {}, {}, Series::Style::line};
    Series persist{"evergreen persistence", {}, {}, Series::Style::line};
    for (const auto& r : m.sensitivity->thresholds) {
        f.csv.push_back({std::to_string(r.threshold), std::to_string(r.n_items), std::to_string(r.common_items),
                         std::to_string(r.k_basis), format_number(r.ari_vs_base), format_number(r.evergreen_persistence),
                         std::to_string(r.evergreen_size)});
        ari.x.push_back(static_cast<double>(r.threshold));
        ari.y.push_back(r.ari_vs_base);
        persist.x.push_back(static_cast<double>(r.threshold));
        persist.y.push_back(r.evergreen_persistence);
    }
    f.svg = {"Citation threshold sensitivity", "minimum total count", "agreement", {ari, persist}};
    return f;
}

Figure exemplar_trajectories(const ModelFile& m) {
    if (!m.ingest) needs("exemplar_trajectories", "ingest");
    if (!m.label) needs("exemplar_trajectories", "label");
    const Corpus corpus = m.ingest->filtered(m.config.min_total);
    const auto& classes = m.label->item_classes;
    if (classes.size() != corpus.size()) throw DataError("plot 'exemplar_trajectories': item classes do not match the corpus");
    const std::array order{ItemClass::flash_in_the_pan, ItemClass::normal_document, ItemClass::delayed_document,
                           ItemClass::evergreen};
    Figure f;
    f.csv.push_back({"class", "id", "t", "annual", "cumulative"});
    f.svg = {"Exemplar trajectories (highest total per class)", "year", "annual count", {}};
    const auto t = years(corpus.grid().size());
    for (ItemClass cls : order) {
        std::size_t best = corpus.size();
        for (std::size_t i = 0; i < corpus.size(); ++i)
            if (classes[i] == cls && (best == corpus.size() || corpus[i].total() > corpus[best].total())) best = i;
        if (best == corpus.size()) continue;
        const auto& item = corpus[best];
        const auto cum = cumulative(item);
        std::vector<double> annual;
        for (std::size_t j = 0; j < item.counts.size(); ++j) {
            f.csv.push_back({to_string(cls), item.id, std::to_string(j + 1), std::to_string(item.counts[j]),
                             std::to_string(cum[j])});
            annual.push_back(static_cast<double>(item.counts[j]));
        }
        f.svg.series.push_back({to_string(cls) + " (" + item.id + ")", t, annual, Series::Style::line});
    }
    return f;
}

Figure build(const ModelFile& model, const std::string& id) {
    if (id == "mean_deriv") return mean_deriv(model);
    if (id == "eigenfunctions") return eigenfunctions(model);
    if (id == "k_selection") return k_selection(model);
    if (id == "gof_kde") return gof_kde(model);
    if (id == "gof_scatter") return gof_scatter(model);
    if (id == "cluster_curves") return cluster_curves(model);
    if (id == "robustness") return robustness(model);
    if (id == "thresholds") return thresholds(model);
    if (id == "exemplar_trajectories") return exemplar_trajectories(model);
    std::string known;
    for (const char* p : kPlotIds) known += (known.empty() ? "" : ", ") + std::string(p);
    throw ConfigError("unknown plot id '" + id + "' (known: " + known + ")");
}

}  // namespace

std::vector<std::string> available_plots(const ModelFile& model) {
    std::vector<std::string> out;
    if (model.fit) {
        out.insert(out.end(), {"mean_deriv", "eigenfunctions"});
        if (!model.fit->selection.rows.empty()) out.push_back("k_selection");
    }
    if (model.baseline) out.insert(out.end(), {"gof_kde", "gof_scatter"});
    if (model.fit && model.cluster) out.push_back("cluster_curves");
    if (model.sensitivity) out.insert(out.end(), {"robustness", "thresholds"});
    if (model.ingest && model.label) out.push_back("exemplar_trajectories");
    return out;
}

std::vector<std::string> emit_plots(const ModelFile& model, std::span<const std::string> which, const std::string& dir) {
    std::vector<Figure> figures;
    for (const auto& id : which) figures.push_back(build(model, id));
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;
    for (std::size_t i = 0; i < which.size(); ++i) {
        const std::filesystem::path base = std::filesystem::path(dir) / which[i];
        write_file(base.string() + ".csv", csv_text(figures[i].csv));
        write_file(base.string() + ".svg", render_svg(figures[i].svg));
        written.push_back(base.string() + ".csv");
        written.push_back(base.string() + ".svg");
        for (const auto& [name, csv] : figures[i].extra) {
            const auto path = (std::filesystem::path(dir) / (name + ".csv")).string();
            write_file(path, csv_text(csv));
            written.push_back(path);
        }
    }
    return written;
}

void write_assignments_csv(const ModelFile& model, const std::string& path) {
    if (!model.fit) needs("assignments", "fit");
    if (!model.cluster) needs("assignments", "cluster");
    const auto& fits = model.fit->fits;
    const auto& cm = *model.cluster;
    if (cm.assignments.size() != fits.size()) throw DataError("cluster assignments do not match the fits");
    Csv rows;
    std::vector<std::string> header{"id", "cluster", "label"};
    if (model.label) header.push_back("class");
    rows.push_back(header);
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const int c = cm.assignments[i];
        std::vector<std::string> row{fits[i].id, std::to_string(c),
                                     static_cast<std::size_t>(c) < cm.labels.size() ? to_string(cm.labels[static_cast<std::size_t>(c)]) : ""};
        if (model.label) row.push_back(to_string(model.label->item_classes.at(i)));
        rows.push_back(std::move(row));
    }
    write_file(path, csv_text(rows));
}

}  // namespace evergreen
