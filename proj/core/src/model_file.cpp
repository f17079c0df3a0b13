#include "evergreen/model_file.hpp"

#include "evergreen/error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace evergreen {

using nlohmann::json;

Corpus IngestStage::filtered(Count min_total) const { return filter_by_total(input, min_total).corpus; }

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 digest failed");
    std::ostringstream hex;
    hex << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < length; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
    return hex.str();
}

std::string current_timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) now = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream out;
    out << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

namespace {

// JSON has no NaN or infinity; those travel as strings.
json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double dbl(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw DataError("model file: expected a number, found '" + s + "'");
}

json nums(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

std::vector<double> dbls(const json& j) {
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) out.push_back(dbl(x));
    return out;
}

json matrix(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& rows, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != cols) throw DataError("model file: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = dbl(rows[r][static_cast<std::size_t>(c)]);
    }
    return m;
}

json labels_json(const std::vector<ShapeLabel>& labels) {
    json out = json::array();
    for (ShapeLabel l : labels) out.push_back(to_string(l));
    return out;
}

std::vector<ShapeLabel> labels_from(const json& j) {
    std::vector<ShapeLabel> out;
    for (const auto& s : j) out.push_back(parse_shape_label(s.get<std::string>()));
    return out;
}

json config_json(const PipelineConfig& c) {
    json methods = json::array();
    for (ClusterMethod m : c.sweep_methods) methods.push_back(to_string(m));
    json j = {{"input", c.input},
              {"seed", c.seed},
              {"k_basis", c.k_basis},
              {"fve", c.fve ? json(*c.fve) : json(nullptr)},
              {"k_clusters", c.k_clusters},
              {"method", to_string(c.method)},
              {"min_total", c.min_total},
              {"m_wsb", c.m_wsb},
              {"standardize", c.standardize},
              {"eval_grid", c.eval_grid},
              {"bandwidth", c.bandwidth ? json(*c.bandwidth) : json(nullptr)},
              {"restarts", c.restarts},
              {"folds", c.folds},
              {"selection_k", c.selection_k},
              {"sweep_k", c.sweep_k},
              {"sweep_methods", methods},
              {"thresholds", c.thresholds},
              {"label_thresholds",
               {{"evergreen_tolerance", c.labels.evergreen_tolerance},
                {"delayed_fraction", c.labels.delayed_fraction},
                {"flash_peak_fraction", c.labels.flash_peak_fraction},
                {"flash_end_ratio", c.labels.flash_end_ratio}}}};
    return j;
}

PipelineConfig config_from(const json& j) {
    PipelineConfig c;
    c.input = j.at("input").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.k_basis = j.at("k_basis").get<int>();
    if (!j.at("fve").is_null()) c.fve = j.at("fve").get<double>();
    c.k_clusters = j.at("k_clusters").get<int>();
    c.method = parse_method(j.at("method").get<std::string>());
    c.min_total = j.at("min_total").get<Count>();
    c.m_wsb = j.at("m_wsb").get<double>();
    c.standardize = j.at("standardize").get<bool>();
    c.eval_grid = j.at("eval_grid").get<std::size_t>();
    if (!j.at("bandwidth").is_null()) c.bandwidth = j.at("bandwidth").get<double>();
    c.restarts = j.at("restarts").get<int>();
    c.folds = j.at("folds").get<int>();
    c.selection_k = j.at("selection_k").get<std::vector<int>>();
    c.sweep_k = j.at("sweep_k").get<std::vector<int>>();
    c.sweep_methods.clear();
    for (const auto& m : j.at("sweep_methods")) c.sweep_methods.push_back(parse_method(m.get<std::string>()));
    c.thresholds = j.at("thresholds").get<std::vector<Count>>();
    const auto& l = j.at("label_thresholds");
    c.labels.evergreen_tolerance = l.at("evergreen_tolerance").get<double>();
    c.labels.delayed_fraction = l.at("delayed_fraction").get<double>();
    c.labels.flash_peak_fraction = l.at("flash_peak_fraction").get<double>();
    c.labels.flash_end_ratio = l.at("flash_end_ratio").get<double>();
    return c;
}

json ingest_json(const IngestStage& s) {
    json ids = json::array(), counts = json::array();
    for (const auto& item : s.input.items()) {
        ids.push_back(item.id);
        counts.push_back(item.counts);
    }
    return {{"grid_size", s.input.grid().size()},
            {"provenance", s.input.provenance()},
            {"ids", ids},
            {"counts", counts},
            {"kept", s.kept},
            {"dropped", s.dropped}};
}

IngestStage ingest_from(const json& j) {
    const auto& ids = j.at("ids");
    const auto& counts = j.at("counts");
    if (ids.size() != counts.size()) throw DataError("model file: corpus ids and counts differ in length");
    std::vector<CountTrajectory> items;
    for (std::size_t i = 0; i < ids.size(); ++i)
        items.push_back({ids[i].get<std::string>(), counts[i].get<std::vector<Count>>()});
    IngestStage s{Corpus(TimeGrid(j.at("grid_size").get<std::size_t>()), std::move(items),
                         j.at("provenance").get<std::string>()),
                  j.at("kept").get<std::size_t>(), j.at("dropped").get<std::size_t>()};
    return s;
}

json fit_json(const FitStage& s) {
    const LatentBasis& b = s.basis;
    json rows = json::array();
    for (const auto& r : s.selection.rows)
        rows.push_back({{"k", r.k},
                        {"cv_loglik", num(r.cv_loglik)},
                        {"aic", num(r.aic)},
                        {"insample_loglik", num(r.insample_loglik)},
                        {"fve", num(r.fve)},
                        {"excluded", r.excluded}});
    json fits = json::array();
    for (const auto& f : s.fits)
        fits.push_back({{"id", f.id},
                        {"scores", nums(f.scores)},
                        {"loglik", num(f.loglik)},
                        {"mse", num(f.mse)},
                        {"iterations", f.iterations},
                        {"converged", f.converged},
                        {"ridge", f.ridge},
                        {"curves", !f.eta.empty()},
                        {"message", f.message}});
    return {{"basis",
             {{"grid_size", b.grid_size},
              {"delta", b.delta},
              {"bandwidth", b.bandwidth},
              {"raw_mean", nums(b.raw_mean)},
              {"mean", nums(b.mean)},
              {"mean_derivative", nums(b.mean_derivative)},
              {"spectrum", nums(b.spectrum)},
              {"fve", nums(b.fve)},
              {"eigenvalues", nums(b.eigenvalues)},
              {"eigenfunctions", matrix(b.eigenfunctions)}}},
            {"selection", {{"folds", s.selection.folds}, {"recommended_k", s.selection.recommended_k}, {"rows", rows}}},
            {"fits", fits}};
}

FitStage fit_from(const json& j) {
    FitStage s;
    const auto& b = j.at("basis");
    s.basis.grid_size = b.at("grid_size").get<std::size_t>();
    s.basis.delta = b.at("delta").get<double>();
    s.basis.bandwidth = b.at("bandwidth").get<double>();
    s.basis.raw_mean = dbls(b.at("raw_mean"));
    s.basis.mean = dbls(b.at("mean"));
    s.basis.mean_derivative = dbls(b.at("mean_derivative"));
    s.basis.spectrum = dbls(b.at("spectrum"));
    s.basis.fve = dbls(b.at("fve"));
    s.basis.eigenvalues = dbls(b.at("eigenvalues"));
    s.basis.eigenfunctions = matrix_from(b.at("eigenfunctions"), static_cast<Eigen::Index>(s.basis.grid_size));
    const auto& sel = j.at("selection");
    s.selection.folds = sel.at("folds").get<int>();
    s.selection.recommended_k = sel.at("recommended_k").get<int>();
    for (const auto& r : sel.at("rows"))
        s.selection.rows.push_back({r.at("k").get<int>(), dbl(r.at("cv_loglik")), dbl(r.at("aic")),
                                    dbl(r.at("insample_loglik")), dbl(r.at("fve")), r.at("excluded").get<int>()});
    for (const auto& f : j.at("fits")) {
        PaperFit fit;
        fit.id = f.at("id").get<std::string>();
        fit.scores = dbls(f.at("scores"));
        fit.loglik = dbl(f.at("loglik"));
        fit.mse = dbl(f.at("mse"));
        fit.iterations = f.at("iterations").get<int>();
        fit.converged = f.at("converged").get<bool>();
        fit.ridge = f.at("ridge").get<bool>();
        fit.message = f.at("message").get<std::string>();
        if (f.at("curves").get<bool>()) {
            fit.eta = s.basis.eta(fit.scores);
            fit.intensity.resize(fit.eta.size());
            for (std::size_t t = 0; t < fit.eta.size(); ++t) fit.intensity[t] = std::exp(fit.eta[t]);
        }
        s.fits.push_back(std::move(fit));
    }
    return s;
}

json baseline_json(const BaselineStage& s) {
    json fits = json::array();
    for (const auto& f : s.fits)
        fits.push_back({{"id", f.id},
                        {"lambda", num(f.params.lambda)},
                        {"mu", num(f.params.mu)},
                        {"sigma", num(f.params.sigma)},
                        {"mse", num(f.mse)},
                        {"objective", num(f.objective)},
                        {"converged", f.converged},
                        {"excluded_starts", f.excluded_starts},
                        {"curves", !f.annual.empty()},
                        {"message", f.message}});
    const auto& c = s.comparison;
    return {{"m", s.m},
            {"fits", fits},
            {"comparison",
             {{"eval", nums(c.eval)},
              {"density_wsb", nums(c.density_wsb)},
              {"density_fpca", nums(c.density_fpca)},
              {"bandwidth_wsb", num(c.bandwidth_wsb)},
              {"bandwidth_fpca", num(c.bandwidth_fpca)}}}};
}

BaselineStage baseline_from(const json& j, const Corpus& corpus, const std::vector<PaperFit>* paper) {
    BaselineStage s;
    s.m = j.at("m").get<double>();
    const auto& fits = j.at("fits");
    if (fits.size() != corpus.size()) throw DataError("model file: WSB fits do not match the corpus");
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& f = fits[i];
        WsbFit fit;
        fit.id = f.at("id").get<std::string>();
        fit.params = {dbl(f.at("lambda")), dbl(f.at("mu")), dbl(f.at("sigma")), s.m};
        if (f.at("curves").get<bool>()) fit = wsb_curves(corpus[i], fit);
        fit.mse = dbl(f.at("mse"));
        fit.objective = dbl(f.at("objective"));
        fit.converged = f.at("converged").get<bool>();
        fit.excluded_starts = f.at("excluded_starts").get<int>();
        fit.message = f.at("message").get<std::string>();
        s.fits.push_back(std::move(fit));
    }
    const auto& c = j.at("comparison");
    s.comparison.eval = dbls(c.at("eval"));
    s.comparison.density_wsb = dbls(c.at("density_wsb"));
    s.comparison.density_fpca = dbls(c.at("density_fpca"));
    s.comparison.bandwidth_wsb = dbl(c.at("bandwidth_wsb"));
    s.comparison.bandwidth_fpca = dbl(c.at("bandwidth_fpca"));
    if (paper && paper->size() == s.fits.size())
        for (std::size_t i = 0; i < s.fits.size(); ++i)
            s.comparison.rows.push_back({(*paper)[i].id, std::log10(std::max(s.fits[i].mse, kMseFloor)),
                                         std::log10(std::max((*paper)[i].mse, kMseFloor))});
    return s;
}

json cluster_json(const ClusterModel& m) {
    return {{"method", to_string(m.method)},
            {"k", m.k},
            {"centroids", matrix(m.centroids)},
            {"assignments", m.assignments},
            {"within_ss", num(m.within_ss)},
            {"seed", m.seed},
            {"iterations", m.iterations},
            {"scale", nums(m.scale)},
            {"labels", labels_json(m.labels)},
            {"medoids", m.medoids},
            {"objective_trace", nums(m.objective_trace)}};
}

ClusterModel cluster_from(const json& j) {
    ClusterModel m;
    m.method = parse_method(j.at("method").get<std::string>());
    m.k = j.at("k").get<int>();
    const auto& centroids = j.at("centroids");
    const auto cols = centroids.empty() ? 0 : static_cast<Eigen::Index>(centroids[0].size());
    m.centroids = matrix_from(centroids, cols);
    m.assignments = j.at("assignments").get<std::vector<int>>();
    m.within_ss = dbl(j.at("within_ss"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.iterations = j.at("iterations").get<int>();
    m.scale = dbls(j.at("scale"));
    m.labels = labels_from(j.at("labels"));
    m.medoids = j.at("medoids").get<std::vector<int>>();
    m.objective_trace = dbls(j.at("objective_trace"));
    return m;
}

json sensitivity_json(const SensitivityStage& s) {
    json cells = json::array();
    for (const auto& c : s.sweep.cells)
        cells.push_back({{"method", to_string(c.method)},
                         {"k", c.k},
                         {"model", cluster_json(c.model)},
                         {"within_ss", num(c.within_ss)},
                         {"silhouette", num(c.silhouette)},
                         {"label_counts", c.label_counts}});
    json ari = json::array();
    for (const auto& a : s.sweep.ari)
        ari.push_back({{"k", a.k}, {"a", to_string(a.a)}, {"b", to_string(a.b)}, {"ari", num(a.ari)}});
    json runs = json::array();
    for (const auto& r : s.thresholds)
        runs.push_back({{"threshold", r.threshold},
                        {"n_items", r.n_items},
                        {"common_items", r.common_items},
                        {"k_basis", r.k_basis},
                        {"ari_vs_base", num(r.ari_vs_base)},
                        {"evergreen_persistence", num(r.evergreen_persistence)},
                        {"evergreen_size", r.evergreen_size},
                        {"label_counts", r.label_counts},
                        {"ids", r.ids},
                        {"assignments", r.assignments},
                        {"labels", labels_json(r.labels)}});
    return {{"sweep", {{"cells", cells}, {"ari", ari}}}, {"thresholds", runs}};
}

SensitivityStage sensitivity_from(const json& j) {
    SensitivityStage s;
    for (const auto& c : j.at("sweep").at("cells")) {
        SweepCell cell;
        cell.method = parse_method(c.at("method").get<std::string>());
        cell.k = c.at("k").get<int>();
        cell.model = cluster_from(c.at("model"));
        cell.within_ss = dbl(c.at("within_ss"));
        cell.silhouette = dbl(c.at("silhouette"));
        cell.label_counts = c.at("label_counts").get<std::array<int, 4>>();
        s.sweep.cells.push_back(std::move(cell));
    }
    for (const auto& a : j.at("sweep").at("ari"))
        s.sweep.ari.push_back({a.at("k").get<int>(), parse_method(a.at("a").get<std::string>()),
                               parse_method(a.at("b").get<std::string>()), dbl(a.at("ari"))});
    for (const auto& r : j.at("thresholds")) {
        ThresholdRun run;
        run.threshold = r.at("threshold").get<Count>();
        run.n_items = r.at("n_items").get<std::size_t>();
        run.common_items = r.at("common_items").get<std::size_t>();
        run.k_basis = r.at("k_basis").get<int>();
        run.ari_vs_base = dbl(r.at("ari_vs_base"));
        run.evergreen_persistence = dbl(r.at("evergreen_persistence"));
        run.evergreen_size = r.at("evergreen_size").get<std::size_t>();
        run.label_counts = r.at("label_counts").get<std::array<int, 4>>();
        run.ids = r.at("ids").get<std::vector<std::string>>();
        run.assignments = r.at("assignments").get<std::vector<int>>();
        run.labels = labels_from(r.at("labels"));
        s.thresholds.push_back(std::move(run));
    }
    return s;
}

json body_json(const ModelFile& model) {
    json j;
    j["schema_version"] = model.schema_version;
    j["config"] = config_json(model.config);
    j["ingest"] = model.ingest ? ingest_json(*model.ingest) : json(nullptr);
    j["fit"] = model.fit ? fit_json(*model.fit) : json(nullptr);
    j["baseline"] = model.baseline ? baseline_json(*model.baseline) : json(nullptr);
    j["cluster"] = model.cluster ? cluster_json(*model.cluster) : json(nullptr);
    if (model.label) {
        json classes = json::array();
        for (ItemClass c : model.label->item_classes) classes.push_back(to_string(c));
        j["label"] = {{"item_classes", classes}};
    } else {
        j["label"] = nullptr;
    }
    j["sensitivity"] = model.sensitivity ? sensitivity_json(*model.sensitivity) : json(nullptr);
    return j;
}

ItemClass parse_item_class(const std::string& s) {
    for (ItemClass c : {ItemClass::flash_in_the_pan, ItemClass::normal_document, ItemClass::delayed_document,
                        ItemClass::evergreen})
        if (to_string(c) == s) return c;
    throw DataError("model file: unknown item class '" + s + "'");
}

}  // namespace

std::string serialize_model(const ModelFile& model) {
    json j = body_json(model);
    j["checksum"] = sha256_hex(j.dump());
    j["created"] = model.created;
    return j.dump(1) + "\n";
}

ModelFile deserialize_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        throw DataError("model file failed checksum verification: truncated or not valid JSON");
    }
    if (!j.is_object() || !j.contains("schema_version") || !j.contains("checksum"))
        throw DataError("model file failed checksum verification: missing schema_version or checksum");
    const int version = j.at("schema_version").is_number_integer() ? j.at("schema_version").get<int>() : -1;
    if (version != kSchemaVersion)
        throw DataError("model file schema version " + j.at("schema_version").dump() + " is not supported (expected " +
                        std::to_string(kSchemaVersion) + ")");
    const std::string stored = j.at("checksum").is_string() ? j.at("checksum").get<std::string>() : "";
    ModelFile model;
    model.created = j.contains("created") && j.at("created").is_string() ? j.at("created").get<std::string>() : "";
    j.erase("checksum");
    j.erase("created");
    if (sha256_hex(j.dump()) != stored) throw DataError("model file checksum mismatch: file is corrupt or was edited");

    try {
        model.config = config_from(j.at("config"));
        if (!j.at("ingest").is_null()) model.ingest = ingest_from(j.at("ingest"));
        if (!j.at("fit").is_null()) model.fit = fit_from(j.at("fit"));
        if (!j.at("baseline").is_null()) {
            if (!model.ingest) throw DataError("model file: baseline stage without ingest stage");
            model.baseline = baseline_from(j.at("baseline"), model.ingest->filtered(model.config.min_total),
                                           model.fit ? &model.fit->fits : nullptr);
        }
        if (!j.at("cluster").is_null()) model.cluster = cluster_from(j.at("cluster"));
        if (!j.at("label").is_null()) {
            LabelStage label;
            for (const auto& c : j.at("label").at("item_classes")) label.item_classes.push_back(parse_item_class(c.get<std::string>()));
            model.label = std::move(label);
        }
        if (!j.at("sensitivity").is_null()) model.sensitivity = sensitivity_from(j.at("sensitivity"));
    } catch (const json::exception& e) {
        throw DataError(std::string("model file has an unexpected layout: ") + e.what());
    }
    return model;
}

void save_model(const std::string& path, const ModelFile& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file '" + path + "'");
    out << serialize_model(model);
    if (!out) throw DataError("failed writing model file '" + path + "'");
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return deserialize_model(text.str());
}

}  // namespace evergreen
