#include "evergreen/synthgen.hpp"

#include "evergreen/clustering.hpp"
#include "evergreen/error.hpp"
#include "evergreen/rng.hpp"
#include "evergreen/stats.hpp"
#include "evergreen/symmetric_eigen.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace evergreen {

using nlohmann::json;

std::string to_string(BasisFamily family) { return family == BasisFamily::polynomial ? "polynomial" : "fourier"; }

BasisFamily parse_basis_family(const std::string& name) {
    if (name == "polynomial") return BasisFamily::polynomial;
    if (name == "fourier") return BasisFamily::fourier;
    throw ConfigError("unknown basis family '" + name + "' (expected polynomial or fourier)");
}

Eigen::MatrixXd make_basis(std::size_t t, int k, BasisFamily family) {
    if (k < 0) throw ConfigError("basis size must be nonnegative");
    if (static_cast<std::size_t>(k) > t)
        throw ConfigError("basis size K = " + std::to_string(k) + " exceeds grid length T = " + std::to_string(t));
    const auto T = static_cast<Eigen::Index>(t);
    const double period = static_cast<double>(t);
    Eigen::MatrixXd out(k, T);
    for (int r = 0; r < k; ++r) {
        Eigen::RowVectorXd f(T);
        for (Eigen::Index j = 0; j < T; ++j) {
            const double tj = static_cast<double>(j + 1);
            if (family == BasisFamily::polynomial) {
                // Centered and scaled; spans the same nested spaces as 1, t, t^2, ...
                f(j) = std::pow((tj - 0.5 * (period + 1.0)) / period, r);
            } else if (r == 0) {
                f(j) = 1.0;
            } else {
                const double freq = 2.0 * std::numbers::pi * static_cast<double>((r + 1) / 2) * tj / period;
                f(j) = r % 2 == 1 ? std::sin(freq) : std::cos(freq);
            }
        }
        // Modified Gram-Schmidt, applied twice.
        for (int pass = 0; pass < 2; ++pass)
            for (int q = 0; q < r; ++q) f -= f.dot(out.row(q)) * out.row(q);
        const double norm = f.norm();
        if (!(norm > 1e-10))
            throw ConfigError(to_string(family) + " basis degenerates on a grid of " + std::to_string(t) +
                              " points at K = " + std::to_string(r + 1));
        out.row(r) = f / norm;
    }
    return out;
}

std::vector<double> MeanCurve::evaluate(std::size_t t) const {
    std::vector<double> mu(t);
    switch (kind) {
        case Kind::gamma:
            for (std::size_t j = 0; j < t; ++j) {
                const double tj = static_cast<double>(j + 1);
                const double v = a * std::pow(tj, b) * std::exp(-tj / c) + d;
                if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("gamma-shape mean is not positive on the grid");
                mu[j] = std::log(v);
            }
            break;
        case Kind::flat:
            std::fill(mu.begin(), mu.end(), level);
            break;
        case Kind::custom:
            if (table.size() != t)
                throw ConfigError("custom mean table has " + std::to_string(table.size()) + " values for T = " +
                                  std::to_string(t));
            mu = table;
            break;
    }
    return mu;
}

std::vector<Archetype> planted_archetypes(std::span<const double> mean, const Eigen::MatrixXd& basis) {
    const std::size_t t = mean.size();
    if (static_cast<std::size_t>(basis.cols()) != t) throw ConfigError("basis and mean differ in grid length");
    const double scale = 30.0 / static_cast<double>(t);

    auto project = [&](auto target) {
        std::vector<double> shift(static_cast<std::size_t>(basis.rows()), 0.0);
        for (Eigen::Index k = 0; k < basis.rows(); ++k)
            for (std::size_t j = 0; j < t; ++j) {
                const double s = static_cast<double>(j + 1) * scale;
                shift[static_cast<std::size_t>(k)] += (target(s, mean[j]) - mean[j]) * basis(k, static_cast<Eigen::Index>(j));
            }
        return shift;
    };

    std::vector<Archetype> out;
    out.push_back({"normal-low", 0.30, project([](double, double mu) { return mu + 0.2; })});
    out.push_back({"normal-high", 0.25, project([](double, double mu) { return mu + 1.5; })});
    out.push_back({"delayed", 0.20, project([](double s, double) {
                       return std::log(40.0 * std::pow(s / 20.0, 8.0) * std::exp(-8.0 * (s - 20.0) / 20.0) + 6.0);
                   })});
    out.push_back({"evergreen", 0.25, project([](double s, double) { return 1.5 + 0.1 * s; })});
    out.push_back({"flash", 0.0, project([](double s, double) {
                       return std::log(30.0 * (s / 3.0) * std::exp(1.0 - s / 3.0) + 0.3);
                   })});
    return out;
}

namespace {

std::vector<Archetype> resolved_archetypes(const GeneratorSpec& spec, std::span<const double> mean,
                                           const Eigen::MatrixXd& basis) {
    return spec.archetypes.empty() ? planted_archetypes(mean, basis) : spec.archetypes;
}

void validate_archetypes(const std::vector<Archetype>& archetypes, int k) {
    if (archetypes.empty()) throw ConfigError("generator needs at least one archetype");
    double total = 0.0;
    for (const auto& a : archetypes) {
        if (!(a.weight >= 0.0)) throw ConfigError("archetype '" + a.name + "' has a negative weight");
        if (static_cast<int>(a.shift.size()) != k)
            throw ConfigError("archetype '" + a.name + "' shift has " + std::to_string(a.shift.size()) +
                              " entries for K = " + std::to_string(k));
        total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("archetype weights must sum to 1");
}

}  // namespace

void validate(const GeneratorSpec& spec) {
    if (spec.t < 2) throw ConfigError("generator grid length must be at least 2");
    if (spec.n < 1) throw ConfigError("generator needs at least one item");
    for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
        if (!(spec.eigenvalues[k] >= 0.0)) throw ConfigError("generator eigenvalues must be nonnegative");
        if (k > 0 && spec.eigenvalues[k] > spec.eigenvalues[k - 1])
            throw ConfigError("generator eigenvalues must be in descending order");
    }
    if (static_cast<std::size_t>(spec.k()) > spec.t) throw ConfigError("generator K exceeds T");
    if (!spec.archetypes.empty()) validate_archetypes(spec.archetypes, spec.k());
}

double standard_normal(std::mt19937_64& rng) {
    // Box-Muller; one draw per call keeps substreams simple.
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    const double v = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

Count poisson_draw(std::mt19937_64& rng, double rate) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw NumericalError("Poisson rate must be finite and nonnegative");
    if (rate == 0.0) return 0;
    if (rate < 10.0) {
        const double u = uniform01(rng);
        double p = std::exp(-rate);
        double cdf = p;
        Count k = 0;
        while (u > cdf && k < 1000) {
            ++k;
            p *= rate / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }
    // Transformed rejection with squeeze (PTRS).
    const double slam = std::sqrt(rate);
    const double loglam = std::log(rate);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform01(rng) - 0.5;
        const double v = uniform01(rng);
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + rate + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<Count>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <= -rate + k * loglam - std::lgamma(k + 1.0))
            return static_cast<Count>(k);
    }
}

std::vector<int> GeneratorTruth::archetype_labels() const {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.archetype);
    return out;
}

namespace {

inline constexpr double kEtaLimit = 20.0;

void effective_decomposition(GeneratorTruth& truth) {
    const auto k = static_cast<Eigen::Index>(truth.eigenvalues.size());
    const auto T = static_cast<Eigen::Index>(truth.grid_size);
    Eigen::VectorXd center = Eigen::VectorXd::Zero(k);
    for (const auto& a : truth.archetypes)
        for (Eigen::Index i = 0; i < k; ++i) center(i) += a.weight * a.shift[static_cast<std::size_t>(i)];
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) sigma(i, i) = truth.eigenvalues[static_cast<std::size_t>(i)];
    for (const auto& a : truth.archetypes) {
        const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(a.shift.data(), k) - center;
        sigma += a.weight * d * d.transpose();
    }

    truth.effective_mean = truth.mean;
    for (Eigen::Index j = 0; j < T; ++j)
        truth.effective_mean[static_cast<std::size_t>(j)] += center.dot(truth.basis.col(j));

    Eigen::MatrixXd rotation(0, 0);
    if (k > 0) {
        const SymmetricEigen eig = eigendecompose_symmetric(sigma, 1.0);
        rotation = eig.eigenfunctions;  // rows are eigenvectors of sigma
        truth.effective_eigenvalues = eig.eigenvalues;
        for (double& v : truth.effective_eigenvalues) v = std::max(v, 0.0);
    }
    truth.effective_eigenfunctions = rotation * truth.basis;
    for (Eigen::Index r = 0; r < k; ++r)
        if (truth.effective_eigenfunctions.row(r).sum() < 0.0) {
            truth.effective_eigenfunctions.row(r) *= -1.0;
            rotation.row(r) *= -1.0;
        }
    for (auto& item : truth.items) {
        const Eigen::VectorXd xi = Eigen::Map<const Eigen::VectorXd>(item.scores.data(), k) - center;
        const Eigen::VectorXd eff = rotation * xi;
        item.effective_scores.assign(eff.data(), eff.data() + eff.size());
    }
}

std::string item_id(std::size_t i, std::size_t n) {
    std::ostringstream s;
    const int width = std::max<int>(5, static_cast<int>(std::to_string(n).size()));
    s << "syn" << std::setw(width) << std::setfill('0') << (i + 1);
    return s.str();
}

}  // namespace

Simulation simulate_corpus(const GeneratorSpec& spec) {
    validate(spec);
    const std::size_t t = spec.t;
    const int k = spec.k();

    GeneratorTruth truth;
    truth.grid_size = t;
    truth.seed = spec.seed;
    truth.mean = spec.mean.evaluate(t);
    truth.basis = make_basis(t, k, spec.family);
    truth.eigenvalues = spec.eigenvalues;
    truth.archetypes = resolved_archetypes(spec, truth.mean, truth.basis);
    validate_archetypes(truth.archetypes, k);

    std::vector<CountTrajectory> items(spec.n);
    truth.items.resize(spec.n);
    std::vector<double> eta(t);
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::mt19937_64 rng(derive_seed(spec.seed, i));
        const double u = uniform01(rng);
        double cdf = 0.0;
        int arch = -1;
        for (std::size_t a = 0; a < truth.archetypes.size(); ++a) {
            cdf += truth.archetypes[a].weight;
            if (truth.archetypes[a].weight > 0.0) {
                arch = static_cast<int>(a);
                if (u < cdf) break;
            }
        }
        const auto& archetype = truth.archetypes[static_cast<std::size_t>(arch)];

        TruthItem& record = truth.items[i];
        record.id = item_id(i, spec.n);
        record.archetype = arch;
        record.scores.resize(static_cast<std::size_t>(k));
        for (int kk = 0; kk < k; ++kk)
            record.scores[static_cast<std::size_t>(kk)] =
                archetype.shift[static_cast<std::size_t>(kk)] +
                std::sqrt(spec.eigenvalues[static_cast<std::size_t>(kk)]) * standard_normal(rng);

        CountTrajectory& traj = items[i];
        traj.id = record.id;
        traj.counts.resize(t);
        for (std::size_t j = 0; j < t; ++j) {
            eta[j] = truth.mean[j];
            for (int kk = 0; kk < k; ++kk)
                eta[j] += record.scores[static_cast<std::size_t>(kk)] * truth.basis(kk, static_cast<Eigen::Index>(j));
            if (!(eta[j] <= kEtaLimit)) {
                std::ostringstream msg;
                msg << "generator spec rejected: log-intensity " << eta[j] << " exceeds " << kEtaLimit << " for item "
                    << record.id << " at year " << (j + 1);
                throw ConfigError(msg.str());
            }
            traj.counts[j] = poisson_draw(rng, std::exp(eta[j]));
        }
    }
    effective_decomposition(truth);

    std::ostringstream provenance;
    provenance << "synthetic: n=" << spec.n << " T=" << t << " K=" << k << " family=" << to_string(spec.family)
               << " seed=" << spec.seed;
    return {Corpus(TimeGrid(t), std::move(items), provenance.str()), std::move(truth)};
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& rows, std::size_t cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) throw DataError("truth record: ragged matrix");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
    return m;
}

}  // namespace

void write_truth(std::ostream& out, const GeneratorTruth& truth) {
    json j;
    j["grid_size"] = truth.grid_size;
    j["seed"] = truth.seed;
    j["mean"] = truth.mean;
    j["basis"] = matrix_json(truth.basis);
    j["eigenvalues"] = truth.eigenvalues;
    json archetypes = json::array();
    for (const auto& a : truth.archetypes) archetypes.push_back({{"name", a.name}, {"weight", a.weight}, {"shift", a.shift}});
    j["archetypes"] = archetypes;
    j["effective_mean"] = truth.effective_mean;
    j["effective_eigenfunctions"] = matrix_json(truth.effective_eigenfunctions);
    j["effective_eigenvalues"] = truth.effective_eigenvalues;
    json items = json::array();
    for (const auto& item : truth.items)
        items.push_back({{"id", item.id},
                         {"archetype", item.archetype},
                         {"scores", item.scores},
                         {"effective_scores", item.effective_scores}});
    j["items"] = items;
    out << j.dump(1) << '\n';
}

void write_truth_file(const std::string& path, const GeneratorTruth& truth) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write truth record '" + path + "'");
    write_truth(out, truth);
}

GeneratorTruth read_truth(std::istream& in) {
    try {
        const json j = json::parse(in);
        GeneratorTruth truth;
        truth.grid_size = j.at("grid_size").get<std::size_t>();
        truth.seed = j.at("seed").get<std::uint64_t>();
        truth.mean = j.at("mean").get<std::vector<double>>();
        truth.basis = matrix_from(j.at("basis"), truth.grid_size);
        truth.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        for (const auto& a : j.at("archetypes"))
            truth.archetypes.push_back({a.at("name").get<std::string>(), a.at("weight").get<double>(),
                                        a.at("shift").get<std::vector<double>>()});
        truth.effective_mean = j.at("effective_mean").get<std::vector<double>>();
        truth.effective_eigenfunctions = matrix_from(j.at("effective_eigenfunctions"), truth.grid_size);
        truth.effective_eigenvalues = j.at("effective_eigenvalues").get<std::vector<double>>();
        for (const auto& item : j.at("items"))
            truth.items.push_back({item.at("id").get<std::string>(), item.at("archetype").get<int>(),
                                   item.at("scores").get<std::vector<double>>(),
                                   item.at("effective_scores").get<std::vector<double>>()});
        return truth;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed truth record: ") + e.what());
    }
}

GeneratorTruth read_truth_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open truth record '" + path + "'");
    return read_truth(in);
}

RecoveryReport recovery_report(const GeneratorTruth& truth, const LatentBasis& basis, std::span<const PaperFit> fits,
                               std::span<const int> assignments) {
    if (basis.grid_size != truth.grid_size) throw DataError("estimated basis and truth differ in grid length");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < truth.items.size(); ++i) index.emplace(truth.items[i].id, i);
    std::vector<std::size_t> match;
    std::vector<std::string> unknown;
    for (const auto& fit : fits) {
        const auto it = index.find(fit.id);
        if (it == index.end()) unknown.push_back(fit.id);
        else match.push_back(it->second);
    }
    if (!unknown.empty() || match.size() != truth.items.size()) {
        std::string msg = "fit ids do not match the truth record";
        if (!unknown.empty()) msg += "; unknown id '" + unknown.front() + "'";
        else msg += "; " + std::to_string(truth.items.size() - match.size()) + " truth items have no fit";
        throw DataError(msg);
    }
    if (!assignments.empty() && assignments.size() != fits.size())
        throw ConfigError("assignments and fits differ in length");

    RecoveryReport report;
    const int k = std::min(basis.k(), static_cast<int>(truth.effective_eigenfunctions.rows()));
    const auto T = static_cast<double>(truth.grid_size);
    for (int c = 0; c < k; ++c) {
        const Eigen::RowVectorXd est = basis.eigenfunctions.row(c);
        const Eigen::RowVectorXd ref = truth.effective_eigenfunctions.row(c);
        const double plus = std::sqrt((est - ref).squaredNorm() / T);
        const double minus = std::sqrt((est + ref).squaredNorm() / T);
        const int sign = minus < plus ? -1 : 1;
        report.signs.push_back(sign);
        report.alignment_rms.push_back(std::min(plus, minus));
        report.max_alignment_rms = std::max(report.max_alignment_rms, std::min(plus, minus));

        std::vector<double> a(fits.size()), b(fits.size());
        for (std::size_t i = 0; i < fits.size(); ++i) {
            a[i] = fits[i].scores.at(static_cast<std::size_t>(c));
            b[i] = sign * truth.items[match[i]].effective_scores.at(static_cast<std::size_t>(c));
        }
        report.score_correlation.push_back(stats::pearson(a, b));
    }
    if (!assignments.empty()) {
        std::vector<int> planted(fits.size());
        for (std::size_t i = 0; i < fits.size(); ++i) planted[i] = truth.items[match[i]].archetype;
        report.ari = adjusted_rand_index(assignments, planted);
    }
    return report;
}

}  // namespace evergreen
