#pragma once

#include "evergreen/latent_basis.hpp"
#include "evergreen/poisson_fit.hpp"
#include "evergreen/trajectory.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace evergreen {

enum class BasisFamily { polynomial, fourier };

std::string to_string(BasisFamily family);
BasisFamily parse_basis_family(const std::string& name);

/// K x T functions orthonormalized on t = 1..T (delta = 1) by Gram-Schmidt.
/// Polynomial: 1, t, t^2, ...; Fourier: 1, sin(2 pi t/T), cos(2 pi t/T),
/// sin(4 pi t/T), ... Throws ConfigError when K > T or the family degenerates
/// on the grid.
Eigen::MatrixXd make_basis(std::size_t t, int k, BasisFamily family);

struct MeanCurve {
    enum class Kind { gamma, flat, custom };
    Kind kind = Kind::gamma;
    // mu(t) = ln(a * t^b * exp(-t/c) + d)
    double a = 2.0;
    double b = 1.5;
    double c = 8.0;
    double d = 0.5;
    double level = 1.0;         // flat: mu(t) = level
    std::vector<double> table;  // custom: mu(t_j), one value per year

    std::vector<double> evaluate(std::size_t t) const;
};

struct Archetype {
    std::string name;
    double weight = 0.0;
    std::vector<double> shift;  // mean of the scores, one per basis function
};

struct GeneratorSpec {
    std::size_t t = 30;
    std::size_t n = 2000;
    MeanCurve mean;
    BasisFamily family = BasisFamily::polynomial;
    std::vector<double> eigenvalues{1.0, 0.8, 0.8, 0.8};
    /// Empty selects the planted shapes from planted_archetypes().
    std::vector<Archetype> archetypes;
    std::uint64_t seed = 20240601;

    int k() const noexcept { return static_cast<int>(eigenvalues.size()); }
};

/// normal-low, normal-high, delayed, evergreen and flash (weight 0), each the
/// projection of a target log-intensity onto `basis` around `mean`.
std::vector<Archetype> planted_archetypes(std::span<const double> mean, const Eigen::MatrixXd& basis);

/// Throws ConfigError on an invalid spec: weights negative or not summing to
/// one, eigenvalues negative or ascending, shift lengths not equal to K.
void validate(const GeneratorSpec& spec);

struct TruthItem {
    std::string id;
    int archetype = 0;
    std::vector<double> scores;            // draws in the generating basis
    std::vector<double> effective_scores;  // coordinates in the effective basis
};

/// Ground truth of a simulated corpus. The score distribution is a mixture, so
/// the population covariance of eta is Phi' (diag(lambda) + B) Phi with B the
/// between-archetype covariance of the shifts. Its eigenpairs, the
/// `effective_*` fields, are what FPCA estimates.
struct GeneratorTruth {
    std::size_t grid_size = 0;
    std::uint64_t seed = 0;
    std::vector<double> mean;
    Eigen::MatrixXd basis;  // K x T
    std::vector<double> eigenvalues;
    std::vector<Archetype> archetypes;
    std::vector<double> effective_mean;
    Eigen::MatrixXd effective_eigenfunctions;  // K x T
    std::vector<double> effective_eigenvalues;
    std::vector<TruthItem> items;

    std::vector<int> archetype_labels() const;
};

struct Simulation {
    Corpus corpus;
    GeneratorTruth truth;
};

/// Draws each item from its own substream derive_seed(seed, i): archetype,
/// scores ~ N(shift, lambda), then Poisson counts with rate exp(eta).
/// Rejects the spec with ConfigError when any eta exceeds 20.
Simulation simulate_corpus(const GeneratorSpec& spec);

/// Portable samplers built on uniform01.
double standard_normal(std::mt19937_64& rng);
Count poisson_draw(std::mt19937_64& rng, double rate);

void write_truth(std::ostream& out, const GeneratorTruth& truth);
void write_truth_file(const std::string& path, const GeneratorTruth& truth);
GeneratorTruth read_truth(std::istream& in);
GeneratorTruth read_truth_file(const std::string& path);

struct RecoveryReport {
    std::vector<double> alignment_rms;  // per compared component, best sign
    std::vector<int> signs;
    double max_alignment_rms = 0.0;
    std::vector<double> score_correlation;  // sign-aligned, against effective scores
    std::optional<double> ari;              // against the planted archetypes
};

/// Compares an estimated basis and fits with the truth on the leading
/// min(K_est, K_true) components. `assignments`, when given, follows the
/// order of `fits`. Throws DataError when the fit ids and truth ids differ.
RecoveryReport recovery_report(const GeneratorTruth& truth, const LatentBasis& basis, std::span<const PaperFit> fits,
                               std::span<const int> assignments = {});

}  // namespace evergreen
