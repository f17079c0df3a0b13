#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace evergreen {

using Count = std::int64_t;

/// Yearly grid t_j = j, j = 1..T, unit spacing.
class TimeGrid {
public:
    explicit TimeGrid(std::size_t length);

    std::size_t size() const noexcept { return length_; }
    double delta() const noexcept { return 1.0; }
    double at(std::size_t j) const noexcept { return static_cast<double>(j + 1); }
    std::vector<double> points() const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::size_t length_;
};

struct CountTrajectory {
    std::string id;
    std::vector<Count> counts;

    Count total() const noexcept;
    friend bool operator==(const CountTrajectory&, const CountTrajectory&) = default;
};

/// Validated collection of trajectories on a shared grid. Ids are unique and
/// every count is nonnegative.
class Corpus {
public:
    Corpus(TimeGrid grid, std::vector<CountTrajectory> items, std::string provenance = {});

    const TimeGrid& grid() const noexcept { return grid_; }
    const std::vector<CountTrajectory>& items() const noexcept { return items_; }
    const std::string& provenance() const noexcept { return provenance_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    const CountTrajectory& operator[](std::size_t i) const { return items_[i]; }

    /// Subset by item index, order as given.
    Corpus subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const Corpus&, const Corpus&) = default;

private:
    TimeGrid grid_;
    std::vector<CountTrajectory> items_;
    std::string provenance_;
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat parse_format(const std::string& name);
/// Guess from the file extension (.jsonl / .ndjson → jsonl, otherwise csv).
CorpusFormat format_from_path(const std::string& path);

/// CSV: header `id,y1,...,yT`. JSONL: one {"id": str, "counts": [int, ...]}
/// per line. Blank lines are skipped. Throws DataError with the line number.
Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string provenance = {});
Corpus read_corpus_file(const std::string& path);

void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format);
void write_corpus_file(const std::string& path, const Corpus& corpus);

struct FilterResult {
    Corpus corpus;
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

/// Keeps items whose total count is at least `min_total`, preserving order.
FilterResult filter_by_total(const Corpus& corpus, Count min_total);

std::vector<Count> cumulative(const CountTrajectory& traj);
std::vector<Count> cumulative(std::span<const Count> counts);

/// z_j = ln(y_j + 1).
std::vector<double> log_transform(const CountTrajectory& traj);
std::vector<double> log_transform(std::span<const Count> counts);

}  // namespace evergreen
