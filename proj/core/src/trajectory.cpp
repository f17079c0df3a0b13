#include "evergreen/trajectory.hpp"

#include "evergreen/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace evergreen {

TimeGrid::TimeGrid(std::size_t length) : length_(length) {
    if (length < 2) throw DataError("time grid needs at least 2 points, got " + std::to_string(length));
}

std::vector<double> TimeGrid::points() const {
    std::vector<double> p(length_);
    for (std::size_t j = 0; j < length_; ++j) p[j] = at(j);
    return p;
}

Count CountTrajectory::total() const noexcept {
    Count s = 0;
    for (Count c : counts) s += c;
    return s;
}

Corpus::Corpus(TimeGrid grid, std::vector<CountTrajectory> items, std::string provenance)
    : grid_(grid), items_(std::move(items)), provenance_(std::move(provenance)) {
    std::unordered_set<std::string> seen;
    seen.reserve(items_.size());
    for (const auto& item : items_) {
        if (item.counts.size() != grid_.size())
            throw DataError("item '" + item.id + "' has " + std::to_string(item.counts.size()) +
                            " counts, grid has " + std::to_string(grid_.size()));
        for (Count c : item.counts)
            if (c < 0) throw DataError("item '" + item.id + "' has a negative count");
        if (!seen.insert(item.id).second) throw DataError("duplicate id '" + item.id + "'");
    }
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
    std::vector<CountTrajectory> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) picked.push_back(items_.at(i));
    return Corpus(grid_, std::move(picked), provenance_);
}

CorpusFormat parse_format(const std::string& name) {
    if (name == "csv") return CorpusFormat::csv;
    if (name == "jsonl") return CorpusFormat::jsonl;
    throw ConfigError("unknown corpus format '" + name + "' (expected csv or jsonl)");
}

CorpusFormat format_from_path(const std::string& path) {
    auto ends_with = [&](std::string_view suffix) {
        return path.size() >= suffix.size() &&
               path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends_with(".jsonl") || ends_with(".ndjson") ? CorpusFormat::jsonl : CorpusFormat::csv;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

Count parse_count(std::string_view field, std::size_t line_no) {
    Count value = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || field.empty())
        throw DataError("malformed count '" + std::string(field) + "'", line_no);
    if (value < 0) throw DataError("negative count " + std::to_string(value), line_no);
    return value;
}

bool blank(std::string_view line) { return trim(line).empty(); }

Corpus parse_csv(std::istream& in, std::string provenance) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t length = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        auto header = split_commas(line);
        if (header.empty() || header.front() != "id")
            throw DataError("CSV header must start with 'id'", line_no);
        if (header.size() < 3) throw DataError("CSV header needs at least two year columns", line_no);
        length = header.size() - 1;
        break;
    }
    if (length == 0) throw DataError("empty CSV input");

    std::vector<CountTrajectory> items;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        auto fields = split_commas(line);
        if (fields.size() != length + 1)
            throw DataError("inconsistent row length: expected " + std::to_string(length) + " counts, got " +
                                std::to_string(fields.size() - 1),
                            line_no);
        CountTrajectory item;
        item.id = std::string(fields[0]);
        if (item.id.empty()) throw DataError("empty id", line_no);
        if (!seen.insert(item.id).second) throw DataError("duplicate id '" + item.id + "'", line_no);
        item.counts.reserve(length);
        for (std::size_t j = 1; j < fields.size(); ++j) item.counts.push_back(parse_count(fields[j], line_no));
        items.push_back(std::move(item));
    }
    return Corpus(TimeGrid(length), std::move(items), std::move(provenance));
}

Corpus parse_jsonl(std::istream& in, std::string provenance) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t length = 0;
    std::vector<CountTrajectory> items;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("malformed JSON record: ") + e.what(), line_no);
        }
        if (!record.is_object() || !record.contains("id") || !record.contains("counts") ||
            !record["id"].is_string() || !record["counts"].is_array())
            throw DataError("record must be {\"id\": string, \"counts\": [int, ...]}", line_no);
        CountTrajectory item;
        item.id = record["id"].get<std::string>();
        if (item.id.empty()) throw DataError("empty id", line_no);
        for (const auto& v : record["counts"]) {
            if (!v.is_number_integer()) throw DataError("malformed count " + v.dump(), line_no);
            const auto c = v.get<Count>();
            if (c < 0) throw DataError("negative count " + std::to_string(c), line_no);
            item.counts.push_back(c);
        }
        if (length == 0) {
            length = item.counts.size();
            if (length < 2) throw DataError("first record defines fewer than 2 years", line_no);
        } else if (item.counts.size() != length) {
            throw DataError("inconsistent row length: expected " + std::to_string(length) + " counts, got " +
                                std::to_string(item.counts.size()),
                            line_no);
        }
        if (!seen.insert(item.id).second) throw DataError("duplicate id '" + item.id + "'", line_no);
        items.push_back(std::move(item));
    }
    if (length == 0) throw DataError("empty JSONL input");
    return Corpus(TimeGrid(length), std::move(items), std::move(provenance));
}

}  // namespace

Corpus parse_corpus(std::istream& in, CorpusFormat format, std::string provenance) {
    return format == CorpusFormat::csv ? parse_csv(in, std::move(provenance))
                                       : parse_jsonl(in, std::move(provenance));
}

Corpus read_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file '" + path + "'");
    return parse_corpus(in, format_from_path(path), path);
}

void write_corpus(std::ostream& out, const Corpus& corpus, CorpusFormat format) {
    if (format == CorpusFormat::csv) {
        out << "id";
        for (std::size_t j = 0; j < corpus.grid().size(); ++j) out << ",y" << (j + 1);
        out << '\n';
        for (const auto& item : corpus.items()) {
            out << item.id;
            for (Count c : item.counts) out << ',' << c;
            out << '\n';
        }
        return;
    }
    for (const auto& item : corpus.items()) {
        nlohmann::json record = {{"id", item.id}, {"counts", item.counts}};
        out << record.dump() << '\n';
    }
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus file '" + path + "'");
    write_corpus(out, corpus, format_from_path(path));
}

FilterResult filter_by_total(const Corpus& corpus, Count min_total) {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus[i].total() >= min_total) keep.push_back(i);
    const std::size_t kept = keep.size();
    return {corpus.subset(keep), kept, corpus.size() - kept};
}

std::vector<Count> cumulative(std::span<const Count> counts) {
    std::vector<Count> out(counts.size());
    Count running = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) out[j] = running += counts[j];
    return out;
}

std::vector<Count> cumulative(const CountTrajectory& traj) { return cumulative(std::span<const Count>(traj.counts)); }

std::vector<double> log_transform(std::span<const Count> counts) {
    std::vector<double> z(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) z[j] = std::log1p(static_cast<double>(counts[j]));
    return z;
}

std::vector<double> log_transform(const CountTrajectory& traj) { return log_transform(std::span<const Count>(traj.counts)); }

}  // namespace evergreen
