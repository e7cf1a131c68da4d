#include "gsi/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "gsi/errors.hpp"
#include "gsi/kernels.hpp"

namespace gsi {

CsvSchema CsvSchema::movielens_100k() {
    CsvSchema s;
    s.delimiter = '\t';
    s.timestamp_col = 3;
    s.header = false;
    return s;
}

CsvSchema CsvSchema::goodbooks() {
    CsvSchema s;
    s.delimiter = ',';
    s.header = true;
    return s;
}

void CsvSchema::validate() const {
    if (!(min_rating > 0.0)) throw ConfigError("csv schema: min_rating must be > 0 (0 marks a missing entry)");
    if (!(max_rating >= min_rating)) throw ConfigError("csv schema: max_rating < min_rating");
    if (user_col == item_col || user_col == rating_col || item_col == rating_col)
        throw ConfigError("csv schema: user, item and rating columns must differ");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
bool parse(std::string_view s, T& value) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    return ec == std::errc{} && ptr == end;
}

} // namespace

RatingsTable parse_ratings(std::istream& in, const CsvSchema& schema) {
    schema.validate();
    RatingsTable table;
    std::vector<RatingRecord> raw;
    std::string line;
    bool skipped_header = !schema.header;
    const std::size_t needed =
        std::max({schema.user_col, schema.item_col, schema.rating_col, schema.timestamp_col.value_or(0)}) + 1;

    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        const auto fields = split(line, schema.delimiter);
        if (fields.size() < needed) {
            ++table.malformed;
            continue;
        }
        RatingRecord rec;
        if (!parse(fields[schema.user_col], rec.user_id) || !parse(fields[schema.item_col], rec.item_id) ||
            !parse(fields[schema.rating_col], rec.rating) || !std::isfinite(rec.rating)) {
            ++table.malformed;
            continue;
        }
        if (schema.timestamp_col) {
            std::int64_t ts = 0;
            if (!parse(fields[*schema.timestamp_col], ts)) {
                ++table.malformed;
                continue;
            }
            rec.timestamp = ts;
        }
        if (rec.rating < schema.min_rating || rec.rating > schema.max_rating) {
            ++table.rejected;
            continue;
        }
        raw.push_back(rec);
    }

    // Keep the last occurrence of each (user, item) pair.
    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> last;
    for (std::size_t k = 0; k < raw.size(); ++k) last[{raw[k].user_id, raw[k].item_id}] = k;
    table.duplicates = raw.size() - last.size();
    for (std::size_t k = 0; k < raw.size(); ++k)
        if (last[{raw[k].user_id, raw[k].item_id}] == k) table.records.push_back(raw[k]);

    for (const auto& r : table.records) {
        table.users.push_back(r.user_id);
        table.items.push_back(r.item_id);
    }
    for (auto* ids : {&table.users, &table.items}) {
        std::sort(ids->begin(), ids->end());
        ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
    }
    return table;
}

RatingsTable load_ratings_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ratings file '" + path.string() + "'");
    return parse_ratings(in, schema);
}

namespace {

std::vector<std::int64_t> most_active(const std::map<std::int64_t, std::size_t>& counts, std::size_t target) {
    std::vector<std::pair<std::int64_t, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    ranked.resize(std::min(target, ranked.size()));
    std::vector<std::int64_t> ids;
    for (const auto& [id, c] : ranked) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

} // namespace

Subsample subsample(const RatingsTable& table, std::size_t m_target, std::size_t n_target, SubsampleRule) {
    if (table.records.empty()) throw DataError("subsample: ratings table is empty");
    if (m_target == 0 || n_target == 0) throw ConfigError("subsample: targets must be >= 1");

    std::map<std::int64_t, std::size_t> user_counts, item_counts;
    for (const auto& r : table.records) {
        ++user_counts[r.user_id];
        ++item_counts[r.item_id];
    }

    Subsample out;
    if (m_target > user_counts.size()) {
        out.warnings.push_back("user target " + std::to_string(m_target) + " clamped to " +
                               std::to_string(user_counts.size()));
    }
    if (n_target > item_counts.size()) {
        out.warnings.push_back("item target " + std::to_string(n_target) + " clamped to " +
                               std::to_string(item_counts.size()));
    }
    // std::map iterates ids ascending, so the stable sort breaks ties by id.
    out.user_ids = most_active(user_counts, m_target);
    out.item_ids = most_active(item_counts, n_target);

    std::unordered_map<std::int64_t, std::size_t> row_of, col_of;
    for (std::size_t i = 0; i < out.user_ids.size(); ++i) row_of[out.user_ids[i]] = i;
    for (std::size_t j = 0; j < out.item_ids.size(); ++j) col_of[out.item_ids[j]] = j;

    Matrix values(out.user_ids.size(), out.item_ids.size());
    ObservedSet omega(values.rows(), values.cols());
    for (const auto& r : table.records) {
        auto ri = row_of.find(r.user_id);
        auto cj = col_of.find(r.item_id);
        if (ri == row_of.end() || cj == col_of.end()) continue;
        values(ri->second, cj->second) = r.rating;
        omega.insert(ri->second, cj->second);
    }
    out.sparsity = 1.0 - static_cast<double>(omega.count()) / static_cast<double>(values.size());
    out.matrix = RatingMatrix(std::move(values), std::move(omega));
    return out;
}

Matrix knn_impute(const RatingMatrix& x, std::size_t k_neighbors) {
    if (k_neighbors < 1) throw ConfigError("knn_impute: k_neighbors must be >= 1");
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (x.observed().count() == 0) throw DegenerateInputError("knn_impute: no observed entries");

    double global_sum = 0.0;
    std::vector<double> item_mean(n, 0.0);
    std::vector<std::size_t> item_count(n, 0);
    for (const auto& e : x.observed().entries()) {
        item_mean[e.col] += x(e.row, e.col);
        ++item_count[e.col];
        global_sum += x(e.row, e.col);
    }
    const double global_mean = global_sum / static_cast<double>(x.observed().count());
    for (std::size_t j = 0; j < n; ++j) item_mean[j] = item_count[j] ? item_mean[j] / item_count[j] : global_mean;

    const Matrix dist = kernels::masked_distances(x);
    Matrix out = x.values();

    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel
    {
        std::vector<std::pair<double, std::size_t>> cand;
#pragma omp for schedule(dynamic, 8)
        for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            for (std::size_t j = 0; j < n; ++j) {
                if (x.is_observed(i, j)) continue;
                cand.clear();
                for (std::size_t b = 0; b < m; ++b)
                    if (b != i && x.is_observed(b, j) && std::isfinite(dist(i, b))) cand.emplace_back(dist(i, b), b);
                if (cand.empty()) {
                    out(i, j) = item_mean[j];
                    continue;
                }
                const std::size_t take = std::min(k_neighbors, cand.size());
                std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
                double s = 0.0;
                for (std::size_t t = 0; t < take; ++t) s += x(cand[t].second, j);
                out(i, j) = s / static_cast<double>(take);
            }
        }
    }
    return out;
}

SplitMask train_test_split(const ObservedSet& omega, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("train_test_split: fraction must lie in (0, 1)");
    auto idx = omega.flat_indices();
    std::mt19937_64 rng(seed);
    for (std::size_t k = idx.size(); k > 1; --k) {
        std::uniform_int_distribution<std::size_t> pick(0, k - 1);
        std::swap(idx[k - 1], idx[pick(rng)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));

    SplitMask split;
    split.seed = seed;
    split.fraction = fraction;
    split.train = ObservedSet(omega.rows(), omega.cols());
    split.test = ObservedSet(omega.rows(), omega.cols());
    const std::size_t cols = omega.cols();
    for (std::size_t k = 0; k < idx.size(); ++k) {
        auto& target = k < n_train ? split.train : split.test;
        target.insert(idx[k] / cols, idx[k] % cols);
    }
    return split;
}

void SyntheticConfig::validate() const {
    if (rows == 0 || cols == 0) throw ConfigError("synthetic: rows and cols must be >= 1");
    if (!(observed_fraction > 0.0 && observed_fraction <= 1.0))
        throw ConfigError("synthetic: observed_fraction must lie in (0, 1]");
    if (!(stddev > 0.0)) throw ConfigError("synthetic: stddev must be > 0");
    if (!(min_rating > 0.0) || !(max_rating > min_rating))
        throw ConfigError("synthetic: need 0 < min_rating < max_rating");
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(config.mean, config.stddev);
    std::bernoulli_distribution keep(config.observed_fraction);

    Matrix full(config.rows, config.cols);
    ObservedSet omega(config.rows, config.cols);
    for (std::size_t i = 0; i < config.rows; ++i) {
        for (std::size_t j = 0; j < config.cols; ++j) {
            full(i, j) = std::clamp(normal(rng), config.min_rating, config.max_rating);
            if (keep(rng)) omega.insert(i, j);
        }
    }
    RatingMatrix observed(full, std::move(omega));
    return {std::move(full), std::move(observed)};
}

void write_snapshot(std::ostream& out, const RatingMatrix& x) {
    out << "GSI-MATRIX v1 " << x.rows() << ' ' << x.cols() << ' ' << x.observed().count() << '\n';
    char buf[64];
    for (const auto& e : x.observed().entries()) {
        std::snprintf(buf, sizeof buf, "%.6g", x(e.row, e.col));
        out << e.row << ' ' << e.col << ' ' << buf << '\n';
    }
}

RatingMatrix read_snapshot(std::istream& in) {
    std::string magic, version;
    std::size_t m = 0, n = 0, count = 0;
    if (!(in >> magic >> version >> m >> n >> count) || magic != "GSI-MATRIX" || version != "v1")
        throw DataError("snapshot: bad header");
    Matrix values(m, n);
    ObservedSet omega(m, n);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t i = 0, j = 0;
        double v = 0.0;
        if (!(in >> i >> j >> v)) throw DataError("snapshot: truncated entry list");
        if (i >= m || j >= n) throw DataError("snapshot: entry index out of range");
        values(i, j) = v;
        omega.insert(i, j);
    }
    if (omega.count() != count) throw DataError("snapshot: duplicate entries");
    return RatingMatrix(std::move(values), std::move(omega));
}

} // namespace gsi
