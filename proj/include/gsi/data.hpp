#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gsi/rating_matrix.hpp"

namespace gsi {

struct RatingRecord {
    std::int64_t user_id = 0;
    std::int64_t item_id = 0;
    double rating = 0.0;
    std::optional<std::int64_t> timestamp;
};

struct RatingsTable {
    std::vector<RatingRecord> records;
    std::vector<std::int64_t> users; ///< sorted unique user ids
    std::vector<std::int64_t> items; ///< sorted unique item ids
    std::size_t rejected = 0;        ///< rows with a rating outside the scale
    std::size_t malformed = 0;       ///< rows that could not be parsed
    std::size_t duplicates = 0;      ///< (user, item) repeats dropped, last kept
};

/// Column layout of a delimited ratings file (0-based column indices).
struct CsvSchema {
    char delimiter = ',';
    std::size_t user_col = 0;
    std::size_t item_col = 1;
    std::size_t rating_col = 2;
    std::optional<std::size_t> timestamp_col;
    bool header = false;
    double min_rating = 1.0;
    double max_rating = 5.0;

    /// MovieLens 100K u.data: user \t item \t rating \t timestamp, no header.
    static CsvSchema movielens_100k();
    /// Goodbooks-10k ratings.csv: user_id,book_id,rating with a header.
    static CsvSchema goodbooks();

    void validate() const;
};

/// Throws DataError if the file cannot be opened. Bad rows are counted, not fatal.
RatingsTable load_ratings_csv(const std::filesystem::path& path, const CsvSchema& schema);
RatingsTable parse_ratings(std::istream& in, const CsvSchema& schema);

enum class SubsampleRule { most_active };

struct Subsample {
    RatingMatrix matrix;
    std::vector<std::int64_t> user_ids; ///< row i ↔ user_ids[i], ascending
    std::vector<std::int64_t> item_ids; ///< column j ↔ item_ids[j], ascending
    double sparsity = 0.0;              ///< fraction of unobserved cells
    std::vector<std::string> warnings;
};

/// Keeps the m_target users with the most ratings and the n_target items with
/// the most ratings (ties by ascending id); targets above the vocabulary size
/// are clamped with a warning. Throws DataError on an empty table.
Subsample subsample(const RatingsTable& table, std::size_t m_target, std::size_t n_target,
                    SubsampleRule rule = SubsampleRule::most_active);

/// Fills every unobserved entry (i, j) with the mean rating of item j among
/// the k users nearest to i (masked distance, ties by index) who rated j.
/// Fewer than k such users: all of them. None: the item mean, or the global
/// mean if nobody rated j. Observed entries are copied unchanged.
Matrix knn_impute(const RatingMatrix& x, std::size_t k_neighbors);

struct SplitMask {
    ObservedSet train;
    ObservedSet test;
    std::uint64_t seed = 0;
    double fraction = 0.0;
};

/// Uniform random partition of omega with round(fraction·|omega|) entries in
/// train. Throws ConfigError unless 0 < fraction < 1.
SplitMask train_test_split(const ObservedSet& omega, double fraction, std::uint64_t seed);

struct SyntheticConfig {
    std::size_t rows = 2000;
    std::size_t cols = 200;
    double mean = 3.5;
    double stddev = 0.65;
    double observed_fraction = 0.25;
    double min_rating = 1.0;
    double max_rating = 5.0;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SyntheticData {
    Matrix full;          ///< every clipped draw
    RatingMatrix observed; ///< the Bernoulli-masked view
};

/// Clipped normal(mean, stddev) ratings with an independent Bernoulli mask.
SyntheticData generate_synthetic(const SyntheticConfig& config);

/// Matrix snapshot: "GSI-MATRIX v1 m n |Ω|" then one "i j value" line per
/// observed entry in row-major order, values with 6 significant digits.
void write_snapshot(std::ostream& out, const RatingMatrix& x);
RatingMatrix read_snapshot(std::istream& in);

} // namespace gsi
