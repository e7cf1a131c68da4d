#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "gsi/matrix.hpp"

namespace gsi {

struct Entry {
    std::size_t row;
    std::size_t col;
    friend bool operator==(const Entry&, const Entry&) = default;
};

/// Index set of observed entries (Ω) over an m×n grid, stored as a bitmap.
class ObservedSet {
public:
    ObservedSet() = default;
    ObservedSet(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

    static ObservedSet all(std::size_t rows, std::size_t cols);
    static ObservedSet from_entries(std::size_t rows, std::size_t cols, const std::vector<Entry>& entries);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t count() const noexcept { return count_; }

    bool contains(std::size_t i, std::size_t j) const noexcept { return bits_[i * cols_ + j] != 0; }
    bool contains_flat(std::size_t k) const noexcept { return bits_[k] != 0; }

    void insert(std::size_t i, std::size_t j);
    void erase(std::size_t i, std::size_t j);

    /// Observed entries as row-major flat indices, ascending.
    std::vector<std::size_t> flat_indices() const;
    std::vector<Entry> entries() const;

    ObservedSet complement() const;
    std::size_t row_count(std::size_t i) const;
    std::size_t col_count(std::size_t j) const;

    friend bool operator==(const ObservedSet&, const ObservedSet&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t count_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Partially observed rating matrix. Entries outside Ω are stored as 0, so a
/// genuine rating of 0 cannot be represented (ingestion rejects it).
class RatingMatrix {
public:
    RatingMatrix() = default;

    /// Takes `values` and zeroes every entry outside `observed`.
    /// Throws DataError on shape mismatch or non-finite observed values.
    RatingMatrix(Matrix values, ObservedSet observed);

    /// Fully observed matrix.
    static RatingMatrix dense(Matrix values);

    std::size_t rows() const noexcept { return values_.rows(); }
    std::size_t cols() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }
    const ObservedSet& observed() const noexcept { return observed_; }
    bool is_observed(std::size_t i, std::size_t j) const noexcept { return observed_.contains(i, j); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }

    /// Throws DataError if any observed value falls outside [lo, hi].
    void check_scale(double lo, double hi) const;

    /// Same values, restricted to a sub-index-set of Ω.
    RatingMatrix restricted_to(const ObservedSet& subset) const;

    friend bool operator==(const RatingMatrix&, const RatingMatrix&) = default;

private:
    Matrix values_;
    ObservedSet observed_;
};

/// P_Ω(X): observed values, 0 elsewhere.
Matrix project_observed(const RatingMatrix& x);
Matrix project_observed(const Matrix& x, const ObservedSet& omega);

/// P_Ω⊥(X): values outside Ω, 0 on Ω.
Matrix project_unobserved(const Matrix& x, const ObservedSet& omega);

} // namespace gsi
