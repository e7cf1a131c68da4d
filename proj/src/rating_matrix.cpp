#include "gsi/rating_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gsi/errors.hpp"

namespace gsi {

ObservedSet ObservedSet::all(std::size_t rows, std::size_t cols) {
    ObservedSet s(rows, cols);
    std::fill(s.bits_.begin(), s.bits_.end(), std::uint8_t{1});
    s.count_ = rows * cols;
    return s;
}

ObservedSet ObservedSet::from_entries(std::size_t rows, std::size_t cols, const std::vector<Entry>& entries) {
    ObservedSet s(rows, cols);
    for (const auto& e : entries) s.insert(e.row, e.col);
    return s;
}

void ObservedSet::insert(std::size_t i, std::size_t j) {
    if (i >= rows_ || j >= cols_) {
        std::ostringstream msg;
        msg << "observed index (" << i << ", " << j << ") outside " << rows_ << "x" << cols_;
        throw DataError(msg.str());
    }
    auto& b = bits_[i * cols_ + j];
    if (!b) {
        b = 1;
        ++count_;
    }
}

void ObservedSet::erase(std::size_t i, std::size_t j) {
    auto& b = bits_[i * cols_ + j];
    if (b) {
        b = 0;
        --count_;
    }
}

std::vector<std::size_t> ObservedSet::flat_indices() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t k = 0; k < bits_.size(); ++k)
        if (bits_[k]) out.push_back(k);
    return out;
}

std::vector<Entry> ObservedSet::entries() const {
    std::vector<Entry> out;
    out.reserve(count_);
    for (std::size_t k = 0; k < bits_.size(); ++k)
        if (bits_[k]) out.push_back({k / cols_, k % cols_});
    return out;
}

ObservedSet ObservedSet::complement() const {
    ObservedSet c(rows_, cols_);
    for (std::size_t k = 0; k < bits_.size(); ++k) c.bits_[k] = bits_[k] ? 0 : 1;
    c.count_ = bits_.size() - count_;
    return c;
}

std::size_t ObservedSet::row_count(std::size_t i) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < cols_; ++j) c += bits_[i * cols_ + j];
    return c;
}

std::size_t ObservedSet::col_count(std::size_t j) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < rows_; ++i) c += bits_[i * cols_ + j];
    return c;
}

RatingMatrix::RatingMatrix(Matrix values, ObservedSet observed)
    : values_(std::move(values)), observed_(std::move(observed)) {
    if (values_.rows() != observed_.rows() || values_.cols() != observed_.cols())
        throw DataError("RatingMatrix: values and observed set differ in shape");
    auto v = values_.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (!observed_.contains_flat(k)) {
            v[k] = 0.0;
        } else if (!std::isfinite(v[k])) {
            throw DataError("RatingMatrix: non-finite observed value");
        }
    }
}

RatingMatrix RatingMatrix::dense(Matrix values) {
    auto omega = ObservedSet::all(values.rows(), values.cols());
    return RatingMatrix(std::move(values), std::move(omega));
}

void RatingMatrix::check_scale(double lo, double hi) const {
    auto v = values_.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (observed_.contains_flat(k) && (v[k] < lo || v[k] > hi)) {
            std::ostringstream msg;
            msg << "rating " << v[k] << " at (" << k / cols() << ", " << k % cols() << ") outside [" << lo << ", "
                << hi << "]";
            throw DataError(msg.str());
        }
    }
}

RatingMatrix RatingMatrix::restricted_to(const ObservedSet& subset) const {
    if (subset.rows() != rows() || subset.cols() != cols())
        throw DataError("restricted_to: shape mismatch");
    for (std::size_t k = 0; k < rows() * cols(); ++k)
        if (subset.contains_flat(k) && !observed_.contains_flat(k))
            throw DataError("restricted_to: subset is not contained in the observed set");
    return RatingMatrix(values_, subset);
}

Matrix project_observed(const RatingMatrix& x) { return x.values(); }

Matrix project_observed(const Matrix& x, const ObservedSet& omega) {
    if (x.rows() != omega.rows() || x.cols() != omega.cols()) throw DataError("project_observed: shape mismatch");
    Matrix out(x.rows(), x.cols());
    auto src = x.values();
    auto dst = out.values();
    for (std::size_t k = 0; k < src.size(); ++k)
        if (omega.contains_flat(k)) dst[k] = src[k];
    return out;
}

Matrix project_unobserved(const Matrix& x, const ObservedSet& omega) {
    if (x.rows() != omega.rows() || x.cols() != omega.cols()) throw DataError("project_unobserved: shape mismatch");
    Matrix out(x.rows(), x.cols());
    auto src = x.values();
    auto dst = out.values();
    for (std::size_t k = 0; k < src.size(); ++k)
        if (!omega.contains_flat(k)) dst[k] = src[k];
    return out;
}

} // namespace gsi
