#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gsi/rating_matrix.hpp"

namespace gsi {

/// Latent factors of X ≈ U·Vᵀ: user_factors is m×r, item_factors n×r.
struct FactorPair {
    Matrix user_factors;
    Matrix item_factors;

    std::size_t rank() const noexcept { return user_factors.cols(); }
};

struct AlsConfig {
    std::size_t rank = 20;
    double reg_lambda = 0.1;
    std::size_t max_sweeps = 50;
    double tolerance = 1e-5;
    std::uint64_t seed = 42;

    /// Throws ConfigError, including when rank > min(rows, cols).
    void validate(std::size_t rows, std::size_t cols) const;
};

/// Reported after each half-sweep: `solved` was just recomputed with `fixed` held.
struct HalfSweepEvent {
    std::size_t sweep;
    bool solved_users;
    const Matrix& fixed;
    const Matrix& solved;
};
using HalfSweepObserver = std::function<void(const HalfSweepEvent&)>;

struct AlsResult {
    FactorPair factors;
    /// Objective at the start and after every half-sweep.
    std::vector<double> objective_trace;
    std::size_t sweeps = 0;
    bool converged = false;
    /// Set when some normal equations were singular and solved by pseudo-inverse.
    bool used_pseudo_inverse = false;
};

/// Alternating ridge regressions for
/// min ||P_Ω(X) − P_Ω(U Vᵀ)||²_F + λ(||U||²_F + ||V||²_F).
/// Item factors start i.i.d. normal(0, 1/√r); each sweep solves users, then
/// items. Stops when the relative objective change over a sweep is below
/// `tolerance` or after max_sweeps.
AlsResult als_fit(const RatingMatrix& x, const AlsConfig& config, const HalfSweepObserver& observer = {});

/// U·Vᵀ.
Matrix predict(const FactorPair& factors);

double mf_objective(const RatingMatrix& x, const FactorPair& factors, double reg_lambda);

} // namespace gsi
