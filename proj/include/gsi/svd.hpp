#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gsi/kernels.hpp"
#include "gsi/matrix.hpp"

namespace gsi {

/// x = u·diag(sigma)·vᵀ with p = min(m, n) components.
///
/// sigma is non-increasing and non-negative; u (m×p) and v (n×p) have
/// orthonormal columns. Signs are fixed so that the largest-magnitude entry of
/// each column of u is positive (first such entry on ties).
struct SvdFactors {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;

    std::size_t components() const noexcept { return sigma.size(); }
};

struct SvdOptions {
    /// Pairs are orthogonal once |a_p·a_q| <= tolerance·|a_p||a_q|.
    double tolerance = 1e-12;
    /// Sweep cap is sweep_factor·min(m, n).
    std::size_t sweep_factor = 100;
    kernels::Exec exec = kernels::Exec::parallel;
};

/// Full thin SVD by Householder QR followed by one-sided Jacobi on R.
/// Throws DataError on non-finite input and NumericalError if the sweep cap is
/// reached.
SvdFactors svd(const Matrix& x, const SvdOptions& options = {});

/// Singular values below rel_tol·σ_max count as zero.
inline constexpr double kRankTolerance = 1e-10;

std::size_t numerical_rank(std::span<const double> sigma, double rel_tol = kRankTolerance);

/// Result of the singular value shrinkage operator S_λ.
struct ThresholdedMatrix {
    Matrix z;
    std::size_t rank = 0;
    double nuclear_norm = 0.0;
    /// The r retained components; sigma holds the shrunken values (σ_i − λ).
    SvdFactors factors;
};

/// S_λ(x) = U_r·diag(σ_i − λ)·V_rᵀ over the r components with σ_i > λ (and
/// σ_i above the rank noise floor). Only those r components are used to form z.
ThresholdedMatrix soft_threshold_svd(const Matrix& x, double lambda, double rank_tolerance = kRankTolerance);

/// Same operator applied to an existing decomposition of x.
ThresholdedMatrix soft_threshold(const SvdFactors& f, double lambda, double rank_tolerance = kRankTolerance);

double frobenius_norm(const Matrix& x);
double nuclear_norm(const Matrix& x);

} // namespace gsi
