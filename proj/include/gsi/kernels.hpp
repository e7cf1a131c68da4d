#pragma once

// Data-parallel inner loops shared by the solvers. Every kernel has an OpenMP
// path and a serial reference path selected by `Exec`. The library always uses
// `Exec::parallel`; the serial paths are kept for tests and the benchmark.
//
// All parallel kernels partition work into independent pieces whose results do
// not depend on the thread count, so output is bit-identical for any
// OMP_NUM_THREADS.

#include <cstddef>
#include <span>
#include <vector>

#include "gsi/matrix.hpp"
#include "gsi/rating_matrix.hpp"

namespace gsi::kernels {

enum class Exec { serial, parallel };

/// Number of threads the parallel kernels will use.
int max_threads();
/// Sets the OpenMP thread count (values < 1 are ignored).
void set_threads(int n);

/// Column-major panel: `count` columns of length `len`, each contiguous.
class ColumnPanel {
public:
    ColumnPanel() = default;
    ColumnPanel(std::size_t len, std::size_t count) : len_(len), count_(count), data_(len * count, 0.0) {}

    static ColumnPanel from_matrix(const Matrix& a);
    static ColumnPanel identity(std::size_t n);
    Matrix to_matrix() const;

    std::size_t len() const noexcept { return len_; }
    std::size_t count() const noexcept { return count_; }
    std::span<double> col(std::size_t k) noexcept { return {data_.data() + k * len_, len_}; }
    std::span<const double> col(std::size_t k) const noexcept { return {data_.data() + k * len_, len_}; }

private:
    std::size_t len_ = 0;
    std::size_t count_ = 0;
    std::vector<double> data_;
};

/// out(i,j) = Σ_{k<r} u(i,k)·s[k]·v(j,k). Parallel over rows of `out`.
void low_rank_product(const Matrix& u, std::span<const double> s, const Matrix& v, std::size_t r, Matrix& out,
                      Exec exec = Exec::parallel);

/// a·b, parallel over rows of the result.
Matrix matmul(const Matrix& a, const Matrix& b, Exec exec = Exec::parallel);

/// Applies the Householder reflector I − 2·w·wᵀ/(wᵀw) (w supported on rows
/// [offset, offset + w.size())) to columns [first, panel.count()).
void apply_reflector(std::span<const double> w, std::size_t offset, ColumnPanel& panel, std::size_t first,
                     Exec exec = Exec::parallel);

/// Statistics of a single one-sided Jacobi sweep.
struct SweepStats {
    std::size_t rotations = 0;
    double max_off = 0.0; ///< max |a_p·a_q| / (|a_p||a_q|) seen before rotating
};

/// One sweep of one-sided (Hestenes) Jacobi over all column pairs of `w`,
/// accumulating the same rotations into `v`. A pair is rotated when
/// |w_p·w_q| > tolerance·|w_p||w_q|; pairs whose smaller column norm is at most
/// `negligible` are skipped.
///
/// Serial: cyclic row ordering. Parallel: round-robin tournament ordering, each
/// round's disjoint pairs rotated concurrently. The two orderings converge to
/// the same decomposition but are not bitwise equal.
SweepStats jacobi_sweep(ColumnPanel& w, ColumnPanel& v, double tolerance, double negligible,
                        Exec exec = Exec::parallel);

/// Outcome flags of a ridge half-sweep.
struct RidgeStats {
    std::size_t pseudo_inverse_solves = 0; ///< sub-problems whose normal matrix was singular
    std::size_t empty_targets = 0;         ///< targets with no observed entries (set to zero)
};

/// Solves every row (`solve_rows`) or column ridge sub-problem of
/// min ||P_Ω(X) − P_Ω(U Vᵀ)||² + λ||·||² with the other factor fixed.
/// For row i: (Fᵀ F + λI) u_i = Fᵀ y, F = rows of `fixed` at the columns j
/// observed in row i. `out` is resized to (targets × r).
RidgeStats ridge_half_sweep(const RatingMatrix& x, bool solve_rows, const Matrix& fixed, double lambda,
                            Matrix& out, Exec exec = Exec::parallel);

/// Solves (g)·β = b for a symmetric positive semi-definite g via Cholesky;
/// falls back to the pseudo-inverse when g is singular. Returns true if the
/// fallback was used. `b` is overwritten with the solution.
bool solve_spd(std::span<double> g, std::span<double> b, std::size_t r);

/// Pairwise masked distance between user rows:
/// d(a,b) = sqrt(Σ_{c∈C}(x_ac − x_bc)²) / sqrt(|C|) over commonly observed
/// columns C; +inf when C is empty. Diagonal is 0 when the row has any
/// observation. Parallel over target rows.
Matrix masked_distances(const RatingMatrix& x, Exec exec = Exec::parallel);

} // namespace gsi::kernels
