#include "gsi/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gsi/errors.hpp"

namespace gsi {

namespace {

using kernels::ColumnPanel;

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Fills the columns of `u` flagged in `missing` with unit vectors orthogonal to
// every other column (modified Gram-Schmidt against the canonical basis).
void complete_basis(ColumnPanel& u, const std::vector<bool>& missing) {
    const std::size_t len = u.len();
    std::vector<double> cand(len);
    std::size_t next_axis = 0;
    for (std::size_t k = 0; k < u.count(); ++k) {
        if (!missing[k]) continue;
        bool placed = false;
        while (!placed && next_axis < len) {
            std::fill(cand.begin(), cand.end(), 0.0);
            cand[next_axis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < u.count(); ++c) {
                    if (c == k) continue; // unfilled columns are still zero
                    auto uc = u.col(c);
                    const double d = dot(uc, cand);
                    for (std::size_t t = 0; t < len; ++t) cand[t] -= d * uc[t];
                }
            }
            const double nc = norm(cand);
            if (nc > 0.5) {
                auto uk = u.col(k);
                for (std::size_t t = 0; t < len; ++t) uk[t] = cand[t] / nc;
                placed = true;
            }
        }
        if (!placed) throw NumericalError("svd: could not complete the left singular basis");
    }
}

struct Tall {
    Matrix u;
    std::vector<double> sigma;
    Matrix v;
};

// SVD of a matrix with rows >= cols.
Tall tall_svd(const Matrix& a, const SvdOptions& opt) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    ColumnPanel work = ColumnPanel::from_matrix(a);

    // Householder QR, only worthwhile when the matrix is strictly tall.
    std::vector<std::vector<double>> reflectors;
    const bool use_qr = m > n;
    if (use_qr) {
        reflectors.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            auto col = work.col(k);
            std::span<const double> tail(col.data() + k, m - k);
            const double nx = norm(tail);
            if (nx == 0.0) continue;
            const double alpha = col[k] >= 0.0 ? -nx : nx;
            std::vector<double> w(tail.begin(), tail.end());
            w[0] -= alpha;
            kernels::apply_reflector(w, k, work, k + 1, opt.exec);
            col[k] = alpha;
            std::fill(col.begin() + static_cast<std::ptrdiff_t>(k) + 1, col.end(), 0.0);
            reflectors[k] = std::move(w);
        }
    }

    ColumnPanel w(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        auto src = work.col(j);
        auto dst = w.col(j);
        const std::size_t top = use_qr ? std::min(j + 1, n) : n;
        for (std::size_t i = 0; i < top; ++i) dst[i] = src[i];
    }

    ColumnPanel v = ColumnPanel::identity(n);
    double frob2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double c = norm(w.col(j));
        frob2 += c * c;
    }
    const double negligible = std::sqrt(frob2) * static_cast<double>(n) * std::numeric_limits<double>::epsilon();

    const std::size_t max_sweeps = std::max<std::size_t>(1, opt.sweep_factor * n);
    bool converged = false;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        const auto stats = kernels::jacobi_sweep(w, v, opt.tolerance, negligible, opt.exec);
        if (stats.rotations == 0) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "svd: Jacobi did not converge within " << max_sweeps << " sweeps";
        throw NumericalError(msg.str());
    }

    std::vector<double> raw(n);
    for (std::size_t j = 0; j < n; ++j) raw[j] = norm(w.col(j));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return raw[x] > raw[y]; });

    ColumnPanel ur(n, n);
    ColumnPanel vs(n, n);
    std::vector<bool> missing(n, false);
    std::vector<double> sigma(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        sigma[k] = raw[j];
        auto src = w.col(j);
        auto dst = ur.col(k);
        if (raw[j] > negligible) {
            for (std::size_t t = 0; t < n; ++t) dst[t] = src[t] / raw[j];
        } else {
            missing[k] = true;
        }
        auto vsrc = v.col(j);
        std::copy(vsrc.begin(), vsrc.end(), vs.col(k).begin());
    }
    if (std::find(missing.begin(), missing.end(), true) != missing.end()) complete_basis(ur, missing);

    ColumnPanel u(m, n);
    for (std::size_t k = 0; k < n; ++k) {
        auto src = ur.col(k);
        std::copy(src.begin(), src.end(), u.col(k).begin());
    }
    if (use_qr) {
        for (std::size_t k = n; k-- > 0;) {
            if (reflectors[k].empty()) continue;
            kernels::apply_reflector(reflectors[k], k, u, 0, opt.exec);
        }
    }
    return {u.to_matrix(), std::move(sigma), vs.to_matrix()};
}

void fix_signs(Matrix& u, Matrix& v) {
    for (std::size_t k = 0; k < u.cols(); ++k) {
        std::size_t best = 0;
        double best_abs = -1.0;
        for (std::size_t i = 0; i < u.rows(); ++i) {
            const double a = std::abs(u(i, k));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (u.rows() > 0 && u(best, k) < 0.0) {
            for (std::size_t i = 0; i < u.rows(); ++i) u(i, k) = -u(i, k);
            for (std::size_t i = 0; i < v.rows(); ++i) v(i, k) = -v(i, k);
        }
    }
}

Matrix leading_columns(const Matrix& a, std::size_t r) {
    Matrix out(a.rows(), r);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < r; ++k) out(i, k) = a(i, k);
    return out;
}

} // namespace

SvdFactors svd(const Matrix& x, const SvdOptions& options) {
    for (double v : x.values())
        if (!std::isfinite(v)) throw DataError("svd: input has non-finite entries");

    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (m == 0 || n == 0) return {Matrix(m, 0), {}, Matrix(n, 0)};

    SvdFactors f;
    if (m >= n) {
        auto t = tall_svd(x, options);
        f = {std::move(t.u), std::move(t.sigma), std::move(t.v)};
    } else {
        auto t = tall_svd(x.transposed(), options);
        f = {std::move(t.v), std::move(t.sigma), std::move(t.u)};
    }
    fix_signs(f.u, f.v);
    return f;
}

std::size_t numerical_rank(std::span<const double> sigma, double rel_tol) {
    if (sigma.empty()) return 0;
    const double smax = *std::max_element(sigma.begin(), sigma.end());
    if (!(smax > 0.0)) return 0;
    return static_cast<std::size_t>(
        std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > rel_tol * smax; }));
}

ThresholdedMatrix soft_threshold(const SvdFactors& f, double lambda, double rank_tolerance) {
    if (!(lambda >= 0.0)) throw ConfigError("soft_threshold: lambda must be non-negative");
    const std::size_t m = f.u.rows();
    const std::size_t n = f.v.rows();
    const double smax = f.sigma.empty() ? 0.0 : f.sigma.front();
    const double floor = rank_tolerance * smax;

    std::size_t r = 0;
    while (r < f.sigma.size() && f.sigma[r] > lambda && f.sigma[r] > floor) ++r;

    ThresholdedMatrix out;
    out.rank = r;
    out.factors.sigma.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
        out.factors.sigma[k] = f.sigma[k] - lambda;
        out.nuclear_norm += out.factors.sigma[k];
    }
    out.factors.u = leading_columns(f.u, r);
    out.factors.v = leading_columns(f.v, r);
    out.z = Matrix(m, n);
    if (r > 0) kernels::low_rank_product(out.factors.u, out.factors.sigma, out.factors.v, r, out.z);
    return out;
}

ThresholdedMatrix soft_threshold_svd(const Matrix& x, double lambda, double rank_tolerance) {
    if (!(lambda >= 0.0)) throw ConfigError("soft_threshold_svd: lambda must be non-negative");
    return soft_threshold(svd(x), lambda, rank_tolerance);
}

double frobenius_norm(const Matrix& x) { return std::sqrt(squared_frobenius(x)); }

double nuclear_norm(const Matrix& x) {
    const auto f = svd(x);
    return std::accumulate(f.sigma.begin(), f.sigma.end(), 0.0);
}

} // namespace gsi
