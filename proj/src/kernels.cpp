#include "gsi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <omp.h>

#include "gsi/svd.hpp"

namespace gsi::kernels {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
    if (n >= 1) omp_set_num_threads(n);
}

ColumnPanel ColumnPanel::from_matrix(const Matrix& a) {
    ColumnPanel p(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) p.data_[j * p.len_ + i] = a(i, j);
    return p;
}

ColumnPanel ColumnPanel::identity(std::size_t n) {
    ColumnPanel p(n, n);
    for (std::size_t k = 0; k < n; ++k) p.data_[k * n + k] = 1.0;
    return p;
}

Matrix ColumnPanel::to_matrix() const {
    Matrix m(len_, count_);
    for (std::size_t j = 0; j < count_; ++j)
        for (std::size_t i = 0; i < len_; ++i) m(i, j) = data_[j * len_ + i];
    return m;
}

namespace {

void low_rank_row(const Matrix& u, std::span<const double> s, const Matrix& v, std::size_t r, std::size_t i,
                  std::vector<double>& scaled, Matrix& out) {
    auto ui = u.row(i);
    for (std::size_t k = 0; k < r; ++k) scaled[k] = ui[k] * s[k];
    auto oi = out.row(i);
    for (std::size_t j = 0; j < v.rows(); ++j) {
        auto vj = v.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < r; ++k) acc += scaled[k] * vj[k];
        oi[j] = acc;
    }
}

void matmul_row(const Matrix& a, const Matrix& b, std::size_t i, Matrix& c) {
    auto ci = c.row(i);
    auto ai = a.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = ai[k];
        if (aik == 0.0) continue;
        auto bk = b.row(k);
        for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
}

void reflect_column(std::span<const double> w, double scale, std::size_t offset, std::span<double> col) {
    double d = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) d += w[t] * col[offset + t];
    const double f = scale * d;
    if (f == 0.0) return;
    for (std::size_t t = 0; t < w.size(); ++t) col[offset + t] -= f * w[t];
}

// Rotates columns p < q if they are not yet orthogonal. Returns true if rotated.
bool rotate_pair(ColumnPanel& w, ColumnPanel& v, std::vector<double>& norms2, std::size_t p, std::size_t q,
                 double tolerance, double negligible, double& max_off) {
    const double a = norms2[p];
    const double b = norms2[q];
    const double na = std::sqrt(a);
    const double nb = std::sqrt(b);
    if (std::min(na, nb) <= negligible) return false;

    auto wp = w.col(p);
    auto wq = w.col(q);
    double g = 0.0;
    for (std::size_t t = 0; t < wp.size(); ++t) g += wp[t] * wq[t];
    const double rel = std::abs(g) / na / nb;
    max_off = std::max(max_off, rel);
    if (rel <= tolerance) return false;

    const double zeta = (b - a) / (2.0 * g);
    double t;
    if (std::abs(zeta) > 1e150) {
        t = 0.5 / zeta;
    } else {
        t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
    }
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = c * t;

    for (std::size_t k = 0; k < wp.size(); ++k) {
        const double x = wp[k];
        const double y = wq[k];
        wp[k] = c * x - s * y;
        wq[k] = s * x + c * y;
    }
    auto vp = v.col(p);
    auto vq = v.col(q);
    for (std::size_t k = 0; k < vp.size(); ++k) {
        const double x = vp[k];
        const double y = vq[k];
        vp[k] = c * x - s * y;
        vq[k] = s * x + c * y;
    }
    norms2[p] = std::max(0.0, a - t * g);
    norms2[q] = std::max(0.0, b + t * g);
    return true;
}

void ridge_target(const RatingMatrix& x, bool solve_rows, const Matrix& fixed, double lambda, std::size_t target,
                  Matrix& out, std::vector<double>& g, std::vector<double>& rhs, bool& used_pinv, bool& empty) {
    const std::size_t r = fixed.cols();
    std::fill(g.begin(), g.end(), 0.0);
    std::fill(rhs.begin(), rhs.end(), 0.0);
    const std::size_t others = solve_rows ? x.cols() : x.rows();
    std::size_t seen = 0;
    for (std::size_t o = 0; o < others; ++o) {
        const std::size_t i = solve_rows ? target : o;
        const std::size_t j = solve_rows ? o : target;
        if (!x.is_observed(i, j)) continue;
        ++seen;
        const double y = x(i, j);
        auto f = fixed.row(o);
        for (std::size_t a = 0; a < r; ++a) {
            rhs[a] += y * f[a];
            for (std::size_t b = a; b < r; ++b) g[a * r + b] += f[a] * f[b];
        }
    }
    auto dst = out.row(target);
    used_pinv = false;
    empty = seen == 0;
    if (empty) {
        std::fill(dst.begin(), dst.end(), 0.0);
        return;
    }
    for (std::size_t a = 0; a < r; ++a) {
        g[a * r + a] += lambda;
        for (std::size_t b = 0; b < a; ++b) g[a * r + b] = g[b * r + a];
    }
    used_pinv = solve_spd(g, rhs, r);
    std::copy(rhs.begin(), rhs.end(), dst.begin());
}

void distance_row(const RatingMatrix& x, std::size_t a, Matrix& out) {
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    auto xa = x.values().row(a);
    for (std::size_t b = 0; b < m; ++b) {
        auto xb = x.values().row(b);
        double sum = 0.0;
        std::size_t overlap = 0;
        for (std::size_t c = 0; c < n; ++c) {
            if (x.is_observed(a, c) && x.is_observed(b, c)) {
                const double d = xa[c] - xb[c];
                sum += d * d;
                ++overlap;
            }
        }
        out(a, b) = overlap == 0 ? std::numeric_limits<double>::infinity()
                                 : std::sqrt(sum) / std::sqrt(static_cast<double>(overlap));
    }
}

} // namespace

void low_rank_product(const Matrix& u, std::span<const double> s, const Matrix& v, std::size_t r, Matrix& out,
                      Exec exec) {
    if (r > u.cols() || r > v.cols() || r > s.size()) throw std::invalid_argument("low_rank_product: rank too large");
    if (out.rows() != u.rows() || out.cols() != v.rows()) out = Matrix(u.rows(), v.rows());
    const auto m = static_cast<std::ptrdiff_t>(u.rows());
    if (exec == Exec::serial) {
        std::vector<double> scaled(r);
        for (std::ptrdiff_t i = 0; i < m; ++i) low_rank_row(u, s, v, r, static_cast<std::size_t>(i), scaled, out);
        return;
    }
#pragma omp parallel
    {
        std::vector<double> scaled(r);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < m; ++i) low_rank_row(u, s, v, r, static_cast<std::size_t>(i), scaled, out);
    }
}

Matrix matmul(const Matrix& a, const Matrix& b, Exec exec) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    const auto m = static_cast<std::ptrdiff_t>(a.rows());
    if (exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < m; ++i) matmul_row(a, b, static_cast<std::size_t>(i), c);
        return c;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) matmul_row(a, b, static_cast<std::size_t>(i), c);
    return c;
}

void apply_reflector(std::span<const double> w, std::size_t offset, ColumnPanel& panel, std::size_t first,
                     Exec exec) {
    double ww = 0.0;
    for (double x : w) ww += x * x;
    if (ww == 0.0) return;
    const double scale = 2.0 / ww;
    const auto count = static_cast<std::ptrdiff_t>(panel.count());
    const auto start = static_cast<std::ptrdiff_t>(first);
    if (exec == Exec::serial) {
        for (std::ptrdiff_t c = start; c < count; ++c) reflect_column(w, scale, offset, panel.col(c));
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = start; c < count; ++c) reflect_column(w, scale, offset, panel.col(c));
}

SweepStats jacobi_sweep(ColumnPanel& w, ColumnPanel& v, double tolerance, double negligible, Exec exec) {
    const std::size_t n = w.count();
    std::vector<double> norms2(n);
    for (std::size_t k = 0; k < n; ++k) {
        auto c = w.col(k);
        double s = 0.0;
        for (double x : c) s += x * x;
        norms2[k] = s;
    }

    SweepStats stats;
    if (n < 2) return stats;

    if (exec == Exec::serial) {
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                if (rotate_pair(w, v, norms2, p, q, tolerance, negligible, stats.max_off)) ++stats.rotations;
        return stats;
    }

    // Round-robin tournament: slot 0 stays fixed, the others rotate each round.
    const std::size_t players = n + (n % 2);
    std::vector<std::size_t> slot(players);
    for (std::size_t k = 0; k < players; ++k) slot[k] = k; // index n (if present) is a bye
    const auto half = static_cast<std::ptrdiff_t>(players / 2);
    for (std::size_t round = 0; round + 1 < players; ++round) {
        std::size_t rotations = 0;
        double max_off = stats.max_off;
#pragma omp parallel for schedule(static) reduction(+ : rotations) reduction(max : max_off)
        for (std::ptrdiff_t i = 0; i < half; ++i) {
            std::size_t p = slot[static_cast<std::size_t>(i)];
            std::size_t q = slot[players - 1 - static_cast<std::size_t>(i)];
            if (p >= n || q >= n) continue;
            if (p > q) std::swap(p, q);
            if (rotate_pair(w, v, norms2, p, q, tolerance, negligible, max_off)) ++rotations;
        }
        stats.rotations += rotations;
        stats.max_off = max_off;
        std::rotate(slot.begin() + 1, slot.end() - 1, slot.end());
    }
    return stats;
}

bool solve_spd(std::span<double> g, std::span<double> b, std::size_t r) {
    std::vector<double> l(g.begin(), g.end());
    double max_diag = 0.0;
    for (std::size_t a = 0; a < r; ++a) max_diag = std::max(max_diag, std::abs(g[a * r + a]));
    const double floor = 1e-12 * max_diag;

    bool ok = max_diag > 0.0;
    for (std::size_t j = 0; ok && j < r; ++j) {
        double d = l[j * r + j];
        for (std::size_t k = 0; k < j; ++k) d -= l[j * r + k] * l[j * r + k];
        if (!(d > floor)) {
            ok = false;
            break;
        }
        const double ljj = std::sqrt(d);
        l[j * r + j] = ljj;
        for (std::size_t i = j + 1; i < r; ++i) {
            double s = l[i * r + j];
            for (std::size_t k = 0; k < j; ++k) s -= l[i * r + k] * l[j * r + k];
            l[i * r + j] = s / ljj;
        }
    }
    if (ok) {
        // L y = b, then Lᵀ x = y.
        for (std::size_t i = 0; i < r; ++i) {
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= l[i * r + k] * b[k];
            b[i] = s / l[i * r + i];
        }
        for (std::size_t ii = r; ii-- > 0;) {
            double s = b[ii];
            for (std::size_t k = ii + 1; k < r; ++k) s -= l[k * r + ii] * b[k];
            b[ii] = s / l[ii * r + ii];
        }
        return false;
    }

    Matrix gm(r, r);
    std::copy(g.begin(), g.end(), gm.values().begin());
    const auto f = svd(gm, SvdOptions{.exec = Exec::serial});
    const double cutoff = f.sigma.empty() ? 0.0 : 1e-12 * f.sigma.front();
    std::vector<double> coef(r, 0.0);
    for (std::size_t k = 0; k < r; ++k) {
        if (!(f.sigma[k] > cutoff)) continue;
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i) s += f.u(i, k) * b[i];
        coef[k] = s / f.sigma[k];
    }
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < r; ++k) s += f.v(i, k) * coef[k];
        b[i] = s;
    }
    return true;
}

RidgeStats ridge_half_sweep(const RatingMatrix& x, bool solve_rows, const Matrix& fixed, double lambda, Matrix& out,
                            Exec exec) {
    const std::size_t targets = solve_rows ? x.rows() : x.cols();
    const std::size_t others = solve_rows ? x.cols() : x.rows();
    if (fixed.rows() != others) throw std::invalid_argument("ridge_half_sweep: fixed factor has wrong row count");
    const std::size_t r = fixed.cols();
    if (out.rows() != targets || out.cols() != r) out = Matrix(targets, r);

    RidgeStats stats;
    const auto count = static_cast<std::ptrdiff_t>(targets);
    if (exec == Exec::serial) {
        std::vector<double> g(r * r), rhs(r);
        for (std::ptrdiff_t t = 0; t < count; ++t) {
            bool pinv = false, empty = false;
            ridge_target(x, solve_rows, fixed, lambda, static_cast<std::size_t>(t), out, g, rhs, pinv, empty);
            stats.pseudo_inverse_solves += pinv;
            stats.empty_targets += empty;
        }
        return stats;
    }

    std::size_t pinv_count = 0;
    std::size_t empty_count = 0;
#pragma omp parallel reduction(+ : pinv_count, empty_count)
    {
        std::vector<double> g(r * r), rhs(r);
#pragma omp for schedule(static)
        for (std::ptrdiff_t t = 0; t < count; ++t) {
            bool pinv = false, empty = false;
            ridge_target(x, solve_rows, fixed, lambda, static_cast<std::size_t>(t), out, g, rhs, pinv, empty);
            pinv_count += pinv;
            empty_count += empty;
        }
    }
    stats.pseudo_inverse_solves = pinv_count;
    stats.empty_targets = empty_count;
    return stats;
}

Matrix masked_distances(const RatingMatrix& x, Exec exec) {
    const auto m = static_cast<std::ptrdiff_t>(x.rows());
    Matrix out(x.rows(), x.rows());
    if (exec == Exec::serial) {
        for (std::ptrdiff_t a = 0; a < m; ++a) distance_row(x, static_cast<std::size_t>(a), out);
        return out;
    }
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t a = 0; a < m; ++a) distance_row(x, static_cast<std::size_t>(a), out);
    return out;
}

} // namespace gsi::kernels
