#pragma once

// Seeded generators and brute-force oracles shared by the unit, property and
// acceptance tests. Nothing here calls the library's numerical routines, so
// agreement with the library is evidence rather than a tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsi/matrix.hpp"
#include "gsi/rating_matrix.hpp"

namespace gsi::test {

// SplitMix64 stream; small, portable and identical on every platform.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
    std::size_t range(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }
    bool coin(double p) { return uniform() < p; }
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Matrix matrix(std::size_t m, std::size_t n, double scale = 1.0) {
        Matrix a(m, n);
        for (auto& v : a.values()) v = scale * normal();
        return a;
    }
    Matrix ratings(std::size_t m, std::size_t n) {
        Matrix a(m, n);
        for (auto& v : a.values()) v = static_cast<double>(range(1, 5));
        return a;
    }
    Matrix low_rank(std::size_t m, std::size_t n, std::size_t r) {
        const Matrix u = matrix(m, r);
        const Matrix v = matrix(n, r);
        Matrix a(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < r; ++k) a(i, j) += u(i, k) * v(j, k);
        return a;
    }
    ObservedSet mask(std::size_t m, std::size_t n, double p) {
        ObservedSet o(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (coin(p)) o.insert(i, j);
        return o;
    }
    std::vector<std::size_t> subset(std::size_t n, std::size_t k) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + index(n - i)]);
        all.resize(k);
        std::sort(all.begin(), all.end());
        return all;
    }

private:
    std::uint64_t state_;
};

// ---- dense helpers --------------------------------------------------------

inline Matrix naive_mul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k)
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
    return c;
}

inline Matrix naive_transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

inline double frob2(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * a(i, j);
    return s;
}

// ---- symmetric eigensolver (classic two-sided Jacobi) ---------------------

struct Eigen {
    std::vector<double> values; ///< descending
    Matrix vectors;             ///< columns match values
};

inline Eigen jacobi_eigen(Matrix a) {
    const std::size_t n = a.rows();
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
    for (int sweep = 0; sweep < 200; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    Eigen e;
    e.vectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        e.values.push_back(a(order[k], order[k]));
        for (std::size_t i = 0; i < n; ++i) e.vectors(i, k) = v(i, order[k]);
    }
    return e;
}

/// Singular values from the eigenvalues of the Gram matrix of the thinner side.
inline std::vector<double> gram_singular_values(const Matrix& x) {
    const Matrix g = x.rows() >= x.cols() ? naive_mul(naive_transpose(x), x) : naive_mul(x, naive_transpose(x));
    auto e = jacobi_eigen(g);
    std::vector<double> s;
    for (double l : e.values) s.push_back(std::sqrt(std::max(l, 0.0)));
    return s;
}

inline double oracle_nuclear_norm(const Matrix& x) {
    double s = 0.0;
    for (double v : gram_singular_values(x)) s += v;
    return s;
}

/// Singular value thresholding built on the Gram eigendecomposition
/// (requires rows >= cols). Components with sigma <= lambda are dropped.
inline Matrix oracle_svt(const Matrix& x, double lambda) {
    const std::size_t m = x.rows(), n = x.cols();
    auto e = jacobi_eigen(naive_mul(naive_transpose(x), x));
    const Matrix xv = naive_mul(x, e.vectors);
    Matrix z(m, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double sigma = std::sqrt(std::max(e.values[k], 0.0));
        if (sigma <= lambda) continue;
        const double scale = (sigma - lambda) / sigma;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) z(i, j) += scale * xv(i, k) * e.vectors(j, k);
    }
    return z;
}

// ---- completion oracle ----------------------------------------------------

inline double oracle_completion_objective(const Matrix& x, const ObservedSet& omega, const Matrix& z, double lambda) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (omega.contains(i, j)) loss += (x(i, j) - z(i, j)) * (x(i, j) - z(i, j));
    return 0.5 * loss + lambda * oracle_nuclear_norm(z);
}

/// Proximal gradient with unit step on ½||P_Ω(X − Z)||² + λ||Z||_*, from zero.
inline Matrix proximal_gradient(const Matrix& x, const ObservedSet& omega, double lambda, std::size_t iterations) {
    Matrix z(x.rows(), x.cols());
    for (std::size_t t = 0; t < iterations; ++t) {
        Matrix y = z;
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < x.cols(); ++j)
                if (omega.contains(i, j)) y(i, j) += x(i, j) - z(i, j);
        z = oracle_svt(y, lambda);
    }
    return z;
}

// ---- prox oracle ----------------------------------------------------------

/// Minimizes ½(σ − t)² + λt over t ≥ 0 by successively refined grid search.
inline double grid_shrink(double sigma, double lambda) {
    auto f = [&](double t) { return 0.5 * (sigma - t) * (sigma - t) + lambda * t; };
    double lo = 0.0, hi = std::max(sigma, 1e-12);
    double best = 0.0;
    for (int round = 0; round < 8; ++round) {
        const int steps = 400;
        double best_f = std::numeric_limits<double>::infinity();
        for (int s = 0; s <= steps; ++s) {
            const double t = lo + (hi - lo) * s / steps;
            if (f(t) < best_f) {
                best_f = f(t);
                best = t;
            }
        }
        const double h = (hi - lo) / steps;
        lo = std::max(0.0, best - h);
        hi = best + h;
    }
    return best;
}

/// min over Z = U diag(t) Vᵀ in A's singular basis of ½||A − Z||² + λ||Z||_*.
/// Within that basis the objective separates per singular value.
inline double brute_prox_objective(const Matrix& a, double lambda) {
    const auto sigma = gram_singular_values(a);
    double total = 0.0;
    for (double s : sigma) {
        const double t = grid_shrink(s, lambda);
        total += 0.5 * (s - t) * (s - t) + lambda * t;
    }
    return total;
}

// ---- ridge oracle ---------------------------------------------------------

/// Solves (AᵀA + λI)β = Aᵀy by Gaussian elimination with partial pivoting.
inline std::vector<double> ridge_solve(const std::vector<std::vector<double>>& a, const std::vector<double>& y,
                                       double lambda) {
    const std::size_t r = a.empty() ? 0 : a.front().size();
    std::vector<std::vector<double>> m(r, std::vector<double>(r + 1, 0.0));
    for (std::size_t p = 0; p < r; ++p) {
        for (std::size_t q = 0; q < r; ++q) {
            for (std::size_t t = 0; t < a.size(); ++t) m[p][q] += a[t][p] * a[t][q];
            if (p == q) m[p][q] += lambda;
        }
        for (std::size_t t = 0; t < a.size(); ++t) m[p][r] += a[t][p] * y[t];
    }
    for (std::size_t c = 0; c < r; ++c) {
        std::size_t piv = c;
        for (std::size_t i = c + 1; i < r; ++i)
            if (std::abs(m[i][c]) > std::abs(m[piv][c])) piv = i;
        std::swap(m[c], m[piv]);
        if (m[c][c] == 0.0) throw std::runtime_error("ridge oracle: singular system");
        for (std::size_t i = 0; i < r; ++i) {
            if (i == c) continue;
            const double f = m[i][c] / m[c][c];
            for (std::size_t k = c; k <= r; ++k) m[i][k] -= f * m[c][k];
        }
    }
    std::vector<double> beta(r);
    for (std::size_t p = 0; p < r; ++p) beta[p] = m[p][r] / m[p][p];
    return beta;
}

// ---- KNN oracle -----------------------------------------------------------

/// Direct transcription of the imputation rule: masked Euclidean distance over
/// co-rated columns divided by √overlap, k nearest raters of the item, then
/// item mean and global mean fallbacks.
inline Matrix brute_knn(const RatingMatrix& x, std::size_t k) {
    const std::size_t m = x.rows(), n = x.cols();
    const auto inf = std::numeric_limits<double>::infinity();
    Matrix out = project_observed(x);
    double global = 0.0;
    std::size_t global_n = 0;
    std::vector<double> item_mean(n, 0.0);
    std::vector<std::size_t> item_n(n, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (x.is_observed(i, j)) {
                global += x(i, j);
                ++global_n;
                item_mean[j] += x(i, j);
                ++item_n[j];
            }
    global = global_n ? global / static_cast<double>(global_n) : 0.0;

    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> dist(m, inf);
        for (std::size_t u = 0; u < m; ++u) {
            if (u == i) continue;
            double s = 0.0;
            std::size_t overlap = 0;
            for (std::size_t j = 0; j < n; ++j)
                if (x.is_observed(i, j) && x.is_observed(u, j)) {
                    s += (x(i, j) - x(u, j)) * (x(i, j) - x(u, j));
                    ++overlap;
                }
            if (overlap) dist[u] = std::sqrt(s) / std::sqrt(static_cast<double>(overlap));
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (x.is_observed(i, j)) continue;
            std::vector<std::size_t> raters;
            for (std::size_t u = 0; u < m; ++u)
                if (u != i && x.is_observed(u, j) && dist[u] < inf) raters.push_back(u);
            if (!raters.empty()) {
                std::stable_sort(raters.begin(), raters.end(),
                                 [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
                const std::size_t take = std::min(k, raters.size());
                double s = 0.0;
                for (std::size_t t = 0; t < take; ++t) s += x(raters[t], j);
                out(i, j) = s / static_cast<double>(take);
            } else if (item_n[j] > 0) {
                out(i, j) = item_mean[j] / static_cast<double>(item_n[j]);
            } else {
                out(i, j) = global;
            }
        }
    }
    return out;
}

} // namespace gsi::test
