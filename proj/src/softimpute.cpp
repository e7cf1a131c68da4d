#include "gsi/softimpute.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "gsi/errors.hpp"

namespace gsi {

void SoftImputeConfig::validate() const {
    if (grid_size < 1) throw ConfigError("soft-impute: grid_size must be >= 1");
    if (!(lambda_min > 0.0)) throw ConfigError("soft-impute: lambda_min must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("soft-impute: epsilon must be > 0");
    if (max_iters < 1) throw ConfigError("soft-impute: max_iters must be >= 1");
    if (!(rank_tolerance > 0.0)) throw ConfigError("soft-impute: rank_tolerance must be > 0");
    if (!(init_scale >= 0.0)) throw ConfigError("soft-impute: init_scale must be >= 0");
}

std::size_t SoftImputePath::total_iterations() const {
    std::size_t total = 0;
    for (const auto& t : traces) total += t.iterations;
    return total;
}

std::vector<double> geometric_grid(double lambda_max, double lambda_min, std::size_t size) {
    if (size == 0) throw ConfigError("lambda grid: size must be >= 1");
    if (!(lambda_max > 0.0)) throw ConfigError("lambda grid: lambda_max must be > 0");
    if (size == 1) return {lambda_max};
    if (!(lambda_min > 0.0) || !(lambda_max > lambda_min)) {
        std::ostringstream msg;
        msg << "lambda grid: need lambda_max (" << lambda_max << ") > lambda_min (" << lambda_min << ") > 0";
        throw ConfigError(msg.str());
    }
    std::vector<double> grid(size);
    const double log_ratio = std::log(lambda_min / lambda_max);
    for (std::size_t i = 0; i < size; ++i)
        grid[i] = lambda_max * std::exp(log_ratio * static_cast<double>(i) / static_cast<double>(size - 1));
    grid.front() = lambda_max;
    grid.back() = lambda_min;
    return grid;
}

std::vector<double> lambda_grid(const RatingMatrix& x, const SoftImputeConfig& config) {
    config.validate();
    const Matrix observed = project_observed(x);
    if (max_abs(observed) == 0.0) throw DegenerateInputError("lambda grid: observed matrix is all zero");
    const double sigma_max = svd(observed).sigma.front();
    return geometric_grid(sigma_max, config.lambda_min, config.grid_size);
}

double completion_objective(const RatingMatrix& x, const Matrix& z, double lambda) {
    double loss = 0.0;
    for (const auto& e : x.observed().entries()) {
        const double d = x(e.row, e.col) - z(e.row, e.col);
        loss += d * d;
    }
    return 0.5 * loss + lambda * nuclear_norm(z);
}

SoftImputeResult soft_impute(const RatingMatrix& x, double lambda, const Matrix& z_init,
                             const SoftImputeConfig& config) {
    config.validate();
    if (!(lambda >= 0.0)) throw ConfigError("soft_impute: lambda must be >= 0");
    if (z_init.rows() != x.rows() || z_init.cols() != x.cols()) throw ConfigError("soft_impute: z_init shape mismatch");
    for (double v : z_init.values())
        if (!std::isfinite(v)) throw ConfigError("soft_impute: z_init has non-finite entries");

    const auto& omega = x.observed();
    const auto observed_values = x.values().values();

    SoftImputeResult result;
    Matrix z_old = z_init;
    Matrix filled(x.rows(), x.cols());
    for (std::size_t it = 0; it < config.max_iters; ++it) {
        // P_Ω(X) + P_Ω⊥(Z_old)
        auto src = z_old.values();
        auto dst = filled.values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = omega.contains_flat(k) ? observed_values[k] : src[k];

        result.solution = soft_threshold_svd(filled, lambda, config.rank_tolerance);

        double change = 0.0;
        double base = 0.0;
        const auto znew = result.solution.z.values();
        for (std::size_t k = 0; k < znew.size(); ++k) {
            const double d = znew[k] - src[k];
            change += d * d;
            base += src[k] * src[k];
        }
        const double err = base > 0.0 ? change / base : change;
        result.trace.relative_errors.push_back(err);
        result.trace.iterations = it + 1;
        if (err < config.epsilon) {
            result.trace.converged = true;
            break;
        }
        z_old = result.solution.z;
    }
    if (result.trace.iterations >= 5) {
        try {
            result.trace.estimated_rho = estimate_contraction_rate(result.trace);
        } catch (const InsufficientDataError&) {
        }
    }
    return result;
}

Matrix random_start(std::size_t rows, std::size_t cols, const SoftImputeConfig& config) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(rows, cols);
    for (auto& v : z.values()) v = config.init_scale * normal(rng);
    return z;
}

SoftImputePath soft_impute_path(const RatingMatrix& x, const SoftImputeConfig& config) {
    const auto grid = lambda_grid(x, config);
    return soft_impute_path(x, grid, config, true);
}

SoftImputePath soft_impute_path(const RatingMatrix& x, std::span<const double> lambdas,
                                const SoftImputeConfig& config, bool warm_start) {
    config.validate();
    if (lambdas.empty()) throw ConfigError("soft_impute_path: empty lambda list");
    std::vector<double> order(lambdas.begin(), lambdas.end());
    for (double l : order)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("soft_impute_path: lambdas must be finite and >= 0");
    std::sort(order.begin(), order.end(), std::greater<>());
    order.erase(std::unique(order.begin(), order.end()), order.end());

    SoftImputePath path;
    path.lambdas = order;
    const Matrix start = random_start(x.rows(), x.cols(), config);
    const Matrix* init = &start;
    for (double lambda : order) {
        auto r = soft_impute(x, lambda, *init, config);
        path.solutions.push_back(std::move(r.solution));
        path.traces.push_back(std::move(r.trace));
        if (warm_start) init = &path.solutions.back().z;
    }
    return path;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InsufficientDataError("fit_line: need at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw InsufficientDataError("fit_line: x values are all equal");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
    return fit;
}

double estimate_contraction_rate(const ConvergenceTrace& trace) {
    const auto& e = trace.relative_errors;
    if (e.size() < 5) throw InsufficientDataError("contraction rate: need at least 5 iterations");
    std::vector<double> xs, ys;
    for (std::size_t k = e.size() / 2; k < e.size(); ++k) {
        if (!(e[k] > 0.0)) continue;
        xs.push_back(static_cast<double>(k));
        ys.push_back(std::log(e[k]));
    }
    if (xs.size() < 2) throw InsufficientDataError("contraction rate: too few non-zero errors in the tail");
    return std::exp(fit_line(xs, ys).slope);
}

} // namespace gsi
