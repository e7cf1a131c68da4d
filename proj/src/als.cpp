#include "gsi/als.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "gsi/errors.hpp"
#include "gsi/kernels.hpp"

namespace gsi {

void AlsConfig::validate(std::size_t rows, std::size_t cols) const {
    if (rank < 1) throw ConfigError("als: rank must be >= 1");
    if (rank > std::min(rows, cols)) {
        std::ostringstream msg;
        msg << "als: rank " << rank << " exceeds min(" << rows << ", " << cols << ")";
        throw ConfigError(msg.str());
    }
    if (!(reg_lambda >= 0.0)) throw ConfigError("als: reg_lambda must be >= 0");
    if (max_sweeps < 1) throw ConfigError("als: max_sweeps must be >= 1");
    if (!(tolerance > 0.0)) throw ConfigError("als: tolerance must be > 0");
}

Matrix predict(const FactorPair& factors) { return kernels::matmul(factors.user_factors, factors.item_factors.transposed()); }

double mf_objective(const RatingMatrix& x, const FactorPair& factors, double reg_lambda) {
    const auto& u = factors.user_factors;
    const auto& v = factors.item_factors;
    double loss = 0.0;
    for (const auto& e : x.observed().entries()) {
        const double d = x(e.row, e.col) - dot(u.row(e.row), v.row(e.col));
        loss += d * d;
    }
    return loss + reg_lambda * (squared_frobenius(u) + squared_frobenius(v));
}

AlsResult als_fit(const RatingMatrix& x, const AlsConfig& config, const HalfSweepObserver& observer) {
    config.validate(x.rows(), x.cols());
    const std::size_t r = config.rank;

    AlsResult result;
    auto& u = result.factors.user_factors;
    auto& v = result.factors.item_factors;
    u = Matrix(x.rows(), r);
    v = Matrix(x.cols(), r);
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(r)));
    for (auto& e : v.values()) e = normal(rng);

    double previous = mf_objective(x, result.factors, config.reg_lambda);
    result.objective_trace.push_back(previous);
    for (std::size_t sweep = 0; sweep < config.max_sweeps; ++sweep) {
        auto s1 = kernels::ridge_half_sweep(x, true, v, config.reg_lambda, u);
        if (observer) observer({sweep, true, v, u});
        result.objective_trace.push_back(mf_objective(x, result.factors, config.reg_lambda));

        auto s2 = kernels::ridge_half_sweep(x, false, u, config.reg_lambda, v);
        if (observer) observer({sweep, false, u, v});
        const double current = mf_objective(x, result.factors, config.reg_lambda);
        result.objective_trace.push_back(current);

        result.used_pseudo_inverse |= s1.pseudo_inverse_solves + s2.pseudo_inverse_solves > 0;
        result.sweeps = sweep + 1;
        const double scale = std::max(previous, std::numeric_limits<double>::min());
        if (std::abs(previous - current) / scale < config.tolerance) {
            result.converged = true;
            break;
        }
        previous = current;
    }
    return result;
}

} // namespace gsi
