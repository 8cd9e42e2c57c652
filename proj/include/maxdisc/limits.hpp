#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "maxdisc/errors.hpp"
#include "maxdisc/model.hpp"
#include "maxdisc/quadrature.hpp"

namespace maxdisc {

/// Lattice table of the joint continuous/grid constant H_{d,alpha}^{x,y}
/// with bilinear interpolation inside the lattice and the
/// inclusion-exclusion bound min(e^{-x} H_alpha, e^{-y} H_{d,alpha})
/// outside (the bound is the exact limit on each axis).
struct HTable {
    double x0 = -3.0;
    double y0 = -3.0;
    double pitch = 0.25;
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<double> values;   // row-major, values[ix * ny + iy]
    std::vector<double> stderrs;  // same layout
    double h_alpha = 1.0;
    double h_d_alpha = 1.0;

    double cell(std::size_t ix, std::size_t iy) const { return values[ix * ny + iy]; }

    double bound(double x, double y) const {
        return std::min(std::exp(-x) * h_alpha, std::exp(-y) * h_d_alpha);
    }

    /// Clamps every cell into [0, bound(x,y)] and restores the cell-wise
    /// monotonicity (nonincreasing in x and in y) that Monte-Carlo noise
    /// can break. bound() itself is nonincreasing in both coordinates,
    /// so clamping first keeps the sweep consistent.
    void enforce_shape() {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double x = x0 + static_cast<double>(ix) * pitch;
            for (std::size_t iy = 0; iy < ny; ++iy) {
                const double y = y0 + static_cast<double>(iy) * pitch;
                double& v = values[ix * ny + iy];
                v = std::clamp(v, 0.0, bound(x, y));
                if (ix > 0) v = std::min(v, cell(ix - 1, iy));
                if (iy > 0) v = std::min(v, cell(ix, iy - 1));
            }
        }
    }

    double eval(double x, double y) const {
        if (nx < 2 || ny < 2) return bound(x, y);
        const double fx = (x - x0) / pitch;
        const double fy = (y - y0) / pitch;
        if (fx < 0.0 || fy < 0.0 || fx > static_cast<double>(nx - 1) ||
            fy > static_cast<double>(ny - 1))
            return bound(x, y);
        const auto ix = std::min(nx - 2, static_cast<std::size_t>(fx));
        const auto iy = std::min(ny - 2, static_cast<std::size_t>(fy));
        const double tx = fx - static_cast<double>(ix);
        const double ty = fy - static_cast<double>(iy);
        return (1.0 - tx) * (1.0 - ty) * cell(ix, iy) +
               tx * (1.0 - ty) * cell(ix + 1, iy) +
               (1.0 - tx) * ty * cell(ix, iy + 1) + tx * ty * cell(ix + 1, iy + 1);
    }
};

namespace detail {

inline void check_dims(const VectorCorrelationModel& model, const std::vector<double>& x,
                       const std::vector<double>& y) {
    if (x.size() != model.dim() || y.size() != model.dim())
        throw DimensionMismatch("argument vectors must have length p");
}

inline double mixture_factor(const ComponentParams& comp, double z) {
    return std::exp(-comp.r_diag + std::sqrt(2.0 * comp.r_diag) * z);
}

}  // namespace detail

/// Sparse-grid exponent: sum of e^{-x_k - r_kk + sqrt(2 r_kk) Z_k} and
/// the same with y_k.
inline double f_exponent(const std::vector<double>& x, const std::vector<double>& y,
                         const Eigen::VectorXd& z, const VectorCorrelationModel& model) {
    detail::check_dims(model, x, y);
    double total = 0.0;
    for (std::size_t k = 0; k < model.dim(); ++k) {
        const double mix =
            detail::mixture_factor(model.component(k), z(static_cast<Eigen::Index>(k)));
        total += (std::exp(-x[k]) + std::exp(-y[k])) * mix;
    }
    return total;
}

/// Dense-grid exponent: sum of e^{-min(x_k, y_k) - r_kk + sqrt(2 r_kk) Z_k}.
inline double h_exponent(const std::vector<double>& x, const std::vector<double>& y,
                         const Eigen::VectorXd& z, const VectorCorrelationModel& model) {
    detail::check_dims(model, x, y);
    double total = 0.0;
    for (std::size_t k = 0; k < model.dim(); ++k) {
        const double mix =
            detail::mixture_factor(model.component(k), z(static_cast<Eigen::Index>(k)));
        total += std::exp(-std::min(x[k], y[k])) * mix;
    }
    return total;
}

/// Pickands-grid exponent. The joint constant is evaluated at the
/// shifted arguments (ln H_alpha + x_k, ln H_{d,alpha} + y_k); a table
/// violating the inclusion-exclusion bound makes a term negative and
/// is rejected.
inline double g_exponent(const std::vector<double>& x, const std::vector<double>& y,
                         const Eigen::VectorXd& z, const VectorCorrelationModel& model,
                         double h_alpha, double h_d_alpha,
                         const std::function<double(double, double)>& h_xy_eval) {
    detail::check_dims(model, x, y);
    const double log_h_alpha = std::log(h_alpha);
    const double log_h_d = std::log(h_d_alpha);
    double total = 0.0;
    for (std::size_t k = 0; k < model.dim(); ++k) {
        const double joint = h_xy_eval(log_h_alpha + x[k], log_h_d + y[k]);
        double bracket = std::exp(-x[k]) + std::exp(-y[k]) - joint;
        if (bracket < 0.0) {
            if (bracket < -1e-12)
                throw NegativeExponent(
                    "H^{x,y} table violates the inclusion-exclusion bound");
            bracket = 0.0;
        }
        total += bracket * detail::mixture_factor(model.component(k),
                                                  z(static_cast<Eigen::Index>(k)));
    }
    return total;
}

enum class LimitRegime { Sparse, Pickands, Dense, CorollaryMarginal };

/// Everything needed to evaluate one theoretical limit distribution.
struct LimitSpec {
    LimitRegime regime = LimitRegime::Sparse;
    const VectorCorrelationModel* model = nullptr;
    double h_alpha = 1.0;            // Pickands regime only
    double h_d_alpha = 1.0;          // Pickands regime only
    const HTable* h_table = nullptr;  // Pickands regime only
};

struct LimitValue {
    double value = 0.0;
    double error = 0.0;
};

struct LimitOptions {
    std::size_t quadrature_nodes = 64;  // per axis, tensor rule (rank <= 3)
    std::size_t qmc_draws = 1 << 20;    // rank > 3
    bool allow_qmc = true;
};

namespace detail {

inline double limit_exponent(const LimitSpec& spec, const std::vector<double>& x,
                             const std::vector<double>& y, const Eigen::VectorXd& z) {
    switch (spec.regime) {
        case LimitRegime::Sparse:
            return f_exponent(x, y, z, *spec.model);
        case LimitRegime::Dense:
            return h_exponent(x, y, z, *spec.model);
        case LimitRegime::CorollaryMarginal:
            return h_exponent(x, x, z, *spec.model);
        case LimitRegime::Pickands: {
            if (!spec.h_table) throw MissingConstant("Pickands limit needs an H table");
            const HTable* table = spec.h_table;
            return g_exponent(x, y, z, *spec.model, spec.h_alpha, spec.h_d_alpha,
                              [table](double xs, double ys) { return table->eval(xs, ys); });
        }
    }
    return 0.0;
}

/// E[exp(-exponent(L u))] over u ~ N(0, I_rank) by a tensor
/// Gauss-Hermite rule of the given order.
inline double gh_expectation(const LimitSpec& spec, const std::vector<double>& x,
                             const std::vector<double>& y, std::size_t order) {
    const auto& factor = spec.model->latent_factor();
    const auto rank = static_cast<std::size_t>(factor.cols());
    const GaussHermiteRule rule = gauss_hermite_normal(order);
    std::vector<std::size_t> index(rank, 0);
    Eigen::VectorXd u(static_cast<Eigen::Index>(rank));
    double total = 0.0;
    while (true) {
        double weight = 1.0;
        for (std::size_t d = 0; d < rank; ++d) {
            u(static_cast<Eigen::Index>(d)) = rule.nodes[index[d]];
            weight *= rule.weights[index[d]];
        }
        total += weight * std::exp(-limit_exponent(spec, x, y, factor * u));
        std::size_t d = 0;
        for (; d < rank; ++d) {
            if (++index[d] < order) break;
            index[d] = 0;
        }
        if (d == rank) break;
    }
    return total;
}

}  // namespace detail

/// Theoretical limiting probability P-limit at (x, y): the expectation
/// over the latent Gaussian vector of exp(-f/g/h). Nondecreasing in
/// every coordinate by construction.
inline LimitValue limit_cdf(const LimitSpec& spec, const std::vector<double>& x,
                            const std::vector<double>& y,
                            const LimitOptions& options = {}) {
    if (spec.model == nullptr) throw Error("limit_cdf: missing model");
    const auto rank = spec.model->latent_rank();

    // No component carries latent weight: the expectation is degenerate.
    bool any_weight = false;
    for (const auto& comp : spec.model->components())
        if (comp.r_diag > 0.0) any_weight = true;
    if (!any_weight || rank == 0) {
        const double value =
            std::exp(-detail::limit_exponent(spec, x, y, Eigen::VectorXd::Zero(
                                                             static_cast<Eigen::Index>(
                                                                 spec.model->dim()))));
        return {value, 0.0};
    }

    if (rank <= 3) {
        const std::size_t order = std::max<std::size_t>(options.quadrature_nodes, 8);
        const double fine = detail::gh_expectation(spec, x, y, order);
        const double coarse = detail::gh_expectation(spec, x, y, order / 2);
        return {fine, std::abs(fine - coarse)};
    }

    if (!options.allow_qmc)
        throw QuadratureUnavailable("latent rank > 3 and Monte Carlo disabled");
    if (rank > small_primes().size())
        throw QuadratureUnavailable("latent rank exceeds QMC dimension budget");

    const std::size_t draws = std::max<std::size_t>(options.qmc_draws, 1u << 20);
    const std::size_t blocks = 16;
    const std::size_t per_block = draws / blocks;
    const auto& factor = spec.model->latent_factor();
    Eigen::VectorXd u(static_cast<Eigen::Index>(rank));
    double grand = 0.0, block_sq = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        double block_sum = 0.0;
        for (std::size_t i = 0; i < per_block; ++i) {
            const std::size_t idx = b * per_block + i + 1;
            for (std::size_t d = 0; d < rank; ++d)
                u(static_cast<Eigen::Index>(d)) =
                    inverse_normal_cdf(halton(idx, small_primes()[d]));
            block_sum += std::exp(-detail::limit_exponent(spec, x, y, factor * u));
        }
        const double block_mean = block_sum / static_cast<double>(per_block);
        grand += block_mean;
        block_sq += block_mean * block_mean;
        used += per_block;
    }
    const double mean = grand / static_cast<double>(blocks);
    const double var =
        std::max(0.0, block_sq / static_cast<double>(blocks) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(blocks))};
}

}  // namespace maxdisc
