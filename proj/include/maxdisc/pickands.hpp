#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "maxdisc/errors.hpp"
#include "maxdisc/limits.hpp"
#include "maxdisc/rng.hpp"
#include "maxdisc/sampler.hpp"

namespace maxdisc {

/// Monte-Carlo estimate of a Pickands-type constant.
struct PickandsEstimate {
    double value = 0.0;
    double stderr_value = 0.0;  // error bar from the log-scale delta method
    double lambda = 0.0;
    double mesh = 0.0;
    std::size_t reps = 0;
};

/// Per-replication maxima of the drifted field sqrt(2) B_{alpha/2}(t) - t^alpha
/// over the fine mesh (m_cont) and over the d-grid (m_grid) on [0, lambda].
/// All estimators below read off one such batch, which is what makes the
/// path-wise inequalities exact rather than statistical.
struct DriftedMaximaBatch {
    MeshSpec mesh;
    double lambda = 0.0;
    double d = 0.0;                // 0 when no grid was requested
    std::vector<double> m_cont;    // one entry per replication
    std::vector<double> m_grid;    // empty when d == 0
};

namespace detail {

inline MeshSpec pickands_mesh(double lambda, double d, double mesh_h) {
    if (!(lambda > 0.0)) throw Error("window length must be positive");
    if (mesh_h <= 0.0) mesh_h = d > 0.0 ? std::min(0.01, d / 8.0) : 0.01;
    if (mesh_h > 0.01 + 1e-12)
        throw MeshTooCoarse("fBm mesh step must not exceed 0.01");
    if (d > 0.0) {
        // Make d an exact multiple of the step so the grid maximum is an
        // exact sub-read of the fine path.
        const auto stride = static_cast<std::size_t>(std::ceil(d / mesh_h - 1e-9));
        const double h = d / static_cast<double>(stride);
        const auto n = static_cast<std::size_t>(std::llround(lambda / h)) + 1;
        return MeshSpec{h, n};
    }
    return MeshSpec::for_horizon(lambda, mesh_h);
}

}  // namespace detail

inline DriftedMaximaBatch sample_drifted_maxima(double alpha, double d, double lambda,
                                                double mesh_h, std::size_t reps,
                                                std::uint64_t seed) {
    if (!(alpha > 0.0) || alpha > 2.0)
        throw AlphaOutOfRange("alpha must lie in (0,2]");
    DriftedMaximaBatch batch;
    batch.mesh = detail::pickands_mesh(lambda, d, mesh_h);
    batch.lambda = batch.mesh.horizon();
    batch.d = d;

    std::size_t stride = 0;
    if (d > 0.0) {
        stride = static_cast<std::size_t>(std::llround(d / batch.mesh.h));
        if (std::abs(static_cast<double>(stride) * batch.mesh.h - d) > 1e-9 * d)
            throw DNotOnMesh("grid spacing d is not a mesh multiple");
    }

    FbmSampler fbm(alpha / 2.0, batch.mesh);
    const double sqrt2 = std::sqrt(2.0);
    std::vector<double> drift(batch.mesh.n);
    for (std::size_t j = 0; j < batch.mesh.n; ++j)
        drift[j] = std::pow(static_cast<double>(j) * batch.mesh.h, alpha);

    batch.m_cont.resize(reps);
    if (stride > 0) batch.m_grid.resize(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto path = fbm.sample(derive_seed(seed, stream_tag::fbm, rep));
        double m_cont = 0.0;  // the t = 0 point contributes exactly 0
        for (std::size_t j = 1; j < path.size(); ++j)
            m_cont = std::max(m_cont, sqrt2 * path[j] - drift[j]);
        batch.m_cont[rep] = m_cont;
        if (stride > 0) {
            double m_grid = 0.0;
            for (std::size_t j = stride; j < path.size(); j += stride)
                m_grid = std::max(m_grid, sqrt2 * path[j] - drift[j]);
            batch.m_grid[rep] = m_grid;
        }
    }
    return batch;
}

namespace detail {

/// mean(exp(values - shift)) / lambda with a log-scale error bar.
inline PickandsEstimate window_estimate(const std::vector<double>& maxima, double shift,
                                        double lambda, double mesh_h) {
    PickandsEstimate est;
    est.lambda = lambda;
    est.mesh = mesh_h;
    est.reps = maxima.size();
    if (maxima.empty()) throw Error("window_estimate: no replications");
    double sum = 0.0, log_sum = 0.0, log_sq = 0.0;
    for (double m : maxima) {
        sum += std::exp(m - shift);
        log_sum += m;
        log_sq += m * m;
    }
    const auto n = static_cast<double>(maxima.size());
    est.value = sum / n / lambda;
    const double log_mean = log_sum / n;
    const double log_var = std::max(0.0, log_sq / n - log_mean * log_mean);
    est.stderr_value = est.value * std::sqrt(log_var / n);
    return est;
}

}  // namespace detail

/// H_alpha(lambda)/lambda = E[exp(max_{[0,lambda]} (sqrt(2) B_{alpha/2} - t^alpha))]/lambda.
inline PickandsEstimate estimate_H_alpha(double alpha, double lambda, double mesh_h,
                                         std::size_t reps, std::uint64_t seed) {
    const auto batch = sample_drifted_maxima(alpha, 0.0, lambda, mesh_h, reps, seed);
    return detail::window_estimate(batch.m_cont, 0.0, batch.lambda, batch.mesh.h);
}

/// Grid analogue on the d-grid {0, d, 2d, ...} within [0, lambda].
inline PickandsEstimate estimate_H_d_alpha(double alpha, double d, double lambda,
                                           std::size_t reps, std::uint64_t seed,
                                           double mesh_h = 0.0) {
    if (!(d > 0.0)) throw Error("estimate_H_d_alpha: d must be positive");
    const auto batch = sample_drifted_maxima(alpha, d, lambda, mesh_h, reps, seed);
    return detail::window_estimate(batch.m_grid, 0.0, batch.lambda, batch.mesh.h);
}

/// Joint constant via the path-wise identity
///   integral e^s 1{M_c > s+x, M_g > s+y} ds = exp(min(M_c - x, M_g - y)).
inline PickandsEstimate estimate_H_xy(double alpha, double d, double x, double y,
                                      double lambda, double mesh_h, std::size_t reps,
                                      std::uint64_t seed) {
    if (!(d > 0.0)) throw Error("estimate_H_xy: d must be positive");
    const auto batch = sample_drifted_maxima(alpha, d, lambda, mesh_h, reps, seed);
    std::vector<double> mins(reps);
    for (std::size_t rep = 0; rep < reps; ++rep)
        mins[rep] = std::min(batch.m_cont[rep] - x, batch.m_grid[rep] - y);
    return detail::window_estimate(mins, 0.0, batch.lambda, batch.mesh.h);
}

/// Finite-window estimates at each lambda plus the 1/lambda-extrapolated
/// intercept. Windows share paths: every lambda is a prefix read of the
/// largest window.
struct ExtrapolatedConstant {
    PickandsEstimate extrapolated;          // lambda field holds the largest window
    std::vector<PickandsEstimate> windows;  // one per requested lambda
    double fit_residual = 0.0;
};

namespace detail {

/// Weighted least squares of v = intercept + slope / lambda.
inline void fit_inverse_lambda(const std::vector<PickandsEstimate>& windows,
                               double& intercept, double& intercept_se,
                               double& residual) {
    double s_w = 0, s_wx = 0, s_wxx = 0, s_wy = 0, s_wxy = 0;
    for (const auto& est : windows) {
        const double w = 1.0 / std::max(1e-300, est.stderr_value * est.stderr_value);
        const double inv_lambda = 1.0 / est.lambda;
        s_w += w;
        s_wx += w * inv_lambda;
        s_wxx += w * inv_lambda * inv_lambda;
        s_wy += w * est.value;
        s_wxy += w * inv_lambda * est.value;
    }
    const double det = s_w * s_wxx - s_wx * s_wx;
    intercept = (s_wxx * s_wy - s_wx * s_wxy) / det;
    const double slope = (s_w * s_wxy - s_wx * s_wy) / det;
    intercept_se = std::sqrt(s_wxx / det);
    residual = 0.0;
    for (const auto& est : windows)
        residual = std::max(residual,
                            std::abs(est.value - intercept - slope / est.lambda));
}

}  // namespace detail

inline ExtrapolatedConstant extrapolate_H_alpha(double alpha,
                                                const std::vector<double>& lambdas,
                                                double mesh_h, std::size_t reps,
                                                std::uint64_t seed) {
    if (lambdas.size() < 2) throw Error("extrapolation needs at least two windows");
    if (!(alpha > 0.0) || alpha > 2.0)
        throw AlphaOutOfRange("alpha must lie in (0,2]");
    std::vector<double> sorted_lambdas = lambdas;
    std::sort(sorted_lambdas.begin(), sorted_lambdas.end());
    const double lambda_max = sorted_lambdas.back();
    const MeshSpec mesh = detail::pickands_mesh(lambda_max, 0.0, mesh_h);

    // Window prefix maxima, one pass per replication: every window is a
    // prefix read of the largest one (shared paths).
    FbmSampler fbm(alpha / 2.0, mesh);
    const double sqrt2 = std::sqrt(2.0);
    std::vector<std::size_t> cut(sorted_lambdas.size());
    for (std::size_t i = 0; i < sorted_lambdas.size(); ++i)
        cut[i] = std::min<std::size_t>(
            mesh.n - 1,
            static_cast<std::size_t>(std::llround(sorted_lambdas[i] / mesh.h)));

    std::vector<std::vector<double>> window_max(sorted_lambdas.size(),
                                                std::vector<double>(reps));
    std::vector<double> drift(mesh.n);
    for (std::size_t j = 0; j < mesh.n; ++j)
        drift[j] = std::pow(static_cast<double>(j) * mesh.h, alpha);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto path = fbm.sample(derive_seed(seed, stream_tag::fbm, rep));
        double running = 0.0;
        std::size_t j = 1;
        for (std::size_t i = 0; i < sorted_lambdas.size(); ++i) {
            for (; j <= cut[i]; ++j)
                running = std::max(running, sqrt2 * path[j] - drift[j]);
            window_max[i][rep] = running;
        }
    }

    ExtrapolatedConstant out;
    for (std::size_t i = 0; i < sorted_lambdas.size(); ++i)
        out.windows.push_back(detail::window_estimate(
            window_max[i], 0.0, static_cast<double>(cut[i]) * mesh.h, mesh.h));
    double intercept, intercept_se;
    detail::fit_inverse_lambda(out.windows, intercept, intercept_se, out.fit_residual);
    out.extrapolated.value = intercept;
    out.extrapolated.stderr_value = intercept_se;
    out.extrapolated.lambda = lambda_max;
    out.extrapolated.mesh = mesh.h;
    out.extrapolated.reps = reps;
    return out;
}

// ---------------------------------------------------------------------
// Tilted ("random shift") estimators.
//
// The window estimators above average exp(M) directly. That average is
// heavy-tailed: P(M > m) decays like e^{-m} up to m of order lambda, so
// every unit of m contributes equally to E[exp(M)] while a sample of
// size N only observes maxima up to about ln N. Beyond lambda ~ 10 the
// plain mean is therefore biased far below the truth no matter what the
// sample variance claims. Re-centering the path at a tilted location
// (the change of measure of Dieker & Yakir 2014) replaces exp(M) by a
// bounded ratio with the same expectation structure:
//
//   H_{eta,alpha} = (1/eta) E[ max_u e^{zeta(u)} / sum_u e^{zeta(u)} ],
//     u over the two-sided mesh eta*Z within [-S, S],
//     zeta(u) = sqrt(2) B_{alpha/2}(u) - |u|^alpha,
//
// and analogously on the d-grid for H_{d,alpha}. The joint constant
// follows from tilting the combined continuous+grid field at each of
// its points: with s = x - y,
//
//   H^{x,y} = e^{-x} [H_eta - U(s)] + e^{-y} [H_d - V(s)],
//   U(s) = (1/eta) avg_phase E[ max(F, e^s M_r) / (Sf + e^s S_r) ],
//   V(s) = (1/d) E[ max(e^{-s} F, M_*) / (e^{-s} Sf + S_*) ],
//
// where F/Sf are the max/sum of e^{zeta} over the fine mesh, M_r/S_r
// the same over the grid residue class at the tilt phase, and * the
// class containing u = 0. All ratios lie in (0, 1], so ordinary Monte
// Carlo converges at the standard 1/sqrt(reps) rate.
// ---------------------------------------------------------------------

namespace detail {

/// Two-sided drifted field e^{zeta(u)} on {-half*h, ..., half*h}.
/// Increments of two-sided fBm over a uniform mesh are one stationary
/// fGn sequence, so one circulant draw covers the whole window.
class TwoSidedDriftedField {
public:
    TwoSidedDriftedField(double alpha, double h, std::size_t half)
        : alpha_(alpha), h_(h), half_(half), weights_(2 * half + 1),
          drift_(2 * half + 1) {
        if (!(alpha > 0.0) || alpha > 2.0)
            throw AlphaOutOfRange("alpha must lie in (0,2]");
        if (!(h > 0.0) || half == 0) throw Error("two-sided field: empty window");
        for (std::size_t j = 0; j < drift_.size(); ++j) {
            const double u = (static_cast<double>(j) - static_cast<double>(half)) * h;
            drift_[j] = std::pow(std::abs(u), alpha);
        }
        if (alpha < 2.0)
            increments_ = std::make_unique<SpectralSampler>(
                fgn_table(alpha / 2.0, MeshSpec{h, 2 * half + 1}));
    }

    std::size_t half() const { return half_; }
    double step() const { return h_; }

    const std::vector<double>& sample(std::uint64_t seed) {
        const std::size_t n = weights_.size();
        const double sqrt2 = std::sqrt(2.0);
        if (!increments_) {  // alpha = 2: B(t) = t N(0,1) exactly
            Xoshiro256 rng(seed);
            const double slope = sqrt2 * rng.normal();
            for (std::size_t j = 0; j < n; ++j) {
                const double u =
                    (static_cast<double>(j) - static_cast<double>(half_)) * h_;
                weights_[j] = std::exp(slope * u - drift_[j]);
            }
            return weights_;
        }
        increments_->sample_pair(seed, inc_a_, inc_b_);
        weights_[half_] = 1.0;  // zeta(0) = 0
        double acc = 0.0;
        for (std::size_t j = half_ + 1; j < n; ++j) {
            acc += inc_a_[j - 1];
            weights_[j] = std::exp(sqrt2 * acc - drift_[j]);
        }
        acc = 0.0;
        for (std::size_t j = half_; j-- > 0;) {
            acc -= inc_a_[j];
            weights_[j] = std::exp(sqrt2 * acc - drift_[j]);
        }
        return weights_;
    }

private:
    double alpha_;
    double h_;
    std::size_t half_;
    std::vector<double> weights_;
    std::vector<double> drift_;
    std::unique_ptr<SpectralSampler> increments_;
    std::vector<double> inc_a_, inc_b_;
};

inline PickandsEstimate moments_to_estimate(double sum, double sum_sq, std::size_t reps,
                                            double window, double mesh_h) {
    PickandsEstimate est;
    est.lambda = window;
    est.mesh = mesh_h;
    est.reps = reps;
    const auto n = static_cast<double>(reps);
    est.value = sum / n;
    const double var = std::max(0.0, sum_sq / n - est.value * est.value);
    est.stderr_value = std::sqrt(var / n);
    return est;
}

}  // namespace detail

/// Tilted estimate of H_alpha at mesh resolution mesh_h (the constant
/// of the mesh_h-discretised maximum; the continuum constant is the
/// mesh_h -> 0 limit).
inline PickandsEstimate estimate_H_alpha_tilted(double alpha, double window,
                                                double mesh_h, std::size_t reps,
                                                std::uint64_t seed) {
    if (mesh_h <= 0.0) mesh_h = 0.01;
    if (reps == 0) throw Error("estimate_H_alpha_tilted: no replications");
    const auto half = static_cast<std::size_t>(std::ceil(window / mesh_h - 1e-9));
    detail::TwoSidedDriftedField field(alpha, mesh_h, half);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& w = field.sample(derive_seed(seed, stream_tag::fbm, rep));
        double peak = 0.0, total = 0.0;
        for (double v : w) {
            peak = std::max(peak, v);
            total += v;
        }
        const double ratio = peak / (total * mesh_h);
        sum += ratio;
        sum_sq += ratio * ratio;
    }
    return detail::moments_to_estimate(sum, sum_sq, reps, window, mesh_h);
}

/// Tilted estimate of the grid constant H_{d,alpha}; the field is
/// sampled exactly at the grid points, so there is no mesh error.
inline PickandsEstimate estimate_H_d_alpha_tilted(double alpha, double d, double window,
                                                  std::size_t reps, std::uint64_t seed) {
    if (!(d > 0.0)) throw Error("estimate_H_d_alpha_tilted: d must be positive");
    if (reps == 0) throw Error("estimate_H_d_alpha_tilted: no replications");
    const auto half =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(window / d - 1e-9)));
    detail::TwoSidedDriftedField field(alpha, d, half);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& w = field.sample(derive_seed(seed, stream_tag::fbm, rep));
        double peak = 0.0, total = 0.0;
        for (double v : w) {
            peak = std::max(peak, v);
            total += v;
        }
        const double ratio = peak / (total * d);
        sum += ratio;
        sum_sq += ratio * ratio;
    }
    return detail::moments_to_estimate(sum, sum_sq, reps, window, d);
}

/// Tilted window estimates at each half-width plus the 1/window
/// extrapolated intercept. Windows share paths: every window is a
/// centered sub-read of the largest one.
inline ExtrapolatedConstant extrapolate_H_alpha_tilted(double alpha,
                                                       const std::vector<double>& windows,
                                                       double mesh_h, std::size_t reps,
                                                       std::uint64_t seed) {
    if (windows.size() < 2) throw Error("extrapolation needs at least two windows");
    if (mesh_h <= 0.0) mesh_h = 0.01;
    std::vector<double> sorted = windows;
    std::sort(sorted.begin(), sorted.end());
    const auto half_max =
        static_cast<std::size_t>(std::ceil(sorted.back() / mesh_h - 1e-9));
    std::vector<std::size_t> halves(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        halves[i] = std::min(half_max, static_cast<std::size_t>(
                                           std::ceil(sorted[i] / mesh_h - 1e-9)));

    detail::TwoSidedDriftedField field(alpha, mesh_h, half_max);
    std::vector<double> sum(sorted.size(), 0.0), sum_sq(sorted.size(), 0.0);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& w = field.sample(derive_seed(seed, stream_tag::fbm, rep));
        // Grow the window outward from the centre, reusing partial
        // max/sum between consecutive window sizes.
        double peak = w[half_max], total = w[half_max];
        std::size_t radius = 0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            for (; radius < halves[i]; ++radius) {
                const double lo = w[half_max - radius - 1];
                const double hi = w[half_max + radius + 1];
                peak = std::max(peak, std::max(lo, hi));
                total += lo + hi;
            }
            const double ratio = peak / (total * mesh_h);
            sum[i] += ratio;
            sum_sq[i] += ratio * ratio;
        }
    }

    ExtrapolatedConstant out;
    for (std::size_t i = 0; i < sorted.size(); ++i)
        out.windows.push_back(
            detail::moments_to_estimate(sum[i], sum_sq[i], reps, sorted[i], mesh_h));
    double intercept, intercept_se;
    detail::fit_inverse_lambda(out.windows, intercept, intercept_se, out.fit_residual);
    out.extrapolated.value = intercept;
    out.extrapolated.stderr_value = intercept_se;
    out.extrapolated.lambda = sorted.back();
    out.extrapolated.mesh = mesh_h;
    out.extrapolated.reps = reps;
    return out;
}

/// Result of an H^{x,y} lattice build, together with the matching
/// constants estimated on the same paths.
struct HTableBuild {
    HTable table;
    PickandsEstimate h_alpha;
    PickandsEstimate h_d_alpha;
};

/// Tilted build of the H^{x,y} lattice: one two-sided path batch, all
/// cells read off per replication through the phase-averaged ratio
/// identity above, which depends on (x, y) only through s = x - y and
/// the e^{-x}, e^{-y} prefactors.
inline HTableBuild build_H_table_tilted(double alpha, double d, double x_min,
                                        double x_max, double y_min, double y_max,
                                        double pitch, double window, std::size_t reps,
                                        std::uint64_t seed, double mesh_h = 0.0) {
    if (!(pitch > 0.0) || pitch > 0.25 + 1e-12)
        throw Error("build_H_table_tilted: lattice pitch must be positive and <= 0.25");
    if (!(d > 0.0)) throw Error("build_H_table_tilted: d must be positive");
    if (reps == 0) throw Error("build_H_table_tilted: no replications");
    if (mesh_h <= 0.0) mesh_h = std::min(0.01, d / 8.0);
    // Snap the step so the grid is an exact sub-mesh and the window an
    // exact multiple of d (the tilt class of u = 0 is then class 0).
    const auto stride =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(d / mesh_h - 1e-9)));
    const double h = d / static_cast<double>(stride);
    const auto blocks =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(window / d - 1e-9)));
    const std::size_t half = blocks * stride;
    const std::size_t n = 2 * half + 1;

    HTableBuild build;
    HTable& table = build.table;
    table.x0 = x_min;
    table.y0 = y_min;
    table.pitch = pitch;
    table.nx = static_cast<std::size_t>(std::llround((x_max - x_min) / pitch)) + 1;
    table.ny = static_cast<std::size_t>(std::llround((y_max - y_min) / pitch)) + 1;

    // Distinct values of s = x - y on the lattice.
    const std::size_t ns = table.nx + table.ny - 1;
    std::vector<double> exp_s(ns);
    for (std::size_t k = 0; k < ns; ++k)
        exp_s[k] = std::exp((x_min - y_min) +
                            (static_cast<double>(k) - static_cast<double>(table.ny - 1)) *
                                pitch);

    std::vector<double> sum_a(ns, 0.0), sq_a(ns, 0.0);
    std::vector<double> sum_b(ns, 0.0), sq_b(ns, 0.0);
    std::vector<double> cross_ab(ns, 0.0);
    double sum_ha = 0.0, sq_ha = 0.0, sum_hd = 0.0, sq_hd = 0.0;

    detail::TwoSidedDriftedField field(alpha, h, half);
    std::vector<double> class_sum(stride), class_max(stride);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const auto& w = field.sample(derive_seed(seed, stream_tag::fbm, rep));
        double peak = 0.0, total = 0.0;
        std::fill(class_sum.begin(), class_sum.end(), 0.0);
        std::fill(class_max.begin(), class_max.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double v = w[j];
            peak = std::max(peak, v);
            total += v;
            const std::size_t r = j % stride;
            class_sum[r] += v;
            class_max[r] = std::max(class_max[r], v);
        }
        // half is a multiple of stride, so the d-grid is class 0.
        const double grid_sum = class_sum[0];
        const double grid_max = class_max[0];
        const double h_fine = peak / (total * h);
        const double h_grid = grid_max / (grid_sum * d);
        sum_ha += h_fine;
        sq_ha += h_fine * h_fine;
        sum_hd += h_grid;
        sq_hd += h_grid * h_grid;

        const double fine_ratio = peak / total;
        for (std::size_t k = 0; k < ns; ++k) {
            const double es = exp_s[k];
            double phase_acc = 0.0;
            for (std::size_t r = 0; r < stride; ++r)
                phase_acc += std::max(peak, es * class_max[r]) /
                             (total + es * class_sum[r]);
            const double a = (fine_ratio - phase_acc / static_cast<double>(stride)) / h;
            // b = (M*/S* - Rg(s)) / d, written so neither branch forms
            // the difference of two large numbers.
            double b;
            if (grid_max * es >= peak) {
                const double shifted_total = total / es;
                b = grid_max * shifted_total /
                    (grid_sum * (grid_sum + shifted_total)) / d;
            } else {
                b = (grid_max / grid_sum - peak / (total + es * grid_sum)) / d;
            }
            sum_a[k] += a;
            sq_a[k] += a * a;
            sum_b[k] += b;
            sq_b[k] += b * b;
            cross_ab[k] += a * b;
        }
    }

    const auto n_reps = static_cast<double>(reps);
    build.h_alpha = detail::moments_to_estimate(sum_ha, sq_ha, reps, window, h);
    build.h_d_alpha = detail::moments_to_estimate(sum_hd, sq_hd, reps, window, d);
    table.h_alpha = build.h_alpha.value;
    table.h_d_alpha = build.h_d_alpha.value;

    table.values.assign(table.nx * table.ny, 0.0);
    table.stderrs.assign(table.nx * table.ny, 0.0);
    for (std::size_t ix = 0; ix < table.nx; ++ix) {
        const double wx = std::exp(-(x_min + static_cast<double>(ix) * pitch));
        for (std::size_t iy = 0; iy < table.ny; ++iy) {
            const double wy = std::exp(-(y_min + static_cast<double>(iy) * pitch));
            const std::size_t k = ix + (table.ny - 1) - iy;
            const double mean_a = sum_a[k] / n_reps;
            const double mean_b = sum_b[k] / n_reps;
            const double var_a = std::max(0.0, sq_a[k] / n_reps - mean_a * mean_a);
            const double var_b = std::max(0.0, sq_b[k] / n_reps - mean_b * mean_b);
            const double cov_ab = cross_ab[k] / n_reps - mean_a * mean_b;
            // H^{x,y} = e^{-x}(H_eta - U) + e^{-y}(H_d - V); the per-path
            // a, b above are the (H_eta - U), (H_d - V) contributions.
            table.values[ix * table.ny + iy] = wx * mean_a + wy * mean_b;
            table.stderrs[ix * table.ny + iy] =
                std::sqrt(std::max(0.0, wx * wx * var_a + wy * wy * var_b +
                                            2.0 * wx * wy * cov_ab) /
                          n_reps);
        }
    }
    table.enforce_shape();
    return build;
}

/// Builds the H^{x,y} lattice by the plain window estimator, reading
/// every (x,y) cell off the same path batch, together with shared-seed
/// window estimates of H_alpha(lambda) and H_{d,alpha}(lambda).
inline HTableBuild build_H_table(double alpha, double d, double x_min, double x_max,
                                 double y_min, double y_max, double pitch,
                                 double lambda, std::size_t reps, std::uint64_t seed,
                                 double mesh_h = 0.0) {
    if (!(pitch > 0.0) || pitch > 0.25 + 1e-12)
        throw Error("build_H_table: lattice pitch must be positive and <= 0.25");
    const auto batch = sample_drifted_maxima(alpha, d, lambda, mesh_h, reps, seed);

    HTableBuild build;
    build.h_alpha =
        detail::window_estimate(batch.m_cont, 0.0, batch.lambda, batch.mesh.h);
    build.h_d_alpha =
        detail::window_estimate(batch.m_grid, 0.0, batch.lambda, batch.mesh.h);

    HTable& table = build.table;
    table.x0 = x_min;
    table.y0 = y_min;
    table.pitch = pitch;
    table.nx = static_cast<std::size_t>(std::llround((x_max - x_min) / pitch)) + 1;
    table.ny = static_cast<std::size_t>(std::llround((y_max - y_min) / pitch)) + 1;
    table.h_alpha = build.h_alpha.value;
    table.h_d_alpha = build.h_d_alpha.value;
    table.values.assign(table.nx * table.ny, 0.0);
    table.stderrs.assign(table.nx * table.ny, 0.0);

    std::vector<double> sum_sq(table.nx * table.ny, 0.0);
    const auto n = static_cast<double>(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        const double m_cont = batch.m_cont[rep];
        const double m_grid = batch.m_grid[rep];
        for (std::size_t ix = 0; ix < table.nx; ++ix) {
            const double x = x_min + static_cast<double>(ix) * pitch;
            const double cx = m_cont - x;
            for (std::size_t iy = 0; iy < table.ny; ++iy) {
                const double y = y_min + static_cast<double>(iy) * pitch;
                const double v = std::exp(std::min(cx, m_grid - y)) / batch.lambda;
                table.values[ix * table.ny + iy] += v;
                sum_sq[ix * table.ny + iy] += v * v;
            }
        }
    }
    for (std::size_t i = 0; i < table.values.size(); ++i) {
        table.values[i] /= n;
        const double var = std::max(0.0, sum_sq[i] / n - table.values[i] * table.values[i]);
        table.stderrs[i] = std::sqrt(var / n);
    }
    return build;
}

}  // namespace maxdisc
