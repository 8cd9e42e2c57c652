#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "maxdisc/errors.hpp"
#include "maxdisc/model.hpp"
#include "maxdisc/sampler.hpp"

namespace maxdisc {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;

/// Closed-form Pickands constants where known: H_1 = 1, H_2 = 1/sqrt(pi).
inline std::optional<double> known_pickands_constant(double alpha) {
    if (alpha == 1.0) return 1.0;
    if (alpha == 2.0) return 0.5641895835477562869480795;
    return std::nullopt;
}

/// Normalizing constants for one component at horizon T:
///   a_T      = sqrt(2 ln T)
///   b_T      = a_T + a_T^{-1} ln((2 pi)^{-1/2} C^{1/alpha} H_alpha a_T^{-1+2/alpha})
///   b_T^delta= a_T + a_T^{-1} ln((2 pi)^{-1/2} delta^{-1} a_T^{-1})
///   b_{d,T}  = a_T + a_T^{-1} ln((2 pi)^{-1/2} C^{1/alpha} H_{d,alpha} a_T^{-1+2/alpha})
struct NormalizationConstants {
    double a_T = 0.0;
    double b_T = 0.0;
    double b_T_delta = 0.0;
    std::optional<double> b_dT;  // present only when H_{d,alpha} was supplied

    /// Grid-max centering for the given regime. A dense grid shares the
    /// continuous normalization in the limit; when a grid-spacing
    /// constant was supplied, the matching b_{d,T} refines it at finite T.
    double grid_centering(GridRegime regime) const {
        switch (regime) {
            case GridRegime::Sparse: return b_T_delta;
            case GridRegime::Pickands:
                if (!b_dT)
                    throw RegimeMismatch("constants lack b_{d,T} for a Pickands grid");
                return *b_dT;
            case GridRegime::Dense: return b_dT ? *b_dT : b_T;
        }
        return b_T;
    }
};

inline NormalizationConstants normalizers(double horizon, const ComponentParams& comp,
                                          double delta, GridRegime regime,
                                          double h_alpha,
                                          std::optional<double> h_d_alpha = std::nullopt) {
    if (!(horizon > kMinHorizon))
        throw HorizonTooSmall("normalizers: T must exceed e^2");
    if (regime == GridRegime::Pickands && !h_d_alpha)
        throw MissingConstant("Pickands regime needs H_{d,alpha}");
    NormalizationConstants constants;
    const double a = std::sqrt(2.0 * std::log(horizon));
    const double kernel_factor =
        std::pow(comp.c, 1.0 / comp.alpha) * std::pow(a, -1.0 + 2.0 / comp.alpha);
    constants.a_T = a;
    constants.b_T = a + std::log(kInvSqrt2Pi * kernel_factor * h_alpha) / a;
    constants.b_T_delta = a + std::log(kInvSqrt2Pi / (delta * a)) / a;
    if (h_d_alpha)
        constants.b_dT = a + std::log(kInvSqrt2Pi * kernel_factor * *h_d_alpha) / a;
    return constants;
}

/// Mesh indices of the evaluation grid {0, m, 2m, ...} with m = delta/h.
/// delta must already be snapped to a mesh multiple.
inline std::vector<std::size_t> grid_points(double delta, const MeshSpec& mesh) {
    const double ratio = delta / mesh.h;
    const auto stride = static_cast<std::size_t>(std::llround(ratio));
    if (stride < 1) throw DeltaBelowMesh("grid spacing below mesh step");
    std::vector<std::size_t> indices;
    indices.reserve(mesh.n / stride + 1);
    for (std::size_t i = 0; i < mesh.n; i += stride) indices.push_back(i);
    return indices;
}

/// Snaps delta to the nearest positive integer multiple of the mesh
/// step; returns the snapped value and the relative snap error.
struct SnappedDelta {
    double value = 0.0;
    double relative_error = 0.0;
};

inline SnappedDelta snap_delta(double delta, const MeshSpec& mesh) {
    const auto stride =
        std::max<long long>(1, std::llround(delta / mesh.h));
    SnappedDelta snapped;
    snapped.value = static_cast<double>(stride) * mesh.h;
    snapped.relative_error = std::abs(snapped.value - delta) / delta;
    return snapped;
}

/// Raw joint maxima of one replication.
struct RawMaxima {
    std::vector<double> m_cont;  // fine-mesh maximum per component
    std::vector<double> m_grid;  // grid maximum per component
};

inline RawMaxima joint_maxima(const PathEnsemble& ensemble,
                              const std::vector<std::size_t>& grid_indices) {
    if (grid_indices.empty()) throw Error("joint_maxima: empty grid");
    RawMaxima raw;
    raw.m_cont.reserve(ensemble.dim());
    raw.m_grid.reserve(ensemble.dim());
    for (const auto& path : ensemble.paths) {
        double m_cont = path[0];
        for (double v : path) m_cont = std::max(m_cont, v);
        double m_grid = path[grid_indices[0]];
        for (std::size_t idx : grid_indices) m_grid = std::max(m_grid, path[idx]);
        raw.m_cont.push_back(m_cont);
        raw.m_grid.push_back(m_grid);
    }
    return raw;
}

/// Normalized joint maxima x_hat = a_T (m_cont - b_T) and
/// y_hat = a_T (m_grid - b'_T) with the regime-appropriate centering.
struct MaxSample {
    std::vector<double> m_cont;
    std::vector<double> m_grid;
    std::vector<double> x_hat;
    std::vector<double> y_hat;
};

inline MaxSample normalize_maxima(const RawMaxima& raw,
                                  const std::vector<NormalizationConstants>& constants,
                                  GridRegime regime) {
    if (raw.m_cont.size() != constants.size())
        throw DimensionMismatch("normalize_maxima: constants/component mismatch");
    MaxSample sample;
    sample.m_cont = raw.m_cont;
    sample.m_grid = raw.m_grid;
    for (std::size_t k = 0; k < raw.m_cont.size(); ++k) {
        const auto& c = constants[k];
        const double grid_center = c.grid_centering(regime);
        sample.x_hat.push_back(c.a_T * (raw.m_cont[k] - c.b_T));
        sample.y_hat.push_back(c.a_T * (raw.m_grid[k] - grid_center));
    }
    return sample;
}

}  // namespace maxdisc
