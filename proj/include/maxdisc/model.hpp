#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maxdisc/errors.hpp"

namespace maxdisc {

/// Smallest horizon the finite-T model accepts: below e^2 the
/// long-range weights r/ln T stop being small and the construction is
/// meaningless as an asymptotic surrogate.
inline constexpr double kMinHorizon = 7.38905609893065;  // e^2

/// One component of the vector process: local regularity exponent
/// alpha in (0,2], local scale C > 0 and long-range coefficient r >= 0.
struct ComponentParams {
    double alpha = 1.0;
    double c = 1.0;
    double r_diag = 0.0;
};

/// Validated correlation structure of the p-variate process, together
/// with the latent-factor decomposition used for sampling and for the
/// limit-distribution integrals.
///
/// The finite-T correlation synthesizer is the comparison construction
///   X_k(t) = sqrt(1 - rho_kk(T)) eta_k(t) + sqrt(rho_kk(T)) Z_k,
/// with rho_kl(T) = r_kl / ln T, eta_k independent stationary paths
/// with kernel exp(-C_k |t|^alpha_k), and Z ~ N(0, sigma_Z). Note the
/// triangular-array nature: correlations depend on T through rho(T).
class VectorCorrelationModel {
public:
    VectorCorrelationModel(std::vector<ComponentParams> components,
                           Eigen::MatrixXd r_cross, Eigen::MatrixXd sigma_z,
                           Eigen::MatrixXd latent_factor, bool singular_latent)
        : components_(std::move(components)),
          r_cross_(std::move(r_cross)),
          sigma_z_(std::move(sigma_z)),
          latent_factor_(std::move(latent_factor)),
          singular_latent_(singular_latent) {}

    std::size_t dim() const { return components_.size(); }
    const std::vector<ComponentParams>& components() const { return components_; }
    const ComponentParams& component(std::size_t k) const { return components_[k]; }
    const Eigen::MatrixXd& r_cross() const { return r_cross_; }
    const Eigen::MatrixXd& sigma_z() const { return sigma_z_; }

    /// Factor L with L L^T = sigma_Z, p x rank. Rank-revealing, so a
    /// singular latent covariance is sampled on its support.
    const Eigen::MatrixXd& latent_factor() const { return latent_factor_; }
    std::size_t latent_rank() const {
        return static_cast<std::size_t>(latent_factor_.cols());
    }
    bool singular_latent() const { return singular_latent_; }

    double rho(std::size_t k, std::size_t l, double horizon) const {
        return r_cross_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) /
               std::log(horizon);
    }

private:
    std::vector<ComponentParams> components_;
    Eigen::MatrixXd r_cross_;
    Eigen::MatrixXd sigma_z_;
    Eigen::MatrixXd latent_factor_;
    bool singular_latent_;
};

/// Builds and validates the model. r_cross must be symmetric with
/// diagonal equal to the per-component r_diag. The latent covariance
/// sigma_Z has entries r_kl / sqrt(r_kk r_ll) (0 when a diagonal
/// weight vanishes, 1 on the diagonal). A rank-deficient sigma_Z is
/// accepted only when allow_singular is set.
inline VectorCorrelationModel build_model(const std::vector<ComponentParams>& components,
                                          const Eigen::MatrixXd& r_cross,
                                          bool allow_singular = false) {
    const auto p = static_cast<Eigen::Index>(components.size());
    if (p < 1) throw Error("build_model: need at least one component");
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& comp = components[k];
        if (!(comp.alpha > 0.0) || comp.alpha > 2.0)
            throw AlphaOutOfRange("component " + std::to_string(k) +
                                  ": alpha must lie in (0,2], got " +
                                  std::to_string(comp.alpha));
        if (!(comp.c > 0.0))
            throw Error("component " + std::to_string(k) + ": C must be positive");
        if (comp.r_diag < 0.0)
            throw NegativeDiagonal("component " + std::to_string(k) +
                                   ": r_kk must be nonnegative");
    }
    if (r_cross.rows() != p || r_cross.cols() != p)
        throw NonSymmetricCross("r_cross dimension does not match component count");
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::abs(r_cross(i, j) - r_cross(j, i)) > 1e-12)
                throw NonSymmetricCross("r_cross is not symmetric at (" +
                                        std::to_string(i) + "," + std::to_string(j) + ")");
        }
        if (std::abs(r_cross(i, i) - components[static_cast<std::size_t>(i)].r_diag) > 1e-12)
            throw NonSymmetricCross("r_cross diagonal disagrees with component r_kk");
    }

    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (i == j) continue;
            const double denom = r_cross(i, i) * r_cross(j, j);
            sigma(i, j) = denom > 0.0 ? r_cross(i, j) / std::sqrt(denom) : 0.0;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(sigma);
    const Eigen::VectorXd& eigenvalues = eigen.eigenvalues();
    const double min_eig = eigenvalues.minCoeff();
    if (min_eig < -1e-10)
        throw NonPSDLatent("latent covariance is not positive semidefinite "
                           "(min eigenvalue " + std::to_string(min_eig) + ")",
                           min_eig);

    const double rank_tol = 1e-12 * std::max(1.0, eigenvalues.maxCoeff());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        if (eigenvalues(i) > rank_tol) ++rank;
    const bool singular = rank < p;
    if (singular && !allow_singular)
        throw NonPSDLatent("latent covariance is rank deficient (min eigenvalue " +
                           std::to_string(min_eig) +
                           "); pass allow_singular_latent to accept",
                           min_eig);

    // Columns for the retained (largest) eigenvalues; eigenvalues are
    // sorted ascending in Eigen.
    Eigen::MatrixXd factor(p, rank);
    Eigen::Index col = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (eigenvalues(i) > rank_tol)
            factor.col(col++) = eigen.eigenvectors().col(i) * std::sqrt(eigenvalues(i));
    }

    return VectorCorrelationModel(components, r_cross, sigma, factor, singular);
}

/// Correlation of the finite-T comparison process between components
/// k and l at time separation t.
inline double correlation_at(const VectorCorrelationModel& model, std::size_t k,
                             std::size_t l, double t, double horizon) {
    if (!(horizon > std::exp(1.0)))
        throw HorizonTooSmall("correlation_at: T must exceed e");
    if (k >= model.dim() || l >= model.dim())
        throw DimensionMismatch("correlation_at: component index out of range");
    if (k != l) return model.rho(k, l, horizon);
    const auto& comp = model.component(k);
    const double rho = model.rho(k, k, horizon);
    return (1.0 - rho) * std::exp(-comp.c * std::pow(std::abs(t), comp.alpha)) + rho;
}

enum class GridRegime { Sparse, Pickands, Dense };

inline const char* to_string(GridRegime regime) {
    switch (regime) {
        case GridRegime::Sparse: return "sparse";
        case GridRegime::Pickands: return "pickands";
        case GridRegime::Dense: return "dense";
    }
    return "?";
}

/// Grid rule T -> delta(T). Built-in defaults:
///   sparse   delta = (2 ln T)^{1/alpha}        (D = infinity)
///   pickands delta = d (2 ln T)^{-1/alpha}     (D = d)
///   dense    delta = (2 ln T)^{-2/alpha}       (D = 0)
/// The sparse default grows with T so that at practical horizons the
/// grid and continuous maxima are already close to independent: at a
/// shrinking spacing the continuous peak still leaks into nearby grid
/// points and the residual correlation decays only at a ln ln T rate.
struct GridRule {
    enum class Kind { SparseDefault, PickandsGrid, DenseDefault, ExplicitDelta };

    Kind kind = Kind::SparseDefault;
    double d = 1.0;  // Pickands spacing parameter
    std::function<double(double)> delta_fn;  // ExplicitDelta only

    static GridRule sparse_default() { return {Kind::SparseDefault, 0.0, {}}; }
    static GridRule pickands(double d) {
        if (!(d > 0.0)) throw Error("pickands grid needs d > 0");
        return {Kind::PickandsGrid, d, {}};
    }
    static GridRule dense_default() { return {Kind::DenseDefault, 0.0, {}}; }
    static GridRule explicit_delta(std::function<double(double)> fn) {
        return {Kind::ExplicitDelta, 0.0, std::move(fn)};
    }

    double delta(double horizon, double alpha) const {
        const double two_log = 2.0 * std::log(horizon);
        switch (kind) {
            case Kind::SparseDefault: return std::pow(two_log, 1.0 / alpha);
            case Kind::PickandsGrid: return d * std::pow(two_log, -1.0 / alpha);
            case Kind::DenseDefault: return std::pow(two_log, -2.0 / alpha);
            case Kind::ExplicitDelta: return delta_fn(horizon);
        }
        return 0.0;
    }
};

/// Grid rule plus its classified regime. For a Pickands grid, d is
/// the limit D of delta(T) (2 ln T)^{1/alpha}.
struct GridSpec {
    GridRule rule;
    GridRegime regime = GridRegime::Sparse;
    double pickands_d = 0.0;  // valid iff regime == Pickands
};

/// Classifies a grid rule by the limit D = lim delta(T) (2 ln T)^{1/alpha}.
/// Built-ins are classified analytically; an explicit rule is probed at
/// T = e^8, e^16, e^32 and classified by the monotone trend of the probe
/// values (flat within 5 percent means a Pickands grid).
inline GridSpec classify_grid(const GridRule& rule, double alpha) {
    if (!(alpha > 0.0) || alpha > 2.0)
        throw AlphaOutOfRange("classify_grid: alpha must lie in (0,2]");
    switch (rule.kind) {
        case GridRule::Kind::SparseDefault:
            return {rule, GridRegime::Sparse, 0.0};
        case GridRule::Kind::PickandsGrid:
            return {rule, GridRegime::Pickands, rule.d};
        case GridRule::Kind::DenseDefault:
            return {rule, GridRegime::Dense, 0.0};
        case GridRule::Kind::ExplicitDelta:
            break;
    }

    double probe[3];
    const double log_horizons[3] = {8.0, 16.0, 32.0};
    for (int i = 0; i < 3; ++i) {
        const double horizon = std::exp(log_horizons[i]);
        probe[i] = rule.delta_fn(horizon) * std::pow(2.0 * log_horizons[i], 1.0 / alpha);
        if (!(probe[i] > 0.0) || !std::isfinite(probe[i]))
            throw UndecidableRegime("grid probe produced a non-finite or non-positive value");
    }
    const double lo = std::min({probe[0], probe[1], probe[2]});
    const double hi = std::max({probe[0], probe[1], probe[2]});
    if (hi <= lo * 1.05)
        return {rule, GridRegime::Pickands, probe[2]};
    if (probe[0] < probe[1] && probe[1] < probe[2])
        return {rule, GridRegime::Sparse, 0.0};
    if (probe[0] > probe[1] && probe[1] > probe[2])
        return {rule, GridRegime::Dense, 0.0};
    throw UndecidableRegime("grid probe trend is non-monotone; cannot classify");
}

}  // namespace maxdisc
