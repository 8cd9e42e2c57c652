#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maxdisc/errors.hpp"
#include "maxdisc/fft.hpp"
#include "maxdisc/model.hpp"
#include "maxdisc/rng.hpp"

namespace maxdisc {

/// Uniform mesh {0, h, ..., (n-1)h}. The horizon is h (n-1) by
/// construction, so the invariant holds exactly.
struct MeshSpec {
    double h = 1.0;
    std::size_t n = 2;

    double horizon() const { return h * static_cast<double>(n - 1); }

    /// Finest mesh with step <= h_max covering [0, horizon] exactly.
    static MeshSpec for_horizon(double horizon, double h_max) {
        if (!(horizon > 0.0) || !(h_max > 0.0))
            throw Error("MeshSpec: horizon and step bound must be positive");
        const auto steps = static_cast<std::size_t>(std::ceil(horizon / h_max - 1e-9));
        return MeshSpec{horizon / static_cast<double>(steps), steps + 1};
    }
};

/// Step bound for the "continuous" maximum: a grid with D ~ safety
/// relative to the dense-grid threshold (2 ln T)^{-1/alpha}, per
/// component the tighter of C_k^{-1/alpha_k} scalings.
inline double continuum_step_bound(const VectorCorrelationModel& model, double horizon,
                                   double safety = 0.05) {
    const double two_log = 2.0 * std::log(horizon);
    double bound = std::numeric_limits<double>::infinity();
    for (const auto& comp : model.components()) {
        const double scale = std::pow(two_log * comp.c, -1.0 / comp.alpha);
        bound = std::min(bound, safety * scale);
    }
    return bound;
}

/// Replication paths for all p components on a common mesh.
struct PathEnsemble {
    MeshSpec mesh;
    std::vector<std::vector<double>> paths;  // p arrays of mesh.n values
    std::uint64_t master_seed = 0;
    std::uint64_t replication = 0;

    std::size_t dim() const { return paths.size(); }
};

/// Eigenvalue table of a circulant embedding: scale[j] = sqrt(eig_j / m).
struct SpectralTable {
    std::size_t path_length = 0;  // usable prefix n
    std::vector<double> scale;    // length m (power of two)
};

namespace detail {

/// Embeds the covariance sequence cov(j), j = 0..m/2, in a symmetric
/// circulant and returns the spectral table, escalating the padding
/// (2x, 4x, 8x) while eigenvalues stay negative beyond tolerance.
template <typename CovFn>
std::shared_ptr<const SpectralTable> embed_covariance(std::size_t n, CovFn&& cov,
                                                      const char* what) {
    std::size_t m = next_pow2(std::max<std::size_t>(2 * (n - 1), 2));
    double worst = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt, m *= 2) {
        Fft fft(m);
        auto* buf = fft.data();
        for (std::size_t j = 0; j <= m / 2; ++j)
            buf[j] = cov(static_cast<double>(j));
        for (std::size_t j = m / 2 + 1; j < m; ++j) buf[j] = buf[m - j];
        fft.execute();

        double min_eig = 0.0, max_eig = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            min_eig = std::min(min_eig, buf[j].real());
            max_eig = std::max(max_eig, buf[j].real());
        }
        worst = min_eig;
        if (min_eig < -1e-9 * std::max(1.0, max_eig)) continue;

        auto table = std::make_shared<SpectralTable>();
        table->path_length = n;
        table->scale.resize(m);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t j = 0; j < m; ++j)
            table->scale[j] = std::sqrt(std::max(0.0, buf[j].real()) * inv_m);
        return table;
    }
    throw EmbeddingNotPSD(std::string(what) +
                          ": circulant embedding not PSD after padding escalation "
                          "(most negative eigenvalue " + std::to_string(worst) + ")",
                          worst);
}

}  // namespace detail

/// Spectral table for a standard stationary path with correlation
/// exp(-C |t|^alpha) on the given mesh.
inline std::shared_ptr<const SpectralTable> stationary_table(double c, double alpha,
                                                             const MeshSpec& mesh) {
    if (!(alpha > 0.0) || alpha > 2.0)
        throw AlphaOutOfRange("stationary_table: alpha must lie in (0,2]");
    if (!(c > 0.0)) throw Error("stationary_table: C must be positive");
    if (mesh.n == 1) {
        auto table = std::make_shared<SpectralTable>();
        table->path_length = 1;
        return table;
    }
    const double h = mesh.h;
    return detail::embed_covariance(
        mesh.n,
        [c, alpha, h](double j) { return std::exp(-c * std::pow(j * h, alpha)); },
        "stationary kernel");
}

/// Spectral table for fractional Gaussian noise increments of step h
/// and Hurst index in (0,1). This embedding is provably PSD, so an
/// escalation failure signals a bug.
inline std::shared_ptr<const SpectralTable> fgn_table(double hurst, const MeshSpec& mesh) {
    const double h2 = 2.0 * hurst;
    const double step_var = std::pow(mesh.h, h2);
    return detail::embed_covariance(
        mesh.n - 1,
        [h2, step_var](double j) {
            return 0.5 * step_var *
                   (std::pow(j + 1.0, h2) - 2.0 * std::pow(j, h2) +
                    std::pow(std::abs(j - 1.0), h2));
        },
        "fGn");
}

/// Draws two independent stationary sequences from one complex FFT
/// (real and imaginary outputs of the Dietrich-Newsam recipe are
/// independent when the spectrum is symmetric).
class SpectralSampler {
public:
    explicit SpectralSampler(std::shared_ptr<const SpectralTable> table)
        : table_(std::move(table)),
          fft_(table_->scale.empty() ? nullptr
                                     : std::make_unique<Fft>(table_->scale.size())) {}

    std::size_t path_length() const { return table_->path_length; }

    void sample_pair(std::uint64_t seed, std::vector<double>& out_a,
                     std::vector<double>& out_b) {
        const std::size_t n = table_->path_length;
        out_a.resize(n);
        out_b.resize(n);
        Xoshiro256 rng(seed);
        if (!fft_) {  // n == 1: a single standard normal per path
            out_a[0] = rng.normal();
            out_b[0] = rng.normal();
            return;
        }
        const std::size_t m = table_->scale.size();
        auto* buf = fft_->data();
        for (std::size_t j = 0; j < m; ++j) {
            const double s = table_->scale[j];
            buf[j] = {s * rng.normal(), s * rng.normal()};
        }
        fft_->execute();
        for (std::size_t k = 0; k < n; ++k) {
            out_a[k] = buf[k].real();
            out_b[k] = buf[k].imag();
        }
    }

    std::vector<double> sample(std::uint64_t seed) {
        std::vector<double> a, b;
        sample_pair(seed, a, b);
        return a;
    }

private:
    std::shared_ptr<const SpectralTable> table_;
    std::unique_ptr<Fft> fft_;
};

/// Exact stationary path with kernel exp(-C |t|^alpha) on the mesh.
inline std::vector<double> sample_stationary(double c, double alpha, const MeshSpec& mesh,
                                             std::uint64_t seed) {
    SpectralSampler sampler(stationary_table(c, alpha, mesh));
    return sampler.sample(seed);
}

/// Fractional Brownian path with B(0) = 0 and Var B(t) = t^{2 hurst}
/// exactly at mesh points. hurst = 1 degenerates to B(t) = t N(0,1).
class FbmSampler {
public:
    FbmSampler(double hurst, const MeshSpec& mesh) : hurst_(hurst), mesh_(mesh) {
        if (!(hurst > 0.0) || hurst > 1.0)
            throw Error("FbmSampler: Hurst exponent must lie in (0,1]");
        if (hurst < 1.0 && mesh.n >= 2)
            increments_ = std::make_unique<SpectralSampler>(fgn_table(hurst, mesh));
    }

    std::vector<double> sample(std::uint64_t seed) {
        std::vector<double> path(mesh_.n, 0.0);
        if (mesh_.n < 2) return path;
        if (hurst_ == 1.0) {
            Xoshiro256 rng(seed);
            const double slope = rng.normal();
            for (std::size_t k = 1; k < mesh_.n; ++k)
                path[k] = slope * static_cast<double>(k) * mesh_.h;
            return path;
        }
        std::vector<double> inc_a, inc_b;
        increments_->sample_pair(seed, inc_a, inc_b);
        for (std::size_t k = 1; k < mesh_.n; ++k) path[k] = path[k - 1] + inc_a[k - 1];
        return path;
    }

private:
    double hurst_;
    MeshSpec mesh_;
    std::unique_ptr<SpectralSampler> increments_;
};

inline std::vector<double> sample_fbm(double hurst, const MeshSpec& mesh,
                                      std::uint64_t seed) {
    return FbmSampler(hurst, mesh).sample(seed);
}

/// Sampler for the p-variate comparison process
///   X_k = sqrt(1 - rho_kk(T)) eta_k + sqrt(rho_kk(T)) Z_k.
/// Replications are generated in pairs sharing one FFT per component;
/// sample(rep) always reads its half of the fixed pair, so single and
/// batched generation agree bit for bit.
class VectorProcessSampler {
public:
    VectorProcessSampler(const VectorCorrelationModel& model, const MeshSpec& mesh)
        : model_(model), mesh_(mesh) {
        if (!(mesh.horizon() > kMinHorizon))
            throw HorizonTooSmall("vector process horizon must exceed e^2");
        const double log_horizon = std::log(mesh.horizon());
        // One spectral table per distinct kernel.
        std::map<std::pair<double, double>, std::shared_ptr<const SpectralTable>> cache;
        for (const auto& comp : model.components()) {
            auto key = std::make_pair(comp.c, comp.alpha);
            auto it = cache.find(key);
            if (it == cache.end())
                it = cache.emplace(key, stationary_table(comp.c, comp.alpha, mesh)).first;
            tables_.push_back(it->second);
            samplers_.push_back(std::make_unique<SpectralSampler>(it->second));
            const double rho = comp.r_diag / log_horizon;
            if (!(rho < 1.0))
                throw HorizonTooSmall("rho_kk(T) >= 1; horizon too small for r_kk");
            weight_eta_.push_back(std::sqrt(1.0 - rho));
            weight_z_.push_back(std::sqrt(rho));
        }
    }

    /// Worker-local copy: shares the spectral tables, owns fresh FFT
    /// buffers. Output is identical to the original for any seed.
    VectorProcessSampler(const VectorProcessSampler& other)
        : model_(other.model_),
          mesh_(other.mesh_),
          tables_(other.tables_),
          weight_eta_(other.weight_eta_),
          weight_z_(other.weight_z_) {
        for (const auto& table : tables_)
            samplers_.push_back(std::make_unique<SpectralSampler>(table));
    }

    const MeshSpec& mesh() const { return mesh_; }

    /// Generates replications 2*pair and 2*pair+1.
    void sample_pair(std::uint64_t master_seed, std::uint64_t pair,
                     PathEnsemble& out_a, PathEnsemble& out_b) {
        const std::size_t p = model_.dim();
        init(out_a, master_seed, 2 * pair);
        init(out_b, master_seed, 2 * pair + 1);
        Eigen::VectorXd z_a = latent_draw(master_seed, 2 * pair);
        Eigen::VectorXd z_b = latent_draw(master_seed, 2 * pair + 1);
        for (std::size_t k = 0; k < p; ++k) {
            const std::uint64_t seed = derive_seed(master_seed, stream_tag::stationary,
                                                   pair, k);
            samplers_[k]->sample_pair(seed, out_a.paths[k], out_b.paths[k]);
            mix(out_a.paths[k], k, z_a(static_cast<Eigen::Index>(k)));
            mix(out_b.paths[k], k, z_b(static_cast<Eigen::Index>(k)));
        }
    }

    PathEnsemble sample(std::uint64_t master_seed, std::uint64_t replication) {
        PathEnsemble a, b;
        sample_pair(master_seed, replication / 2, a, b);
        return replication % 2 == 0 ? std::move(a) : std::move(b);
    }

private:
    void init(PathEnsemble& ens, std::uint64_t master_seed, std::uint64_t rep) const {
        ens.mesh = mesh_;
        ens.master_seed = master_seed;
        ens.replication = rep;
        ens.paths.resize(model_.dim());
    }

    Eigen::VectorXd latent_draw(std::uint64_t master_seed, std::uint64_t rep) const {
        const auto rank = static_cast<Eigen::Index>(model_.latent_rank());
        Xoshiro256 rng(derive_seed(master_seed, stream_tag::latent, rep));
        Eigen::VectorXd u(rank);
        for (Eigen::Index i = 0; i < rank; ++i) u(i) = rng.normal();
        return model_.latent_factor() * u;
    }

    void mix(std::vector<double>& path, std::size_t k, double z) const {
        const double we = weight_eta_[k];
        const double wz = weight_z_[k] * z;
        if (we == 1.0 && wz == 0.0) return;  // r_kk = 0: X_k = eta_k exactly
        for (double& v : path) v = we * v + wz;
    }

    const VectorCorrelationModel& model_;
    MeshSpec mesh_;
    std::vector<std::shared_ptr<const SpectralTable>> tables_;
    std::vector<std::unique_ptr<SpectralSampler>> samplers_;
    std::vector<double> weight_eta_;
    std::vector<double> weight_z_;
};

inline PathEnsemble sample_vector_process(const VectorCorrelationModel& model,
                                          const MeshSpec& mesh, std::uint64_t master_seed,
                                          std::uint64_t replication = 0) {
    VectorProcessSampler sampler(model, mesh);
    return sampler.sample(master_seed, replication);
}

/// One row of the covariance self-check table.
struct SelfCheckRow {
    std::size_t component = 0;
    double lag = 0.0;
    double empirical = 0.0;
    double expected = 0.0;
    double z_score = 0.0;
    bool flagged = false;
};

/// Compares batch-averaged lagged products against the model
/// correlation; |z| > 4 rows are flagged.
inline std::vector<SelfCheckRow> covariance_selfcheck(
    const std::vector<PathEnsemble>& batch, const VectorCorrelationModel& model,
    const std::vector<double>& lags) {
    if (lags.empty()) return {};
    if (batch.size() < 1000)
        throw InsufficientReplications("covariance_selfcheck needs >= 1000 replications");
    const MeshSpec& mesh = batch.front().mesh;
    const double horizon = mesh.horizon();
    std::vector<SelfCheckRow> rows;
    for (std::size_t k = 0; k < model.dim(); ++k) {
        for (double lag : lags) {
            const auto offset = static_cast<std::size_t>(std::llround(lag / mesh.h));
            if (offset >= mesh.n) throw Error("covariance_selfcheck: lag beyond mesh");
            double sum = 0.0, sum_sq = 0.0;
            for (const auto& ens : batch) {
                const auto& path = ens.paths[k];
                double acc = 0.0;
                const std::size_t count = mesh.n - offset;
                for (std::size_t t = 0; t < count; ++t) acc += path[t] * path[t + offset];
                acc /= static_cast<double>(count);
                sum += acc;
                sum_sq += acc * acc;
            }
            const auto reps = static_cast<double>(batch.size());
            const double mean = sum / reps;
            const double var = std::max(0.0, sum_sq / reps - mean * mean);
            const double stderr_mean = std::sqrt(var / reps);
            SelfCheckRow row;
            row.component = k;
            row.lag = offset * mesh.h;
            row.empirical = mean;
            row.expected = correlation_at(model, k, k, row.lag, horizon);
            row.z_score = stderr_mean > 0.0 ? (mean - row.expected) / stderr_mean : 0.0;
            row.flagged = std::abs(row.z_score) > 4.0;
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace maxdisc
