#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "maxdisc/errors.hpp"
#include "maxdisc/verify.hpp"

namespace maxdisc {

using json = nlohmann::json;

/// FNV-1a 64-bit over the canonical config bytes (sorted keys, shortest
/// round-trip float formatting; both are what nlohmann::json::dump
/// produces for an object-ordered document).
inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::string canonical_config_bytes(const json& config) { return config.dump(); }

inline std::uint64_t config_hash(const json& config) {
    return fnv1a64(canonical_config_bytes(config));
}

namespace detail {

inline GridRule parse_grid_rule(const json& grid) {
    const std::string rule = grid.value("rule", "sparse");
    if (rule == "sparse") return GridRule::sparse_default();
    if (rule == "dense") return GridRule::dense_default();
    if (rule == "pickands") {
        if (!grid.contains("d"))
            throw ConfigError("grid.rule=pickands requires grid.d");
        return GridRule::pickands(grid.at("d").get<double>());
    }
    if (rule == "explicit") {
        // delta = coeff * (2 ln T)^exponent, the closed family of rules
        // expressible in a config file.
        const double coeff = grid.value("coeff", 1.0);
        const double exponent = grid.value("exponent", 0.0);
        return GridRule::explicit_delta([coeff, exponent](double horizon) {
            return coeff * std::pow(2.0 * std::log(horizon), exponent);
        });
    }
    throw ConfigError("grid.rule must be sparse|pickands|dense|explicit, got '" + rule +
                      "'");
}

}  // namespace detail

/// Parses an experiment config document. Throws ConfigError with key
/// context on malformed input.
inline ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig config;
    try {
        if (!doc.contains("components") || !doc.at("components").is_array() ||
            doc.at("components").empty())
            throw ConfigError("config: 'components' must be a non-empty array");
        for (const auto& item : doc.at("components")) {
            ComponentParams comp;
            comp.alpha = item.at("alpha").get<double>();
            comp.c = item.at("c").get<double>();
            comp.r_diag = item.value("r_diag", 0.0);
            config.components.push_back(comp);
        }
        const auto p = static_cast<Eigen::Index>(config.components.size());
        config.r_cross = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index k = 0; k < p; ++k)
            config.r_cross(k, k) = config.components[static_cast<std::size_t>(k)].r_diag;
        if (doc.contains("r_cross")) {
            // Row-major strict lower triangle: r_21; r_31, r_32; ...
            const auto& lower = doc.at("r_cross");
            const std::size_t expected = static_cast<std::size_t>(p * (p - 1) / 2);
            if (lower.size() != expected)
                throw ConfigError("config: r_cross must list the strict lower triangle (" +
                                  std::to_string(expected) + " entries)");
            std::size_t idx = 0;
            for (Eigen::Index i = 1; i < p; ++i)
                for (Eigen::Index j = 0; j < i; ++j, ++idx) {
                    const double value = lower.at(idx).get<double>();
                    config.r_cross(i, j) = value;
                    config.r_cross(j, i) = value;
                }
        }
        config.allow_singular_latent = doc.value("allow_singular_latent", false);

        if (doc.contains("grid")) config.grid_rule = detail::parse_grid_rule(doc.at("grid"));

        config.horizons.clear();
        if (doc.contains("T")) {
            if (doc.at("T").is_array())
                for (const auto& t : doc.at("T")) config.horizons.push_back(t.get<double>());
            else
                config.horizons.push_back(doc.at("T").get<double>());
        }
        if (doc.contains("ln_T")) {
            if (doc.at("ln_T").is_array())
                for (const auto& t : doc.at("ln_T"))
                    config.horizons.push_back(std::exp(t.get<double>()));
            else
                config.horizons.push_back(std::exp(doc.at("ln_T").get<double>()));
        }
        if (config.horizons.empty())
            throw ConfigError("config: provide 'T' or 'ln_T' (value or ladder)");

        config.replications = doc.value("replications", std::size_t{1000});
        if (doc.contains("lattice")) {
            config.lattice_x = doc.at("lattice").at("x").get<std::vector<double>>();
            config.lattice_y = doc.at("lattice").at("y").get<std::vector<double>>();
        }
        config.master_seed = doc.value("seed", std::uint64_t{1});
        config.workers = doc.value("workers", 0u);
        config.mesh_safety = doc.value("mesh_safety", 0.05);

        if (doc.contains("constants")) {
            const auto& constants = doc.at("constants");
            if (constants.contains("H_alpha"))
                config.h_alpha_override = constants.at("H_alpha").get<double>();
            config.pickands_lambda = constants.value("lambda", 64.0);
            config.pickands_reps = constants.value("reps", std::size_t{20000});
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    config.validate();
    return config;
}

inline json load_config_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return doc;
}

}  // namespace maxdisc
