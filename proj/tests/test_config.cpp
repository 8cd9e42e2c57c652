#include <catch2/catch_amalgamated.hpp>

#include "maxdisc/config.hpp"

using namespace maxdisc;

TEST_CASE("fnv1a64 matches reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("{\"a\":1}") == 0x9c3e82dd6fcae8b1ULL);
}

TEST_CASE("config hash is stable under key reordering") {
    const json a = json::parse(R"({"b": 1, "a": 2})");
    const json b = json::parse(R"({"a": 2, "b": 1})");
    CHECK(canonical_config_bytes(a) == canonical_config_bytes(b));
    CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("parse_config round-trips a full document") {
    const json doc = json::parse(R"({
        "components": [
            {"alpha": 1.0, "c": 1.0, "r_diag": 0.5},
            {"alpha": 2.0, "c": 0.5, "r_diag": 0.5}
        ],
        "r_cross": [0.25],
        "grid": {"rule": "pickands", "d": 1.5},
        "ln_T": [6.0, 8.0],
        "replications": 500,
        "lattice": {"x": [0.0, 1.0], "y": [-1.0]},
        "seed": 42,
        "workers": 2,
        "mesh_safety": 0.025,
        "constants": {"H_alpha": 0.9, "lambda": 48.0, "reps": 12345}
    })");
    const ExperimentConfig config = parse_config(doc);
    REQUIRE(config.components.size() == 2);
    CHECK(config.components[0].alpha == 1.0);
    CHECK(config.components[1].c == 0.5);
    CHECK(config.r_cross(1, 0) == 0.25);
    CHECK(config.r_cross(0, 1) == 0.25);
    CHECK(config.r_cross(0, 0) == 0.5);
    CHECK(config.grid_rule.kind == GridRule::Kind::PickandsGrid);
    CHECK(config.grid_rule.d == 1.5);
    REQUIRE(config.horizons.size() == 2);
    CHECK(config.horizons[0] == Catch::Approx(std::exp(6.0)));
    CHECK(config.replications == 500);
    CHECK(config.lattice_x == std::vector<double>{0.0, 1.0});
    CHECK(config.lattice_y == std::vector<double>{-1.0});
    CHECK(config.master_seed == 42);
    CHECK(config.workers == 2);
    CHECK(config.mesh_safety == 0.025);
    REQUIRE(config.h_alpha_override.has_value());
    CHECK(*config.h_alpha_override == 0.9);
    CHECK(config.pickands_lambda == 48.0);
    CHECK(config.pickands_reps == 12345);
}

TEST_CASE("parse_config defaults") {
    const json doc = json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}],
        "T": 2981.0
    })");
    const ExperimentConfig config = parse_config(doc);
    CHECK(config.components[0].r_diag == 0.0);
    CHECK(config.grid_rule.kind == GridRule::Kind::SparseDefault);
    CHECK(config.replications == 1000);
    CHECK(config.lattice_x == std::vector<double>{-1.0, 0.0, 1.0, 2.0});
    CHECK(config.master_seed == 1);
    CHECK(config.mesh_safety == 0.05);
    CHECK_FALSE(config.h_alpha_override.has_value());
}

TEST_CASE("parse_config rejects malformed documents") {
    CHECK_THROWS_AS(parse_config(json::parse(R"({"T": 100})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(
                        R"({"components": [], "T": 100})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(
                        R"({"components": [{"alpha": 1.0, "c": 1.0}]})")),
                    ConfigError);
    // r_cross must list exactly p(p-1)/2 entries.
    CHECK_THROWS_AS(parse_config(json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}, {"alpha": 1.0, "c": 1.0}],
        "r_cross": [0.1, 0.2], "T": 100
    })")),
                    ConfigError);
    // pickands rule needs d.
    CHECK_THROWS_AS(parse_config(json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}],
        "grid": {"rule": "pickands"}, "T": 100
    })")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}],
        "grid": {"rule": "hexagonal"}, "T": 100
    })")),
                    ConfigError);
    // validate(): replications >= 100, T > e^2.
    CHECK_THROWS_AS(parse_config(json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}], "T": 100, "replications": 10
    })")),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}], "T": 5.0
    })")),
                    ConfigError);
    // missing component field surfaces as ConfigError, not a json throw.
    CHECK_THROWS_AS(parse_config(json::parse(R"({
        "components": [{"c": 1.0}], "T": 100
    })")),
                    ConfigError);
}

TEST_CASE("explicit grid rule parses coeff and exponent") {
    const json doc = json::parse(R"({
        "components": [{"alpha": 1.0, "c": 1.0}],
        "grid": {"rule": "explicit", "coeff": 2.0, "exponent": -1.0},
        "T": 2981.0
    })");
    const ExperimentConfig config = parse_config(doc);
    // delta(T) = 2 (2 ln T)^{-1}: a Pickands grid with D = 2.
    const GridSpec spec = classify_grid(config.grid_rule, 1.0);
    CHECK(spec.regime == GridRegime::Pickands);
    CHECK(spec.pickands_d == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("load_config_document reports missing and malformed files") {
    CHECK_THROWS_AS(load_config_document("/nonexistent/config.json"), ConfigError);
}
