#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "maxdisc/pickands.hpp"

using namespace maxdisc;

TEST_CASE("window estimator: grid coarser than the window degenerates to 1/lambda") {
    // Only the t = 0 grid point remains, so every replication contributes
    // exp(0)/lambda exactly.
    const auto est = estimate_H_d_alpha(1.0, 20.0, 10.0, 50, 42);
    CHECK(est.value == Catch::Approx(1.0 / est.lambda).epsilon(1e-14));
    CHECK(est.stderr_value == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("path-wise inequalities on shared seeds") {
    const std::uint64_t seed = 4242;
    const std::size_t reps = 400;
    // Same mesh (h = 0.01) for d = 1, 1/2, 1/4: the batches share paths,
    // so refinement can only raise the grid maximum.
    const auto b1 = sample_drifted_maxima(1.0, 1.0, 8.0, 0.01, reps, seed);
    const auto b2 = sample_drifted_maxima(1.0, 0.5, 8.0, 0.01, reps, seed);
    const auto b4 = sample_drifted_maxima(1.0, 0.25, 8.0, 0.01, reps, seed);
    REQUIRE(b1.mesh.h == b2.mesh.h);
    REQUIRE(b1.m_cont == b2.m_cont);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        CHECK(b1.m_grid[rep] <= b2.m_grid[rep]);
        CHECK(b2.m_grid[rep] <= b4.m_grid[rep]);
        CHECK(b4.m_grid[rep] <= b4.m_cont[rep]);
    }

    // Estimate-level orderings inherited from the path-wise ones.
    const auto h_cont = estimate_H_alpha(1.0, 8.0, 0.01, reps, seed);
    const auto h_d = estimate_H_d_alpha(1.0, 1.0, 8.0, reps, seed, 0.01);
    CHECK(h_d.value <= h_cont.value + 1e-14);

    // H^{x,y} <= min(e^{-x} H_alpha, e^{-y} H_{d,alpha}) on the same seeds.
    for (const auto& [x, y] : std::vector<std::pair<double, double>>{
             {0.0, 0.0}, {-1.0, 1.0}, {2.0, 0.5}}) {
        const auto h_xy = estimate_H_xy(1.0, 1.0, x, y, 8.0, 0.01, reps, seed);
        CHECK(h_xy.value <=
              std::min(std::exp(-x) * h_cont.value, std::exp(-y) * h_d.value) + 1e-14);
    }
}

TEST_CASE("H^{x,y} with d equal to the mesh step collapses to the marginal") {
    // m_grid == m_cont, so the joint estimator equals e^{-max(x,y)} H_alpha
    // path for path.
    const std::uint64_t seed = 99;
    const auto h_cont = estimate_H_alpha(1.0, 8.0, 0.01, 300, seed);
    const auto h_xy = estimate_H_xy(1.0, 0.01, 0.3, 0.3, 8.0, 0.01, 300, seed);
    CHECK(h_xy.value == Catch::Approx(std::exp(-0.3) * h_cont.value).epsilon(1e-12));
}

TEST_CASE("tilted estimator: alpha = 2 closed form with near-zero variance") {
    // For alpha = 2 the drifted field is exp(sqrt(2) N u - u^2); the
    // max/sum ratio is 1/sqrt(pi) per path up to mesh error, so the
    // estimate is essentially deterministic.
    const auto est = estimate_H_alpha_tilted(2.0, 8.0, 0.01, 50, 7);
    CHECK(est.value == Catch::Approx(1.0 / std::sqrt(std::acos(-1.0))).margin(0.002));
    CHECK(est.stderr_value < 1e-3);
}

TEST_CASE("tilted estimator: alpha = 1 mesh-level constant") {
    // The mesh-h constant H_{h,1} rises to H_1 = 1 as h -> 0; at
    // h = 0.005 it sits near 0.945.
    const auto est = estimate_H_alpha_tilted(1.0, 16.0, 0.005, 4000, 11);
    CHECK(est.value > 0.90);
    CHECK(est.value < 0.98);
    CHECK(est.stderr_value < 0.01);
}

TEST_CASE("tilted grid estimator: exact degenerate and reference values") {
    // d far beyond the effective support: only u = 0 matters, value 1/d.
    const auto degenerate = estimate_H_d_alpha_tilted(1.0, 50.0, 32.0, 20, 3);
    CHECK(degenerate.value == Catch::Approx(1.0 / 50.0).epsilon(1e-9));

    // H_{1,1} reference (pinned by long oracle runs at 0.4446(9)).
    const auto unit = estimate_H_d_alpha_tilted(1.0, 1.0, 32.0, 4000, 5);
    CHECK(unit.value == Catch::Approx(0.4446).margin(0.012));
}

TEST_CASE("tilted extrapolation shares paths and brackets the intercept") {
    const auto ext = extrapolate_H_alpha_tilted(1.0, {4.0, 8.0, 16.0}, 0.01, 3000, 17);
    REQUIRE(ext.windows.size() == 3);
    CHECK(ext.windows[0].lambda == 4.0);
    CHECK(ext.windows[2].lambda == 16.0);
    // Finite windows overestimate; the 1/lambda intercept lies below.
    CHECK(ext.extrapolated.value <= ext.windows[0].value + 1e-12);
    CHECK(ext.extrapolated.value > 0.8);
    CHECK(ext.extrapolated.value < 1.05);
    CHECK(std::isfinite(ext.fit_residual));

    // Determinism.
    const auto again = extrapolate_H_alpha_tilted(1.0, {4.0, 8.0, 16.0}, 0.01, 3000, 17);
    CHECK(again.extrapolated.value == ext.extrapolated.value);
}

TEST_CASE("tilted H table: identities, bounds and shape") {
    const auto build =
        build_H_table_tilted(1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 0.25, 16.0, 3000, 23);
    const HTable& table = build.table;
    REQUIRE(table.nx == 9);
    REQUIRE(table.ny == 9);

    // Shared-path constants at their references (mesh 0.01 fine constant
    // near 0.923, unit-grid constant near 0.445).
    CHECK(build.h_alpha.value == Catch::Approx(0.923).margin(0.02));
    CHECK(build.h_d_alpha.value == Catch::Approx(0.4446).margin(0.015));

    for (std::size_t ix = 0; ix < table.nx; ++ix) {
        const double x = table.x0 + 0.25 * static_cast<double>(ix);
        for (std::size_t iy = 0; iy < table.ny; ++iy) {
            const double y = table.y0 + 0.25 * static_cast<double>(iy);
            const double v = table.cell(ix, iy);
            CHECK(v >= 0.0);
            CHECK(v <= table.bound(x, y) + 1e-12);
            if (ix > 0) CHECK(v <= table.cell(ix - 1, iy) + 1e-12);
            if (iy > 0) CHECK(v <= table.cell(ix, iy - 1) + 1e-12);
        }
    }

    // Diagonal identity H^{x,x} = e^{-x} H_{d,alpha}.
    for (std::size_t i = 0; i < table.nx; ++i) {
        const double x = table.x0 + 0.25 * static_cast<double>(i);
        CHECK(table.cell(i, i) ==
              Catch::Approx(std::exp(-x) * build.h_d_alpha.value).margin(0.03));
    }

}

TEST_CASE("estimator preconditions") {
    CHECK_THROWS_AS(sample_drifted_maxima(2.5, 0.0, 8.0, 0.01, 10, 1),
                    AlphaOutOfRange);
    CHECK_THROWS_AS(sample_drifted_maxima(1.0, 0.0, -1.0, 0.01, 10, 1), Error);
    CHECK_THROWS_AS(sample_drifted_maxima(1.0, 0.0, 8.0, 0.05, 10, 1), MeshTooCoarse);
    CHECK_THROWS_AS(estimate_H_d_alpha(1.0, 0.0, 8.0, 10, 1), Error);
    CHECK_THROWS_AS(extrapolate_H_alpha(1.0, {4.0}, 0.01, 10, 1), Error);
    CHECK_THROWS_AS(extrapolate_H_alpha_tilted(1.0, {4.0}, 0.01, 10, 1), Error);
    CHECK_THROWS_AS(estimate_H_alpha_tilted(1.0, 8.0, 0.01, 0, 1), Error);
    CHECK_THROWS_AS(
        build_H_table_tilted(1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 0.5, 8.0, 10, 1), Error);
    CHECK_THROWS_AS(
        build_H_table_tilted(1.0, 0.0, -1.0, 1.0, -1.0, 1.0, 0.25, 8.0, 10, 1), Error);
    CHECK_THROWS_AS(build_H_table(1.0, 1.0, -1.0, 1.0, -1.0, 1.0, 0.5, 8.0, 10, 1),
                    Error);
}
