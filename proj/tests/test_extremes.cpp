#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "maxdisc/extremes.hpp"

using namespace maxdisc;

TEST_CASE("known Pickands constants") {
    REQUIRE(known_pickands_constant(1.0).has_value());
    CHECK(*known_pickands_constant(1.0) == 1.0);
    REQUIRE(known_pickands_constant(2.0).has_value());
    CHECK(*known_pickands_constant(2.0) ==
          Catch::Approx(1.0 / std::sqrt(std::acos(-1.0))).epsilon(1e-15));
    CHECK_FALSE(known_pickands_constant(1.5).has_value());
}

TEST_CASE("normalizing constants at T = e^8, alpha = 1, C = 1, H = 1") {
    // Golden values computed independently from the closed forms
    //   a_T = 4, b_T = 4 + ln((2 pi)^{-1/2} * 4)/4,
    //   b_T^delta = 4 + ln((2 pi)^{-1/2} / (0.25 * 4))/4.
    const ComponentParams comp{1.0, 1.0, 0.0};
    const auto constants =
        normalizers(std::exp(8.0), comp, 0.25, GridRegime::Sparse, 1.0);
    CHECK(constants.a_T == Catch::Approx(4.0).epsilon(1e-14));
    CHECK(constants.b_T == Catch::Approx(4.116838956978804).epsilon(1e-12));
    CHECK(constants.b_T_delta == Catch::Approx(3.770265366698832).epsilon(1e-12));
    CHECK_FALSE(constants.b_dT.has_value());
    CHECK(constants.grid_centering(GridRegime::Sparse) == constants.b_T_delta);
    // Without a grid-spacing constant a dense grid centers at b_T.
    CHECK(constants.grid_centering(GridRegime::Dense) == constants.b_T);
    CHECK_THROWS_AS(constants.grid_centering(GridRegime::Pickands), RegimeMismatch);
}

TEST_CASE("normalizers with alpha = 2 and supplied grid constant") {
    const ComponentParams comp{2.0, 1.0, 0.0};
    const double h2 = 1.0 / std::sqrt(std::acos(-1.0));
    const auto constants =
        normalizers(std::exp(8.0), comp, 0.25, GridRegime::Pickands, h2, 0.4);
    // alpha = 2: kernel factor C^{1/2} a^0 = 1.
    CHECK(constants.b_T == Catch::Approx(3.627174130967657).epsilon(1e-12));
    REQUIRE(constants.b_dT.has_value());
    CHECK(*constants.b_dT ==
          Catch::Approx(4.0 + std::log(kInvSqrt2Pi * 0.4) / 4.0).epsilon(1e-12));
    CHECK(constants.grid_centering(GridRegime::Pickands) == *constants.b_dT);
    // A dense grid with a supplied spacing constant refines b_T.
    CHECK(constants.grid_centering(GridRegime::Dense) == *constants.b_dT);
}

TEST_CASE("normalizers preconditions") {
    const ComponentParams comp{1.0, 1.0, 0.0};
    CHECK_THROWS_AS(normalizers(5.0, comp, 0.25, GridRegime::Sparse, 1.0),
                    HorizonTooSmall);
    CHECK_THROWS_AS(
        normalizers(std::exp(8.0), comp, 0.25, GridRegime::Pickands, 1.0),
        MissingConstant);
}

TEST_CASE("grid points and delta snapping") {
    const MeshSpec mesh{0.01, 101};  // horizon 1
    const auto snapped = snap_delta(0.034, mesh);
    CHECK(snapped.value == Catch::Approx(0.03).margin(1e-15));
    CHECK(snapped.relative_error == Catch::Approx(0.004 / 0.034).epsilon(1e-9));

    const auto indices = grid_points(snapped.value, mesh);
    REQUIRE(indices.size() == 34);  // 0, 3, 6, ..., 99
    CHECK(indices.front() == 0);
    CHECK(indices[1] == 3);
    CHECK(indices.back() == 99);

    // A delta below the mesh step snaps up to one step.
    CHECK(snap_delta(0.001, mesh).value == Catch::Approx(0.01));
    CHECK_THROWS_AS(grid_points(0.001, mesh), DeltaBelowMesh);
}

TEST_CASE("joint maxima and normalization") {
    PathEnsemble ens;
    ens.mesh = MeshSpec{1.0, 5};
    ens.paths = {{0.1, 0.9, 0.4, -0.2, 0.3}, {1.5, -0.5, 2.0, 0.0, -1.0}};
    const std::vector<std::size_t> grid = {0, 2, 4};

    const RawMaxima raw = joint_maxima(ens, grid);
    REQUIRE(raw.m_cont.size() == 2);
    CHECK(raw.m_cont[0] == 0.9);
    CHECK(raw.m_grid[0] == 0.4);  // max over indices {0,2,4}
    CHECK(raw.m_cont[1] == 2.0);
    CHECK(raw.m_grid[1] == 2.0);
    CHECK(raw.m_grid[0] <= raw.m_cont[0]);

    NormalizationConstants c;
    c.a_T = 2.0;
    c.b_T = 1.0;
    c.b_T_delta = 0.5;
    const std::vector<NormalizationConstants> constants = {c, c};
    const MaxSample sample = normalize_maxima(raw, constants, GridRegime::Sparse);
    CHECK(sample.x_hat[0] == Catch::Approx(2.0 * (0.9 - 1.0)));
    CHECK(sample.y_hat[0] == Catch::Approx(2.0 * (0.4 - 0.5)));
    CHECK(sample.x_hat[1] == Catch::Approx(2.0 * (2.0 - 1.0)));

    CHECK_THROWS_AS(normalize_maxima(raw, {c}, GridRegime::Sparse),
                    DimensionMismatch);
    CHECK_THROWS_AS(joint_maxima(ens, {}), Error);
}
