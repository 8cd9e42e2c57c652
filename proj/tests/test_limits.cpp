#include <cmath>
#include <functional>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "maxdisc/limits.hpp"
#include "maxdisc/quadrature.hpp"

using namespace maxdisc;

namespace {

Eigen::MatrixXd cross_for(const std::vector<ComponentParams>& comps,
                          double off_diag = 0.0) {
    const auto p = static_cast<Eigen::Index>(comps.size());
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(p, p, off_diag);
    for (Eigen::Index k = 0; k < p; ++k)
        r(k, k) = comps[static_cast<std::size_t>(k)].r_diag;
    return r;
}

// Independent oracle: adaptive Simpson quadrature of
// E_Z[ exp(-(e^{-x} + e^{-y}) e^{-r + sqrt(2r) Z}) ] over Z ~ N(0,1).
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double whole, double tol,
                        int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

double sparse_oracle_p1(double x, double y, double r) {
    const double inv_sqrt_2pi = 0.3989422804014326779399461;
    const double weight = std::exp(-x) + std::exp(-y);
    const auto integrand = [&](double z) {
        return inv_sqrt_2pi * std::exp(-0.5 * z * z) *
               std::exp(-weight * std::exp(-r + std::sqrt(2.0 * r) * z));
    };
    return integrate(integrand, -12.0, 12.0, 1e-13);
}

}  // namespace

TEST_CASE("Gauss-Hermite rule reproduces normal moments") {
    const GaussHermiteRule rule = gauss_hermite_normal(20);
    double m0 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        m0 += rule.weights[i];
        m2 += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
        m4 += rule.weights[i] * std::pow(rule.nodes[i], 4);
    }
    CHECK(m0 == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(m2 == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == Catch::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("inverse normal CDF and Halton sequence") {
    for (double x : {-3.0, -1.0, -0.1, 0.0, 0.5, 2.5}) {
        const double p = 0.5 * std::erfc(-x / std::sqrt(2.0));
        CHECK(inverse_normal_cdf(p) == Catch::Approx(x).margin(1e-9));
    }
    CHECK(halton(1, 2) == Catch::Approx(0.5));
    CHECK(halton(2, 2) == Catch::Approx(0.25));
    CHECK(halton(3, 2) == Catch::Approx(0.75));
    CHECK(halton(1, 3) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("exponent identities: h(x,x) = f(x,x)/2 and h <= f") {
    const std::vector<ComponentParams> comps = {{1.0, 1.0, 0.5}, {2.0, 0.5, 0.3}};
    const auto model = build_model(comps, cross_for(comps, 0.1));
    Eigen::VectorXd z(2);
    z << 0.7, -0.4;
    const std::vector<double> x = {0.3, -0.2}, y = {1.1, 0.6};
    CHECK(h_exponent(x, x, z, model) ==
          Catch::Approx(f_exponent(x, x, z, model) / 2.0).epsilon(1e-14));
    CHECK(h_exponent(x, y, z, model) <= f_exponent(x, y, z, model));
    CHECK_THROWS_AS(f_exponent({0.0}, y, z, model), DimensionMismatch);
}

TEST_CASE("degenerate limit (r = 0) is the exact double-Gumbel product") {
    const std::vector<ComponentParams> comps = {{1.0, 1.0, 0.0}};
    const auto model = build_model(comps, cross_for(comps));
    LimitSpec spec;
    spec.regime = LimitRegime::Sparse;
    spec.model = &model;
    for (double x : {-1.0, 0.0, 2.0}) {
        const auto value = limit_cdf(spec, {x}, {x});
        CHECK(value.value ==
              Catch::Approx(std::exp(-2.0 * std::exp(-x))).epsilon(1e-14));
        CHECK(value.error == 0.0);
    }
}

TEST_CASE("sparse p=1 r=0.5 limit matches the adaptive-quadrature oracle") {
    const std::vector<ComponentParams> comps = {{1.0, 1.0, 0.5}};
    const auto model = build_model(comps, cross_for(comps));
    LimitSpec spec;
    spec.regime = LimitRegime::Sparse;
    spec.model = &model;

    // Golden values pinned beforehand by an independent adaptive
    // quadrature (SciPy quad, epsabs 1e-13) on the same integrand.
    const double golden[4][4] = {
        {0.125287656045826, 0.191843570082237, 0.230440846743338, 0.247715139775788},
        {0.191843570082237, 0.332484900847269, 0.430496086352260, 0.479386029726796},
        {0.230440846743338, 0.430496086352260, 0.589891416399991, 0.677797066501865},
        {0.247715139775788, 0.479386029726796, 0.677797066501865, 0.794746845992275}};
    const double lattice[4] = {-1.0, 0.0, 1.0, 2.0};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            const auto value = limit_cdf(spec, {lattice[i]}, {lattice[j]});
            CHECK(value.value == Catch::Approx(golden[i][j]).margin(1e-9));
            // In-test oracle agrees with both.
            CHECK(sparse_oracle_p1(lattice[i], lattice[j], 0.5) ==
                  Catch::Approx(golden[i][j]).margin(1e-9));
            CHECK(value.error < 1e-7);
        }
    }
}

TEST_CASE("dense p=2 limit matches pinned goldens and the corollary marginal") {
    const std::vector<ComponentParams> comps = {{1.0, 1.0, 0.5}, {1.0, 1.0, 0.5}};
    const auto model = build_model(comps, cross_for(comps, 0.25));
    LimitSpec spec;
    spec.regime = LimitRegime::Dense;
    spec.model = &model;

    const double lattice[4] = {-1.0, 0.0, 1.0, 2.0};
    const double golden_diag[4] = {0.094228992013, 0.296438442852, 0.568448249036,
                                   0.787377788477};
    const auto at = [&](double x, double y) {
        return limit_cdf(spec, {x, x}, {y, y});
    };
    for (int i = 0; i < 4; ++i) {
        const auto value = at(lattice[i], lattice[i]);
        CHECK(value.value == Catch::Approx(golden_diag[i]).margin(1e-7));
    }
    // Dense limit depends on (x, y) only through min(x, y).
    CHECK(at(0.0, -1.0).value == Catch::Approx(golden_diag[0]).margin(1e-7));
    CHECK(at(-1.0, 2.0).value == Catch::Approx(golden_diag[0]).margin(1e-7));

    // Corollary marginal at (x, anything) equals dense at (x, x).
    LimitSpec marginal = spec;
    marginal.regime = LimitRegime::CorollaryMarginal;
    for (int i = 0; i < 4; ++i)
        CHECK(limit_cdf(marginal, {lattice[i], lattice[i]}, {-5.0, -5.0}).value ==
              Catch::Approx(at(lattice[i], lattice[i]).value).epsilon(1e-12));
}

TEST_CASE("limit CDF is nondecreasing in each coordinate, dense >= sparse") {
    const std::vector<ComponentParams> comps = {{1.0, 1.0, 0.5}};
    const auto model = build_model(comps, cross_for(comps));
    LimitSpec sparse;
    sparse.regime = LimitRegime::Sparse;
    sparse.model = &model;
    LimitSpec dense = sparse;
    dense.regime = LimitRegime::Dense;

    double prev = 0.0;
    for (double x : {-2.0, -1.0, 0.0, 1.0, 3.0}) {
        const double v = limit_cdf(sparse, {x}, {0.5}).value;
        CHECK(v >= prev);
        prev = v;
        CHECK(limit_cdf(dense, {x}, {0.5}).value >= v - 1e-12);
    }
}

TEST_CASE("latent rank above 3 falls back to QMC and factorizes") {
    // Four components with independent latent variables: the limit is
    // the product of the four marginal mixtures.
    const std::vector<ComponentParams> comps(4, ComponentParams{1.0, 1.0, 0.5});
    const auto model = build_model(comps, cross_for(comps, 0.0));
    REQUIRE(model.latent_rank() == 4);
    LimitSpec spec;
    spec.regime = LimitRegime::Sparse;
    spec.model = &model;

    const std::vector<ComponentParams> single = {{1.0, 1.0, 0.5}};
    const auto model1 = build_model(single, cross_for(single));
    LimitSpec spec1;
    spec1.regime = LimitRegime::Sparse;
    spec1.model = &model1;

    const std::vector<double> x(4, 0.5), y(4, 1.0);
    const auto joint = limit_cdf(spec, x, y);
    const double marginal = limit_cdf(spec1, {0.5}, {1.0}).value;
    const double expected = std::pow(marginal, 4);
    CHECK(joint.value ==
          Catch::Approx(expected).margin(std::max(4.0 * joint.error, 2e-3)));

    LimitOptions no_qmc;
    no_qmc.allow_qmc = false;
    CHECK_THROWS_AS(limit_cdf(spec, x, y, no_qmc), QuadratureUnavailable);
}

TEST_CASE("HTable interpolation, bounds and shape enforcement") {
    HTable table;
    table.x0 = 0.0;
    table.y0 = 0.0;
    table.pitch = 0.25;
    table.nx = 3;
    table.ny = 3;
    table.h_alpha = 1.0;
    table.h_d_alpha = 1.0;
    // Linear surface v = 0.5 - 0.1 x - 0.2 y: bilinear must be exact.
    table.values.resize(9);
    table.stderrs.assign(9, 0.0);
    for (std::size_t ix = 0; ix < 3; ++ix)
        for (std::size_t iy = 0; iy < 3; ++iy)
            table.values[ix * 3 + iy] =
                0.5 - 0.1 * (0.25 * static_cast<double>(ix)) -
                0.2 * (0.25 * static_cast<double>(iy));
    CHECK(table.eval(0.1, 0.3) ==
          Catch::Approx(0.5 - 0.1 * 0.1 - 0.2 * 0.3).epsilon(1e-14));
    // Outside the lattice: the inclusion-exclusion bound.
    CHECK(table.eval(-1.0, 0.0) == Catch::Approx(table.bound(-1.0, 0.0)));
    CHECK(table.eval(0.0, 9.0) == Catch::Approx(std::exp(-9.0)));

    // Corrupt a cell above the bound and break monotonicity, then
    // re-enforce the shape.
    table.values[4] = 5.0;
    table.enforce_shape();
    for (std::size_t ix = 0; ix < 3; ++ix) {
        for (std::size_t iy = 0; iy < 3; ++iy) {
            const double x = 0.25 * static_cast<double>(ix);
            const double y = 0.25 * static_cast<double>(iy);
            CHECK(table.cell(ix, iy) <= table.bound(x, y) + 1e-15);
            if (ix > 0) CHECK(table.cell(ix, iy) <= table.cell(ix - 1, iy) + 1e-15);
            if (iy > 0) CHECK(table.cell(ix, iy) <= table.cell(ix, iy - 1) + 1e-15);
        }
    }
}

TEST_CASE("Pickands limit requires a table and rejects bound violations") {
    const std::vector<ComponentParams> comps = {{1.0, 1.0, 0.5}};
    const auto model = build_model(comps, cross_for(comps));
    LimitSpec spec;
    spec.regime = LimitRegime::Pickands;
    spec.model = &model;
    spec.h_alpha = 1.0;
    spec.h_d_alpha = 1.0;
    CHECK_THROWS_AS(limit_cdf(spec, {0.0}, {0.0}), MissingConstant);

    HTable bad;
    bad.x0 = bad.y0 = -1.0;
    bad.pitch = 0.25;
    bad.nx = bad.ny = 12;
    bad.h_alpha = bad.h_d_alpha = 1.0;
    bad.values.assign(144, 100.0);  // violates min(e^{-x}, e^{-y}) everywhere
    bad.stderrs.assign(144, 0.0);
    spec.h_table = &bad;
    CHECK_THROWS_AS(limit_cdf(spec, {0.5}, {0.5}), NegativeExponent);
}
