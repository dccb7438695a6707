#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "rshjb/closed_form.hpp"
#include "rshjb/elliptic.hpp"
#include "rshjb/subsuper.hpp"
#include "rshjb/transforms.hpp"

using namespace rshjb;

namespace {

std::vector<double> dense_radii(double lo, double hi, int count) {
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
    return out;
}

}  // namespace

TEST_CASE("unit instance exponents and values") {
    const ClosedForm cf = build_closed_form(1, 1.0, 1.0, 1.0, 1.0);
    REQUIRE(cf.m1 == Catch::Approx(-0.5).margin(1e-14));
    REQUIRE(cf.m2 == Catch::Approx(-0.5).margin(1e-14));
    REQUIRE(cf.lambda1 == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(cf.lambda2 == Catch::Approx(1.0).margin(1e-14));
    for (double r : {0.0, 1.0, 2.5}) {
        REQUIRE(cf.z1(r) == Catch::Approx(0.5 * (r * r + 1.0)).epsilon(1e-13));
        REQUIRE(cf.z2(r) == Catch::Approx(0.5 * (r * r + 1.0)).epsilon(1e-13));
    }
}

TEST_CASE("exponents ignore the switching rates") {
    const ClosedForm a = build_closed_form(1, 1.0, 1.0, 1.0, 1.0);
    const ClosedForm b = build_closed_form(1, 1.0, 1.0, 2.0, 0.7);
    REQUIRE(a.m1 == b.m1);
    REQUIRE(a.m2 == b.m2);
    REQUIRE(a.lambda1 == Catch::Approx(b.lambda1).margin(1e-14));
    REQUIRE(a.lambda2 == Catch::Approx(b.lambda2).margin(1e-14));
}

TEST_CASE("exponents are negative and the values positive for any valid data") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ks(0.3, 3.0);
    std::uniform_real_distribution<double> as(0.1, 2.0);
    int built = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 1 + (trial % 4);
        ClosedForm cf;
        try {
            cf = build_closed_form(dim, ks(rng), ks(rng), as(rng), as(rng));
        } catch (const NonPositiveLambda&) {
            continue;  // outside the usable discount region
        }
        ++built;
        REQUIRE(cf.m1 < 0.0);
        REQUIRE(cf.m2 < 0.0);
        REQUIRE(cf.z1(0.0) > 0.0);
        REQUIRE(cf.z2(0.0) > 0.0);
        REQUIRE(cf.z1(0.0) == Catch::Approx(-cf.k1 * cf.m1).epsilon(1e-13));
    }
    REQUIRE(built >= 50);
}

TEST_CASE("identity residual stays at rounding level") {
    const ClosedForm unit = build_closed_form(1, 1.0, 1.0, 1.0, 1.0);
    const std::vector<double> spot{0.0, 0.3, 1.0, 2.5, 7.0};
    REQUIRE(verify_identity(unit, unit.model_params(), spot) < 1e-12);

    const ClosedForm asym = build_closed_form(2, 1.0, 2.0, 0.5, 0.3);
    REQUIRE(verify_identity(asym, asym.model_params(), spot) < 1e-10);
    REQUIRE(verify_identity(asym, asym.model_params(), dense_radii(0.0, 10.0, 1000)) < 1e-10);
}

TEST_CASE("identity residual detects a perturbed exponent") {
    const ClosedForm cf = build_closed_form(1, 1.0, 1.0, 1.0, 1.0);
    ClosedForm wrong = cf;
    wrong.m1 += 1e-3;
    const std::vector<double> spot{0.0, 0.3, 1.0, 2.5, 7.0};
    REQUIRE(verify_identity(wrong, cf.model_params(), spot) > 1e-4);
}

TEST_CASE("change of variables is consistent with the explicit solution") {
    const ClosedForm cf = build_closed_form(2, 1.0, 2.0, 0.5, 0.3);
    for (double r : dense_radii(0.0, 6.0, 200)) {
        REQUIRE(z_from_u(cf.u(r), cf.k1) == Catch::Approx(cf.z1(r)).margin(1e-12));
        REQUIRE(z_from_u(cf.v(r), cf.k2) == Catch::Approx(cf.z2(r)).margin(1e-12));
    }
}

TEST_CASE("numerical solve converges to the explicit field") {
    const ClosedForm cf = build_closed_form(2, 1.0, 2.0, 0.5, 0.3);
    const ModelParams p = cf.model_params();
    const SubCoeffs coeffs = solve_coeffs(p, growth_bound(p));
    auto [fields, report] = solve_ball(p, coeffs, RadialGrid::with_spacing(6.0, 1.0 / 32.0));
    REQUIRE(report.converged);
    double worst = 0.0;
    for (int j = 0; j <= fields.grid.n; ++j) {
        const double r = fields.grid.node(j);
        if (r > 3.0) break;
        worst = std::max(worst, std::abs(fields.u[j] - cf.u(r)));
        worst = std::max(worst, std::abs(fields.v[j] - cf.v(r)));
    }
    REQUIRE(worst < 5e-3);
}
