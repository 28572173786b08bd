#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tailrisk/errors.hpp"
#include "tailrisk/loss.hpp"

using namespace tailrisk;

namespace {

LossModel two_piece() {
    Mat a1 = Mat::Identity(2, 2);
    Mat a2 = -Mat::Identity(2, 2);
    return LossModel::max_affine({a1, a2});
}

Vec vec2(Real a, Real b) {
    Vec v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("loss values at frozen points") {
    const auto lin = LossModel::linear_portfolio();
    CHECK(loss(lin, vec2(1.0, 2.0), vec2(0.5, 0.5)) == doctest::Approx(-1.5).epsilon(1e-14));

    const auto ma = two_piece();
    CHECK(loss(ma, vec2(1.0, 2.0), vec2(1.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-14));

    const auto quad = LossModel::quadratic(Mat::Identity(2, 2), Vec::Zero(2));
    Vec theta1(1);
    theta1 << 1.0;
    CHECK(loss(quad, vec2(1.0, 2.0), theta1) == doctest::Approx(5.0).epsilon(1e-14));

    CHECK_THROWS_AS(loss(lin, vec2(1.0, 2.0), Vec::Ones(3)), std::invalid_argument);
}

TEST_CASE("loss_batch agrees with pointwise loss") {
    const auto ma = two_piece();
    Mat pts(3, 2);
    pts << 1.0, 2.0, -0.5, 0.25, 0.0, 0.0;
    const Vec theta = vec2(0.3, 0.7);
    const Vec batch = loss_batch(ma, pts, theta);
    for (Index i = 0; i < 3; ++i)
        CHECK(batch[i] == doctest::Approx(loss(ma, pts.row(i).transpose(), theta)).epsilon(1e-14));
}

TEST_CASE("subgradients and the lowest-index tie-break") {
    const auto lin = LossModel::linear_portfolio();
    const Vec g = loss_subgrad_theta(lin, vec2(1.0, 2.0), vec2(0.1, 0.9));
    CHECK((g - vec2(-1.0, -2.0)).cwiseAbs().maxCoeff() == 0.0);

    const auto ma = two_piece();
    const Vec g1 = loss_subgrad_theta(ma, vec2(1.0, 2.0), vec2(1.0, 0.0));
    CHECK((g1 - vec2(1.0, 2.0)).cwiseAbs().maxCoeff() == 0.0); // piece 1 active

    // At x = 0 both pieces tie; the first must win.
    const Vec g_tie = loss_subgrad_theta(ma, Vec::Zero(2), vec2(0.7, 0.3));
    CHECK((g_tie.array() == 0.0).all());
}

TEST_CASE("growth rates per kind") {
    CHECK(growth_rate(LossModel::linear_portfolio()) == 1.0);
    CHECK(growth_rate(two_piece()) == 1.0);
    CHECK(growth_rate(LossModel::quadratic(Mat::Identity(2, 2), Vec::Zero(2))) == 2.0);
}

TEST_CASE("orthogonal monotonicity checker") {
    // Nonnegative pieces with theta >= 0: coordinatewise monotone, no violations.
    Mat a1(2, 2), a2(2, 2);
    a1 << 1.0, 0.0, 0.0, 1.0;
    a2 << 1.2, 0.1, 0.2, 0.6;
    const auto mono = LossModel::max_affine({a1, a2});
    RngStream rng(11, 0);
    const auto rep = validate_orthogonal_monotone(mono, vec2(0.5, 0.5), 0.5, 4000, rng);
    CHECK(rep.checked > 100);
    CHECK(rep.violations == 0);

    // -theta'x with theta >= 0 is decreasing in x; the excess set is a lower
    // set, so increasing x must produce violations.
    const auto lin = LossModel::linear_portfolio();
    RngStream rng2(12, 0);
    const auto rep2 = validate_orthogonal_monotone(lin, vec2(0.5, 0.5), 0.5, 4000, rng2);
    CHECK(rep2.violations > 0);

    RngStream rng3(13, 0);
    CHECK_THROWS_AS(validate_orthogonal_monotone(lin, vec2(0.5, 0.5), 0.5, 0, rng3),
                    std::invalid_argument);
}

TEST_CASE("subgradient inequality for convex-in-theta kinds") {
    RngStream rng(21, 0);
    const auto lin = LossModel::linear_portfolio();
    const auto ma = two_piece();
    const auto quad = LossModel::quadratic(Mat::Identity(2, 2), Vec::Ones(2));
    for (int t = 0; t < 100; ++t) {
        const Vec x = 2.0 * rng.normals(2);
        const Vec th = rng.normals(2);
        const Vec th2 = rng.normals(2);
        for (const LossModel* model : {&lin, &ma}) {
            const Vec g = loss_subgrad_theta(*model, x, th);
            CHECK(loss(*model, x, th2) >= loss(*model, x, th) + g.dot(th2 - th) - 1e-10);
        }
        Vec q1(1), q2(1);
        q1 << th[0];
        q2 << th2[0];
        const Vec gq = loss_subgrad_theta(quad, x, q1);
        CHECK(loss(quad, x, q2) >= loss(quad, x, q1) + gq.dot(q2 - q1) - 1e-10);
    }
}

TEST_CASE("growth-rate surrogate: l(n x, theta) / n^rho stabilizes") {
    RngStream rng(31, 0);
    const auto ma = two_piece();
    const auto quad = LossModel::quadratic(Mat::Identity(2, 2), Vec::Ones(2));
    const Vec x = rng.normals(2);
    const Vec th = rng.normals(2);
    Vec thq(1);
    thq << 0.7;

    auto scaled_gap = [&](const LossModel& model, const Vec& theta, Real rho, Real n) {
        const Real a = loss(model, n * x, theta) / std::pow(n, rho);
        const Real b = loss(model, 2.0 * n * x, theta) / std::pow(2.0 * n, rho);
        return std::abs(a - b);
    };

    Real prev_ma = scaled_gap(ma, th, 1.0, 16.0);
    const Real first_q = scaled_gap(quad, thq, 2.0, 16.0);
    Real prev_q = first_q;
    for (Real n = 32.0; n <= 1024.0; n *= 2.0) {
        // max_affine is positively homogeneous, so the gap is exactly 0.
        CHECK(scaled_gap(ma, th, 1.0, n) <= prev_ma + 1e-12);
        const Real gq = scaled_gap(quad, thq, 2.0, n);
        CHECK(gq <= prev_q + 1e-12);
        prev_ma = scaled_gap(ma, th, 1.0, n);
        prev_q = gq;
    }
    CHECK(prev_ma < 1e-10);
    CHECK(prev_q < first_q / 30.0); // gap halves with each doubling of n

}

TEST_CASE("max_affine with one piece equals the linear form") {
    Mat a(2, 2);
    a << 0.5, 1.5, -0.3, 0.2;
    const auto ma = LossModel::max_affine({a});
    RngStream rng(41, 0);
    for (int t = 0; t < 50; ++t) {
        const Vec x = rng.normals(2);
        const Vec th = rng.normals(2);
        CHECK(loss(ma, x, th) == doctest::Approx(th.dot(a * x)).epsilon(1e-12));
    }
    const auto coef = linear_coefficient(ma, vec2(0.5, 0.5), 2);
    REQUIRE(coef.has_value());
    CHECK((*coef - a.transpose() * vec2(0.5, 0.5)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("constraint feasibility is checked at construction") {
    auto c = DecisionConstraint::simplex_with_return(vec2(2.0, 1.0), 1.5);
    c.validate(2); // max mu >= t, feasible
    auto bad = DecisionConstraint::simplex_with_return(vec2(0.5, 0.9), 1.5);
    CHECK_THROWS_AS(bad.validate(2), FeasibilityError);
}
