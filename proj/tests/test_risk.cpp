#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tailrisk/dist.hpp"
#include "tailrisk/errors.hpp"
#include "tailrisk/is_selfstruct.hpp"
#include "tailrisk/normal.hpp"
#include "tailrisk/risk.hpp"

using namespace tailrisk;

namespace {

Vec vec2(Real a, Real b) {
    Vec v(2);
    v << a, b;
    return v;
}

// Single-asset batch whose losses are exactly the given values: points x with
// loss -theta'x = v at theta = (1) means x = -v.
WeightedSampleBatch batch_with_losses(const Vec& losses) {
    Mat pts(losses.size(), 1);
    pts.col(0) = -losses;
    return WeightedSampleBatch::saa(std::move(pts));
}

const Vec kThetaOne = Vec::Ones(1);

Vec losses_1_to_100() {
    Vec v(100);
    for (int i = 0; i < 100; ++i) v[i] = i + 1.0;
    return v;
}

} // namespace

TEST_CASE("excess objective F(x; u, theta)") {
    const auto lin = LossModel::linear_portfolio();
    // loss 3 at theta=(1): x = -3
    Vec x(1);
    x << -3.0;
    CHECK(excess_objective(lin, x, 2.0, kThetaOne, 0.1) == doctest::Approx(12.0).epsilon(1e-14));
    // loss <= u: F = u
    CHECK(excess_objective(lin, x, 5.0, kThetaOne, 0.1) == doctest::Approx(5.0).epsilon(1e-14));
    // beta = 1 reduces to the positive part
    Vec x5(1);
    x5 << -5.0;
    CHECK(excess_objective(lin, x5, 0.0, kThetaOne, 1.0) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("is_objective hand values and the SAA identity") {
    const auto lin = LossModel::linear_portfolio();

    // identity weights equal the SAA objective
    Vec losses(4);
    losses << 1.0, 2.0, 3.0, 4.0;
    auto batch = batch_with_losses(losses);
    const Real via_is = is_objective(batch, lin, 2.0, kThetaOne, 0.5);
    const Real via_saa = saa_objective(batch.points, lin, 2.0, kThetaOne, 0.5);
    CHECK(via_is == via_saa);
    CHECK(via_is == doctest::Approx(3.5).epsilon(1e-14)); // 2 + (1+2)/(4*0.5)

    // single weighted point: u + (1/(n beta)) * excess * L
    WeightedSampleBatch one;
    one.points = Mat::Constant(1, 1, -4.0); // loss 4
    one.log_weights = Vec::Constant(1, std::log(0.25));
    one.source = Eigen::VectorXi::Zero(1);
    CHECK(is_objective(one, lin, 2.0, kThetaOne, 0.5) == doctest::Approx(3.0).epsilon(1e-12));

    // -inf log-weights contribute zero mass
    one.log_weights[0] = -std::numeric_limits<Real>::infinity();
    CHECK(is_objective(one, lin, 2.0, kThetaOne, 0.5) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("saa_objective on the 1..100 ladder") {
    const auto lin = LossModel::linear_portfolio();
    const auto batch = batch_with_losses(losses_1_to_100());
    CHECK(saa_objective(batch.points, lin, 95.0, kThetaOne, 0.05) == doctest::Approx(98.0).epsilon(1e-13));
    CHECK(saa_objective(batch.points, lin, 96.0, kThetaOne, 0.05) == doctest::Approx(98.0).epsilon(1e-13));
    // single point with u above the loss
    Mat pt = Mat::Constant(1, 1, -1.0);
    CHECK(saa_objective(pt, lin, 7.0, kThetaOne, 0.5) == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("empirical VaR/CVaR: ladder, plateau tie-break, edge cases") {
    const auto lin = LossModel::linear_portfolio();
    const auto batch = batch_with_losses(losses_1_to_100());
    const auto est = empirical_var_cvar(batch, lin, kThetaOne, 0.05);
    CHECK(est.cvar == doctest::Approx(98.0).epsilon(1e-13));
    CHECK(est.var == doctest::Approx(95.0).epsilon(1e-13)); // smallest minimizer on the [95,96] plateau

    // beta near 1: CVaR approaches the sample mean
    const auto est_wide = empirical_var_cvar(batch, lin, kThetaOne, 0.999);
    CHECK(est_wide.var == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(est_wide.cvar == doctest::Approx(50.5).epsilon(0.01));

    // single sample
    Vec single(1);
    single << 13.5;
    const auto est_one = empirical_var_cvar(batch_with_losses(single), lin, kThetaOne, 0.3);
    CHECK(est_one.var == 13.5);
    CHECK(est_one.cvar == 13.5);

    // all-zero weights are degenerate
    WeightedSampleBatch dead = batch_with_losses(losses_1_to_100());
    dead.log_weights.setConstant(-std::numeric_limits<Real>::infinity());
    CHECK_THROWS_AS(empirical_var_cvar(dead, lin, kThetaOne, 0.05), DegenerateBatchError);
}

TEST_CASE("variational consistency: v-hat minimizes the objective over u") {
    const auto lin = LossModel::linear_portfolio();
    RngStream rng(17, 0);
    const auto dist = DistributionModel::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    // a weighted batch via the stretch sampler, to exercise nonuniform weights
    const auto params = SelfStructParams::make(1.0, 0.01, 1.0);
    const auto batch = sample_selfstruct(dist, params, rng, 400);

    const Real beta = 0.05;
    const auto est = empirical_var_cvar(batch, lin, kThetaOne, beta);

    Real grid_min = std::numeric_limits<Real>::infinity();
    const Vec losses = loss_batch(lin, batch.points, kThetaOne);
    const Real lo = losses.minCoeff() - 1.0, hi = losses.maxCoeff() + 1.0;
    for (int i = 0; i <= 20000; ++i) {
        const Real u = lo + (hi - lo) * i / 20000.0;
        grid_min = std::min(grid_min, is_objective(batch, lin, u, kThetaOne, beta));
    }
    CHECK(grid_min >= est.cvar - 1e-10);
    CHECK(est.cvar <= grid_min + 1e-6); // grid resolution slack on the other side
}

TEST_CASE("mean-CVaR combination") {
    const auto lin = LossModel::linear_portfolio();
    Vec losses(2);
    losses << 2.0, 4.0;
    const auto batch = batch_with_losses(losses);

    RiskSpec half{0.5, 0.5};
    CHECK(mean_cvar_objective(batch, lin, 3.0, kThetaOne, half) == doctest::Approx(3.5).epsilon(1e-13));

    RiskSpec pure{0.5, 0.0};
    CHECK(mean_cvar_objective(batch, lin, 3.0, kThetaOne, pure) ==
          doctest::Approx(is_objective(batch, lin, 3.0, kThetaOne, 0.5)).epsilon(1e-14));

    RiskSpec mean_only{0.5, 1.0};
    CHECK(mean_cvar_objective(batch, lin, 3.0, kThetaOne, mean_only) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("subgrad_G frozen values") {
    // loss theta'x via a single-piece max_affine
    const auto form = LossModel::max_affine({Mat(Mat::Identity(2, 2))});
    Vec x = vec2(1.0, 2.0);
    Vec th = vec2(1.0, 1.0);
    const Vec g = subgrad_G(form, x, 2.0, th, 0.1); // loss 3 >= 2
    CHECK(g[0] == doctest::Approx(-9.0).epsilon(1e-13));
    CHECK(g[1] == doctest::Approx(10.0).epsilon(1e-13));
    CHECK(g[2] == doctest::Approx(20.0).epsilon(1e-13));

    const Vec g_off = subgrad_G(form, x, 10.0, th, 0.1); // loss < u
    CHECK(g_off[0] == 1.0);
    CHECK(g_off.tail(2).cwiseAbs().maxCoeff() == 0.0);

    const Vec g_half = subgrad_G(form, x, 2.0, th, 0.5);
    CHECK(g_half[0] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("subgrad_G matches finite differences of F away from the kink") {
    const auto lin = LossModel::linear_portfolio();
    RngStream rng(23, 0);
    const Real beta = 0.2;
    int tested = 0;
    while (tested < 100) {
        const Vec x = rng.normals(2);
        const Vec th = rng.normals(2);
        const Real lv = loss(lin, x, th);
        const Real u = lv + (rng.uniform01() - 0.5) * 4.0;
        if (std::abs(lv - u) < 1e-3 * (1.0 + std::abs(lv))) continue; // keep FD off the kink
        ++tested;
        const Vec g = subgrad_G(lin, x, u, th, beta);
        Vec z(3);
        z << u, th[0], th[1];
        const Vec fd = oracle::fd_gradient(
            [&](const Vec& p) { return excess_objective(lin, x, p[0], p.tail(2), beta); }, z, 1e-6);
        for (Index i = 0; i < 3; ++i) {
            const Real scale = std::max(std::abs(fd[i]), 1.0);
            CHECK(std::abs(g[i] - fd[i]) / scale < 1e-4);
        }
    }
}

TEST_CASE("midpoint convexity of the weighted objective in (u, theta)") {
    const auto lin = LossModel::linear_portfolio();
    RngStream rng(29, 0);
    const auto dist = DistributionModel::gaussian(Vec::Zero(2), Mat::Identity(2, 2));
    const auto batch = WeightedSampleBatch::saa(sample(dist, rng, 200));
    for (int t = 0; t < 50; ++t) {
        const Real u1 = rng.normal(), u2 = rng.normal();
        const Vec t1 = rng.normals(2), t2 = rng.normals(2);
        const Real f1 = is_objective(batch, lin, u1, t1, 0.3);
        const Real f2 = is_objective(batch, lin, u2, t2, 0.3);
        const Real fm = is_objective(batch, lin, 0.5 * (u1 + u2), 0.5 * (t1 + t2), 0.3);
        CHECK(fm <= 0.5 * (f1 + f2) + 1e-10);
    }
}

TEST_CASE("unbiasedness: weighted batches agree with SAA within 4 SE") {
    const auto lin = LossModel::linear_portfolio();
    const auto dist = DistributionModel::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    const Real beta = 0.05;
    const Real u = norm_ppf(1.0 - beta);
    const int R = 200;
    const Index n = 400;

    Vec saa_vals(R), is_vals(R);
    const auto params = SelfStructParams::make(1.0, 0.02, 1.0); // a genuine stretch
    for (int r = 0; r < R; ++r) {
        RngStream rng_a(3100, r);
        saa_vals[r] =
            is_objective(WeightedSampleBatch::saa(sample(dist, rng_a, n)), lin, u, kThetaOne, beta);
        RngStream rng_b(3200, r);
        is_vals[r] = is_objective(sample_selfstruct(dist, params, rng_b, n), lin, u, kThetaOne, beta);
    }
    const Real mean_saa = saa_vals.mean();
    const Real mean_is = is_vals.mean();
    const Real se = std::sqrt((saa_vals.array() - mean_saa).square().sum() / (R - 1.0) / R +
                              (is_vals.array() - mean_is).square().sum() / (R - 1.0) / R);
    CHECK(std::abs(mean_is - mean_saa) < 4.0 * se);
}

TEST_CASE("closed-form gaussian CVaR oracle at 1e6 samples") {
    const auto lin = LossModel::linear_portfolio();
    Vec m(1);
    m << 0.1;
    const auto dist = DistributionModel::gaussian(m, 4.0 * Mat::Identity(1, 1));
    const Real beta = 0.05;
    // loss -theta'X with theta=(1): mu_L = -0.1, sigma_L = 2
    const Real analytic = gaussian_cvar(-0.1, 2.0, beta);
    RngStream rng(47, 0);
    const auto batch = WeightedSampleBatch::saa(sample(dist, rng, 1000000));
    const auto est = empirical_var_cvar(batch, lin, kThetaOne, beta);
    CHECK(std::abs(est.cvar - analytic) / std::abs(analytic) < 0.01);
}

TEST_CASE("batch append keeps per-point provenance") {
    auto b1 = WeightedSampleBatch::saa(Mat::Random(3, 2), 1);
    auto b2 = WeightedSampleBatch::saa(Mat::Random(2, 2), 2);
    b2.log_weights.setConstant(-0.5);
    b1.append(b2);
    CHECK(b1.n() == 5);
    CHECK(b1.source[0] == 1);
    CHECK(b1.source[4] == 2);
    CHECK(b1.log_weights[0] == 0.0);
    CHECK(b1.log_weights[4] == -0.5);
}
