#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tailrisk/dist.hpp"
#include "tailrisk/errors.hpp"

using namespace tailrisk;

namespace {

DistributionModel std_gaussian(Index d) {
    return DistributionModel::gaussian(Vec::Zero(d), Mat::Identity(d, d));
}

} // namespace

TEST_CASE("sampling is deterministic given the stream state") {
    const auto dist = std_gaussian(2);
    RngStream a(1234, 7), b(1234, 7);
    const Mat xa = sample(dist, a, 3);
    const Mat xb = sample(dist, b, 3);
    CHECK(xa.rows() == 3);
    CHECK(xa.cols() == 2);
    CHECK((xa.array() == xb.array()).all()); // bit-exact

    const auto weib = DistributionModel::weibull_iid(0.6, 1.0, 3);
    RngStream c(99, 0), d(99, 0);
    CHECK((sample(weib, c, 5).array() == sample(weib, d, 5).array()).all());
}

TEST_CASE("weibull marginal CDF at 1 matches 1 - exp(-1)") {
    const auto dist = DistributionModel::weibull_iid(0.6, 1.0, 2);
    RngStream rng(7, 0);
    const Mat x = sample(dist, rng, 100000);
    const Real frac = (x.col(0).array() <= 1.0).cast<Real>().mean();
    CHECK(frac == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.016));
}

TEST_CASE("gaussian sample mean obeys the LLN") {
    Vec m(2);
    m << 1.0, 2.0;
    const auto dist = DistributionModel::gaussian(m, Mat::Identity(2, 2));
    RngStream rng(5, 1);
    const Mat x = sample(dist, rng, 100000);
    CHECK(std::abs(x.col(0).mean() - 1.0) < 0.02);
    CHECK(std::abs(x.col(1).mean() - 2.0) < 0.02);
}

TEST_CASE("log densities at frozen points") {
    const auto g1 = std_gaussian(1);
    CHECK(log_density(g1, Vec::Zero(1)) == doctest::Approx(-0.9189385332046727).epsilon(1e-12));

    const auto exp1 = DistributionModel::weibull_iid(1.0, 1.0, 1);
    Vec two(1);
    two << 2.0;
    CHECK(log_density(exp1, two) == doctest::Approx(-2.0).epsilon(1e-12));

    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 2);
    Vec ones = Vec::Ones(2);
    CHECK(log_density(w, ones) == doctest::Approx(2.0 * (std::log(0.6) - 1.0)).epsilon(1e-12));
}

TEST_CASE("out-of-support points yield the -inf sentinel, not an error") {
    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 2);
    Vec x(2);
    x << 1.0, -0.5;
    CHECK(log_density(w, x) == -std::numeric_limits<Real>::infinity());
    x << 0.0, 1.0; // boundary is outside the open support
    CHECK(log_density(w, x) == -std::numeric_limits<Real>::infinity());
}

TEST_CASE("log_mgf closed form and domain errors") {
    const auto g1 = std_gaussian(1);
    Vec r(1);
    r << 2.0;
    CHECK(log_mgf(g1, r) == doctest::Approx(2.0).epsilon(1e-14));

    Vec m(2);
    m << 1.0, 0.0;
    const auto g2 = DistributionModel::gaussian(m, Mat::Identity(2, 2));
    CHECK(log_mgf(g2, Vec::Zero(2)) == 0.0);

    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 1);
    Vec rw(1);
    rw << 0.1;
    CHECK_THROWS_AS(log_mgf(w, rw), std::domain_error);
    CHECK(log_mgf(w, Vec::Zero(1)) == 0.0);
}

TEST_CASE("grad_log_mgf closed form; gradient at zero is the mean") {
    const auto g2 = std_gaussian(2);
    Vec r(2);
    r << 3.0, 0.0;
    CHECK((grad_log_mgf(g2, r) - r).cwiseAbs().maxCoeff() < 1e-14);

    Vec m = Vec::Ones(2);
    const auto g = DistributionModel::gaussian(m, 2.0 * Mat::Identity(2, 2));
    Vec r2(2);
    r2 << 1.0, 0.0;
    Vec expected(2);
    expected << 3.0, 1.0;
    CHECK((grad_log_mgf(g, r2) - expected).cwiseAbs().maxCoeff() < 1e-14);

    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 2);
    const Vec mean_w = grad_log_mgf(w, Vec::Zero(2));
    CHECK(mean_w[0] == doctest::Approx(std::tgamma(1.0 + 1.0 / 0.6)).epsilon(1e-12));
    CHECK((grad_log_mgf(g2, Vec::Zero(2))).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rate_conjugate closed form; unsupported kinds are flagged") {
    const auto g1 = std_gaussian(1);
    Vec x(1);
    x << 2.0;
    CHECK(rate_conjugate(g1, x) == doctest::Approx(2.0).epsilon(1e-14));

    Vec m(2);
    m << 0.3, -0.4;
    Mat cov(2, 2);
    cov << 1.5, 0.2, 0.2, 0.9;
    const auto g = DistributionModel::gaussian(m, cov);
    CHECK(rate_conjugate(g, m) == 0.0);

    const auto gd = DistributionModel::gaussian(Vec::Zero(1), 4.0 * Mat::Identity(1, 1));
    CHECK(rate_conjugate(gd, x) == doctest::Approx(0.5).epsilon(1e-14));

    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 1);
    CHECK_THROWS_AS(rate_conjugate(w, x), NotImplementedError);
}

TEST_CASE("tilting a gaussian shifts the mean by Sigma b") {
    const auto g2 = std_gaussian(2);
    Vec b(2);
    b << 3.0, 0.0;
    const auto tilted = tilt(g2, TiltParams{b});
    CHECK((tilted.gaussian_mean() - b).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((tilted.gaussian_cov() - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

    const auto same = tilt(g2, TiltParams{Vec::Zero(2)});
    CHECK((same.gaussian_mean().array() == 0.0).all());

    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 2);
    Vec bw = Vec::Constant(2, 0.1);
    CHECK_THROWS_AS(tilt(w, TiltParams{bw}), std::domain_error);
    CHECK(tilt(w, TiltParams{Vec::Zero(2)}).kind() == DistributionModel::Kind::WeibullIid);
}

TEST_CASE("tilted-gaussian sample mean matches grad_log_mgf") {
    Vec m(2);
    m << 0.4, -0.2;
    Mat cov(2, 2);
    cov << 1.2, 0.3, 0.3, 0.8;
    const auto g = DistributionModel::gaussian(m, cov);
    RngStream brng(2024, 0);
    const Index n = 100000;
    const Real max_sigma = std::sqrt(cov.diagonal().maxCoeff());
    for (int trial = 0; trial < 3; ++trial) {
        Vec b = brng.normals(2);
        const auto tilted = tilt(g, TiltParams{b});
        RngStream rng(2024, 10 + trial);
        const Mat x = sample(tilted, rng, n);
        const Vec target = grad_log_mgf(g, b);
        const Vec gap = (x.colwise().mean().transpose() - target).cwiseAbs();
        CHECK(gap.maxCoeff() < 4.0 * max_sigma / std::sqrt(static_cast<Real>(n)));
    }
}

TEST_CASE("1-d densities integrate to one") {
    Vec m(1);
    m << 0.3;
    const auto g = DistributionModel::gaussian(m, 2.25 * Mat::Identity(1, 1));
    const Real mass_g = oracle::simpson(
        [&](Real x) {
            Vec v(1);
            v << x;
            return std::exp(log_density(g, v));
        },
        0.3 - 15.0, 0.3 + 15.0, 4000);
    CHECK(mass_g > 0.999);
    CHECK(mass_g < 1.001);

    // Weibull with shape < 1 has an integrable singularity at 0; integrate in
    // log-x so the substitution absorbs it.
    const auto w = DistributionModel::weibull_iid(0.6, 1.0, 1);
    const Real mass_w = oracle::simpson(
        [&](Real g_) {
            const Real x = std::exp(g_);
            Vec v(1);
            v << x;
            return std::exp(log_density(w, v)) * x;
        },
        std::log(1e-9), std::log(70.0), 20000);
    CHECK(mass_w > 0.999);
    CHECK(mass_w < 1.001);
}

TEST_CASE("model construction rejects bad parameters") {
    Mat bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0; // indefinite
    CHECK_THROWS_AS(DistributionModel::gaussian(Vec::Zero(2), bad), std::invalid_argument);
    CHECK_THROWS_AS(DistributionModel::weibull_iid(-1.0, 1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(DistributionModel::weibull_iid(0.6, 1.0, 0), std::invalid_argument);
    const auto g = std_gaussian(2);
    RngStream rng(1, 0);
    CHECK_THROWS_AS(sample(g, rng, 0), std::invalid_argument);
}
