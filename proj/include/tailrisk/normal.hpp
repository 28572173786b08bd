#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tailrisk/types.hpp"

namespace tailrisk {

inline Real norm_pdf(Real x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline Real norm_cdf(Real x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Inverse standard normal CDF: Acklam's rational approximation polished with
/// one Halley step, accurate to ~1e-15 over (0,1).
inline Real norm_ppf(Real p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_ppf: p must lie in (0,1)");

    static constexpr Real a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr Real b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
    static constexpr Real c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr Real d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};

    const Real p_low = 0.02425;
    Real x;
    if (p < p_low) {
        const Real q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const Real q = p - 0.5;
        const Real r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const Real q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement.
    const Real e = norm_cdf(x) - p;
    const Real u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

/// E(L - u)^+ for L ~ N(mu, sigma^2).
inline Real gaussian_expected_excess(Real mu, Real sigma, Real u) {
    if (sigma <= 0.0) return std::max(mu - u, 0.0);
    const Real z = (u - mu) / sigma;
    return sigma * (norm_pdf(z) - z * (1.0 - norm_cdf(z)));
}

/// Tail quantile of L ~ N(mu, sigma^2) at level beta: P(L >= v) = beta.
inline Real gaussian_var(Real mu, Real sigma, Real beta) {
    return mu + sigma * norm_ppf(1.0 - beta);
}

/// CVaR of L ~ N(mu, sigma^2) at tail level beta.
inline Real gaussian_cvar(Real mu, Real sigma, Real beta) {
    return mu + sigma * norm_pdf(norm_ppf(1.0 - beta)) / beta;
}

} // namespace tailrisk
