#pragma once

#include <Eigen/Core>

namespace tailrisk {

using Real = double;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace detail {

inline Real pairwise_sum(const Real* data, Index n) {
    // Tree reduction; deterministic for a fixed partition plan and better
    // conditioned than left-to-right accumulation on long Monte Carlo sums.
    if (n <= 8) {
        Real acc = 0.0;
        for (Index i = 0; i < n; ++i) acc += data[i];
        return acc;
    }
    const Index half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

} // namespace detail

inline Real pairwise_sum(const Vec& v) { return detail::pairwise_sum(v.data(), v.size()); }

} // namespace tailrisk
