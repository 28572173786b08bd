#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "tailrisk/types.hpp"

namespace tailrisk {

/// Deterministic random stream.
///
/// Streams are derived from a root seed plus context indices, so independent
/// workers (replications, epochs, pilot batches) draw without coordination and
/// the whole experiment is reproducible bit-for-bit from the root seed alone.
/// Samplers are implemented explicitly (Box-Muller, inverse CDF) instead of
/// through std:: distributions, whose output is implementation-defined.
class RngStream {
public:
    explicit RngStream(std::uint64_t root_seed, std::uint64_t stream_index = 0)
        : RngStream({root_seed, stream_index}) {}

    RngStream(std::initializer_list<std::uint64_t> ids) {
        std::vector<std::uint32_t> words;
        words.reserve(2 * ids.size());
        for (std::uint64_t id : ids) {
            words.push_back(static_cast<std::uint32_t>(id));
            words.push_back(static_cast<std::uint32_t>(id >> 32));
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    /// Uniform draw strictly inside (0,1); never returns an endpoint.
    Real uniform01() {
        return (static_cast<Real>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; one spare is cached per stream.
    Real normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const Real u1 = uniform01();
        const Real u2 = uniform01();
        const Real r = std::sqrt(-2.0 * std::log(u1));
        const Real a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    Vec normals(Index n) {
        Vec z(n);
        for (Index i = 0; i < n; ++i) z[i] = normal();
        return z;
    }

    /// Index draw from a discrete law given cumulative probabilities
    /// (cumulative[last] is expected to be 1 up to rounding).
    Index categorical(const Vec& cumulative) {
        const Real u = uniform01();
        for (Index i = 0; i + 1 < cumulative.size(); ++i) {
            if (u <= cumulative[i]) return i;
        }
        return cumulative.size() - 1;
    }

private:
    std::mt19937_64 engine_;
    Real spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace tailrisk
