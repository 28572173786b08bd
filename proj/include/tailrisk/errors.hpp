#pragma once

#include <stdexcept>
#include <string>

namespace tailrisk {

/// Requested operation has no implementation for the given model kind.
struct NotImplementedError : std::logic_error {
    using std::logic_error::logic_error;
};

/// A weighted batch carries too little effective mass for the requested tail level.
struct DegenerateBatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Point-level degeneracy (e.g. the self-structuring Jacobian at x = 0).
struct DegeneratePointError : std::domain_error {
    using std::domain_error::domain_error;
};

/// The decision constraint set is empty.
struct FeasibilityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Experiment configuration could not be parsed or validated.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace tailrisk
