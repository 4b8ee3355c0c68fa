#pragma once

#include <stdexcept>
#include <string>

namespace adpsgd {

// Thrown when a ring/matrix order is outside the valid range.
struct InvalidOrderError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown on mismatched matrix/permutation dimensions.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Thrown when a closed form is requested outside its stated regime.
struct OutOfRegimeError : std::domain_error {
    using std::domain_error::domain_error;
};

// Thrown on eigensolver failure or non-finite numerical input.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a synchronous step is entered with desynchronized models.
struct SyncViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a requested staleness exceeds the history buffer.
struct StalenessOverflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when an operation is invoked on an unusable object (e.g. empty dataset).
struct InvalidStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on malformed run configuration files.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace adpsgd
