// error.hpp - exception types shared by the vacscan modules
#pragma once

#include <stdexcept>
#include <string>

namespace vacscan {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input values (non-positive velocity, mismatched grids, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

// Malformed or inconsistent configuration documents.
struct ConfigError : Error {
    using Error::Error;
};

// Fock-space truncation could not be made healthy.
struct TruncationError : Error {
    using Error::Error;
};

// Explicit integration left the physical domain.
struct InstabilityError : Error {
    using Error::Error;
};

// Calibration refused (too few points, degenerate model) or did not converge.
struct FitError : Error {
    using Error::Error;
};

}  // namespace vacscan
