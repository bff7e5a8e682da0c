#pragma once

#include <stdexcept>
#include <string>

namespace qclus {

// Base for every library-raised failure. The CLI maps any qclus::error to
// exit code 1; everything else is a usage error (exit code 2) or a bug.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition or shape/dimension mismatch between arguments.
struct contract_error : error {
    using error::error;
};

// Rejected configuration value (size caps, invalid counts).
struct config_error : error {
    using error::error;
};

// Qubit or slot index out of range.
struct index_error : error {
    using error::error;
};

// Input that makes the requested operation undefined (e.g. all-zero vector).
struct degenerate_input_error : error {
    using error::error;
};

// Non-finite value where a finite one is required.
struct numeric_error : error {
    using error::error;
};

// Malformed or truncated file.
struct format_error : error {
    using error::error;
};

// Operation asked of an object that cannot support it (e.g. a shift-rule
// gradient for a parameterized gate with no shift rule).
struct unsupported_error : error {
    using error::error;
};

} // namespace qclus
