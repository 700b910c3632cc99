#pragma once

#include <stdexcept>
#include <string>

namespace bbmvote {

// Bad inputs: violated preconditions, malformed documents, out-of-range
// parameters.  The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A requested branch rate is too small to keep a compiled voting table
// inside [0,1].  `index` is the first offending table entry.
struct RateTooSmallError : ValidationError {
    RateTooSmallError(const std::string& msg, int index)
        : ValidationError(msg), index(index) {}
    int index;
};

// Resource guards tripped at run time (population cap, recursion depth).
// The CLI maps these to exit code 2.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at run time: non-finite values, detected instability.
// Also exit code 2.
struct NumericsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bbmvote
