#pragma once

#include <stdexcept>
#include <string>

namespace cate {

// Raised on malformed input data: CSV parse failures, invariant violations
// of datasets and scenario specs, bad fold parameters.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a model cannot be fit or applied: single-class classifier
// input, dimension mismatches, degenerate systems.
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cate
