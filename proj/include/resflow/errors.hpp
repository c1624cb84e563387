#pragma once

#include <stdexcept>
#include <string>

namespace resflow {

// Typed failures raised across the library. All derive from std::runtime_error
// so callers can catch broadly or by specific condition.

struct NonRotationMatrix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonPositiveDepth : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyCloud : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyResult : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingGroundTruth : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VersionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidConfig : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace resflow
