#pragma once

#include <stdexcept>
#include <string>

namespace posekit {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct NonPositiveScale : Error {
    using Error::Error;
};
struct MissingTransform : Error {
    using Error::Error;
};
struct DegeneratePart : Error {
    using Error::Error;
};
struct DimMismatch : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};
struct DegenerateBox : Error {
    using Error::Error;
};
struct DegenerateTorso : Error {
    using Error::Error;
};
struct ModeMismatch : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    using Error::Error;
};

}  // namespace posekit
