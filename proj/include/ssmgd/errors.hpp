#pragma once

#include <stdexcept>
#include <string>

namespace ssmgd {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// Matrix is not row-stochastic (negative entry or row sum off).
struct NonStochastic : Error {
    using Error::Error;
};

/// The stationary-distribution solver found no unique fixed point.
struct NoUniqueStationary : Error {
    using Error::Error;
};

/// Envelope or regression fit is impossible on the given data.
struct FitError : Error {
    using Error::Error;
};

/// Out-of-range index into a sequence.
struct IndexError : Error {
    using Error::Error;
};

/// Vector or matrix dimensions do not agree.
struct DimensionMismatch : Error {
    using Error::Error;
};

/// Linear system is singular or too ill-conditioned to trust.
struct SingularSystem : Error {
    using Error::Error;
};

/// A quadratic form that must be PSD evaluated significantly negative.
struct NegativeQuadraticForm : Error {
    using Error::Error;
};

/// Iterate overflowed or became NaN; `step` is the first detected time.
struct NonFinite : Error {
    long step;
    NonFinite(const std::string& what, long step_) : Error(what), step(step_) {}
};

/// Invalid or inconsistent experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace ssmgd
