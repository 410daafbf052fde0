#pragma once

#include <stdexcept>
#include <string>

namespace dcm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command line or contradictory configuration.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed, inconsistent or out-of-range input data (files, checkpoints, timestamps).
class DataError : public Error {
public:
    using Error::Error;
};

/// Timestamp outside the timespan a model or dataset was built for.
class OutOfSpanError : public DataError {
public:
    using DataError::DataError;
};

/// Numerical failure: degenerate norms, non-convergence, NaN during training.
class NumericalError : public Error {
public:
    using Error::Error;
};

class NearZeroNormError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace dcm
