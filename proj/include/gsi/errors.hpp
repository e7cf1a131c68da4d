#pragma once

#include <stdexcept>
#include <string>

namespace gsi {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclasses onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad rank, empty group, unknown key).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable or malformed input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Input that makes an operation meaningless, e.g. an all-zero observed matrix.
class DegenerateInputError : public DataError {
public:
    using DataError::DataError;
};

/// An iterative numerical routine failed (e.g. SVD sweep cap reached).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Not enough samples to fit a statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

} // namespace gsi
