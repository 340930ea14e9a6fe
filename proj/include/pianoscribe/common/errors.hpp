#pragma once

#include <stdexcept>
#include <string>

namespace pianoscribe {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes or dimensions do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A computation produced NaN or infinity.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed file or byte stream.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training or evaluation data is inconsistent.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace pianoscribe
