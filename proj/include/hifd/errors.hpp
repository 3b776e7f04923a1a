#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hifd {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition of an operation.
struct ParameterError : Error {
    using Error::Error;
};

/// Bad configuration file or configuration value; carries the offending key path.
struct ConfigError : Error {
    explicit ConfigError(const std::string& message, std::string key = {})
        : Error(key.empty() ? message : message + " (key: " + key + ")"),
          key_path(std::move(key)) {}
    std::string key_path;
};

/// Malformed CSV input; `line` is 1-based (0 when unknown).
struct CsvError : Error {
    explicit CsvError(const std::string& message, std::size_t line_number = 0)
        : Error(line_number ? message + " (line " + std::to_string(line_number) + ")" : message),
          line(line_number) {}
    std::size_t line;
};

/// Input sample rate disagrees with the configured one.
struct SampleRateError : Error {
    using Error::Error;
};

/// Two artifacts that must describe the same record do not.
struct MismatchError : Error {
    using Error::Error;
};

/// Numerical failure (non-convergence, degenerate spectrum, ...).
struct NumericalError : Error {
    using Error::Error;
};

/// Arc conductance hit a non-positive value.
struct SingularArcError : Error {
    using Error::Error;
};

/// Non-finite sample in an input series; carries the sample index.
struct NonFiniteSampleError : Error {
    explicit NonFiniteSampleError(std::size_t sample_index)
        : Error("non-finite input sample at index " + std::to_string(sample_index)),
          index(sample_index) {}
    std::size_t index;
};

}  // namespace hifd
