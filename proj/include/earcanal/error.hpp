#pragma once

#include <stdexcept>
#include <string>

namespace earcanal {

/// Unreadable, unwritable or malformed input/output. The CLI maps this to exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content (truncated STL, bad WAV header, invalid JSON schema).
class ParseError : public IoError {
public:
    using IoError::IoError;
};

/// Numerical failure inside a pipeline stage. The CLI maps this to exit code 1.
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration file or command-line option value. Exit code 2.
class ConfigError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace earcanal
