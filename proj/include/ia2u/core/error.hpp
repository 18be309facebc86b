#pragma once

#include <stdexcept>
#include <string>

namespace ia2u {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: wrong shape, non-finite value, out-of-range argument.
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Checkpoint container is truncated, corrupt, or of a different version.
class CheckpointError : public Error {
public:
    using Error::Error;
};

}  // namespace ia2u
