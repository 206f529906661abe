#pragma once

#include <stdexcept>
#include <string>

namespace csn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A bundle or configuration violates one of its invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Caller passed arguments outside an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Filesystem or codec failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace csn
