#pragma once

#include <stdexcept>
#include <string>

namespace lfcap {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments, inconsistent shapes or geometry, violated invariants.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Missing or unreadable files, malformed file contents.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace lfcap
