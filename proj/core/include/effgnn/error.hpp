#pragma once

#include <stdexcept>
#include <string>

namespace effgnn {

// Base for every error raised by the library. kind() is a stable, lowercase
// tag used by the CLI for single-line machine-parseable diagnostics.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "parse"; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

class CorruptFileError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "corrupt"; }
};

class VersionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "version"; }
};

class ShapeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "shape"; }
};

}  // namespace effgnn
