#pragma once

#include <stdexcept>
#include <string>

namespace relgate {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invariant or precondition violation (bad interval, ordering, negative count).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (CSV rows, JSON payloads, dates).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Bad or out-of-range configuration (k out of range, unknown mode).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Standardization failed because no feature carries variance.
class NoVarianceError : public Error {
public:
    using Error::Error;
};

/// A metrics source could not be reached or kept failing after retries.
class SourceError : public Error {
public:
    explicit SourceError(const std::string& source, const std::string& what)
        : Error(source + ": " + what), source_(source) {}

    const std::string& source() const { return source_; }

private:
    std::string source_;
};

} // namespace relgate
