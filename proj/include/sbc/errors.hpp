#pragma once

#include <stdexcept>
#include <string>

namespace sbc {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad argument value (sizes, ranges, non-positive counts).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Inconsistent object state: dimension mismatch, broken boundary loop, ...
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Requested object exceeds a configured budget.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Singular or near-singular linear algebra where it must not happen.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Control violates its admissible box.
class FeasibilityError : public Error {
public:
    using Error::Error;
};

/// Config file does not validate against the documented schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace sbc
