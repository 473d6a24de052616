#pragma once

#include <stdexcept>
#include <string>

namespace mrmae {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration: malformed manifest, invalid policy parameters,
// unachievable parameter budgets.
class ConfigError : public Error {
public:
    using Error::Error;
};

// The inputs parsed but their content is unusable: size mismatches,
// zero-variance layers, empty point clouds.
class DataError : public Error {
public:
    using Error::Error;
};

// A masking policy cannot produce what the caller asked for, e.g. an
// ensemble target size below the given base mask.
class PolicyError : public Error {
public:
    using Error::Error;
};

// Training diverged (non-finite loss or parameters).
class TrainError : public Error {
public:
    using Error::Error;
};

// A closed-form or iterative fit failed to converge.
class FitError : public Error {
public:
    using Error::Error;
};

} // namespace mrmae
