#pragma once

#include <stdexcept>
#include <string>

namespace roitomo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched grids, out-of-extent phantom parameters, malformed line sets.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// A region (or its eroded interior) is empty where a nonempty one is required.
class RegionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operator.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Vector field whose exterior derivative is not negligible.
class NotAGradientError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration, file or command line.
class ConfigError : public Error {
public:
    using Error::Error;
};

class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace roitomo
