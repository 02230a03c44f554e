#pragma once

#include <stdexcept>
#include <string>

namespace fdbreak {

// Base of every error the library throws on bad input or failed computation.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched lengths or shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed or non-finite observations.
class DataError : public Error {
public:
    using Error::Error;
};

// Input is well formed but carries no usable variation (identical curves,
// zero break size, ...).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

// A parameter outside its legal range.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// A Monte Carlo routine failed to meet its own convergence rule.
class SimulationError : public Error {
public:
    using Error::Error;
};

}  // namespace fdbreak
