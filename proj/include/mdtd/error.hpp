#pragma once

#include <stdexcept>
#include <string>

namespace mdtd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes (dims, ranks, row counts) do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A scalar argument or configuration value is outside its valid range.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file or spec string.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Factorization failure, non-finite objective, and similar.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, int iteration = -1)
        : Error(what), iteration_(iteration) {}

    /// Solver iteration at which the failure surfaced, -1 when not applicable.
    [[nodiscard]] int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

}  // namespace mdtd
