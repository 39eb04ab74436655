#pragma once

#include <stdexcept>
#include <string>

namespace ibrid {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Violated precondition or interface contract (bad channel set, length mismatch, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Malformed external input; carries the offending line when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, long line = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Simulation left the valid state region or produced non-finite values.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time_s)
        : Error(what + " at t=" + std::to_string(time_s) + " s"), time_(time_s) {}
    double time() const { return time_; }

private:
    double time_;
};

/// Non-finite or singular algebra inside an estimator.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// PLL failed to lock within the allowed window.
class PllLockError : public Error {
public:
    using Error::Error;
};

/// Every candidate was rejected by the validation cascade; message carries the log.
class ExhaustionError : public Error {
public:
    using Error::Error;
};

} // namespace ibrid
