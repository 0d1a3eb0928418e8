#ifndef SNO_ERRORS_HPP
#define SNO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sno {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operand shapes do not conform (matmul, elementwise ops, metric pairs).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (rates, widths, step counts, empty datasets).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or mismatched file contents (bad magic, truncation, versions).
class FormatError : public Error {
public:
    using Error::Error;
};

/// An operation was called out of order (backward without forward).
class StateError : public Error {
public:
    using Error::Error;
};

/// A value fell outside its documented range (schedule steps, grid indices).
class RangeError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// The linear solver failed to converge within its iteration cap.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace sno

#endif
