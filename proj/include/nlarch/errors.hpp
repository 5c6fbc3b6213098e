#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlarch {

/// Broad failure classes; the CLI maps each to a distinct exit code.
enum class ErrorCategory { Config, Data, Numeric, NonConvergence };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Bad parameter, dimension mismatch or violated model invariant.
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

/// Unparseable input row. Carries the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InsufficientData : public DataError {
public:
    explicit InsufficientData(const std::string& what) : DataError(what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

/// Requested absolute moment of the innovation law is infinite.
class DivergentMoment : public NumericError {
public:
    explicit DivergentMoment(const std::string& what) : NumericError(what) {}
};

/// Zero-variance or otherwise degenerate input to a statistic.
class DegenerateInput : public NumericError {
public:
    explicit DegenerateInput(const std::string& what) : NumericError(what) {}
};

/// A simulated path left the representable range.
class ExplosionError : public NumericError {
public:
    ExplosionError(std::size_t index, const std::string& what)
        : NumericError(what + " (first non-finite value at index " + std::to_string(index) + ")"),
          index_(index) {}

    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class NonConvergence : public Error {
public:
    explicit NonConvergence(const std::string& what) : Error(ErrorCategory::NonConvergence, what) {}
};

}  // namespace nlarch
