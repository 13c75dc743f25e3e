#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace debiaslab {

/// Shapes of two operands do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller-side precondition was violated.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A configuration value is outside its documented range.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Requested key (epoch, sample id, ...) is not present.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Class index or label outside [0, K).
class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Representation row too close to zero to normalize.
class DegenerateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed record in a text file; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Records are well formed but inconsistent with each other.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace debiaslab
