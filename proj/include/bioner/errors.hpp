#pragma once

#include <stdexcept>
#include <string>

namespace bioner {

// Caller broke a documented precondition (wrong shape, bad argument range).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A NaN or infinity showed up during forward or backward evaluation.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& op, const std::string& what)
        : std::runtime_error(op + ": " + what), op_(op) {}
    const std::string& op() const { return op_; }

private:
    std::string op_;
};

// Malformed input data (CoNLL, embeddings, checkpoints).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Bad or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bioner
