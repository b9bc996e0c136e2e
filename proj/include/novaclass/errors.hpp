#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace novaclass {

// Every error carries a short machine-readable kind used by the CLI.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

class InvalidConfig : public Error {
public:
    explicit InvalidConfig(const std::string& what) : Error("invalid-config", what) {}
};

class StateError : public Error {
public:
    explicit StateError(const std::string& what) : Error("state-error", what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error("numeric-error", what) {}
};

class NumericDivergence : public Error {
public:
    NumericDivergence(std::size_t epoch, const std::string& what)
        : Error("numeric-divergence", what), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("parse-error", "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io-error", what) {}
};

/// Raised when a confirmed novel class does not yet have enough windows for a
/// balanced retrain. `shortfall()` is the number of additional windows needed.
class NeedsMoreData : public Error {
public:
    explicit NeedsMoreData(std::size_t shortfall)
        : Error("needs-more-data", "needs " + std::to_string(shortfall) + " more windows"),
          shortfall_(shortfall) {}
    std::size_t shortfall() const noexcept { return shortfall_; }

private:
    std::size_t shortfall_;
};

}  // namespace novaclass
