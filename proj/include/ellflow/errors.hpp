#pragma once

#include <stdexcept>
#include <string>

namespace ellflow {

/// Base of all library errors. Each category carries the process exit code
/// the command-line front end reports for it.
class error : public std::runtime_error {
public:
    error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

/// Argument outside the mathematical domain of an operation (exit 2).
class domain_error : public error {
public:
    explicit domain_error(const std::string& what) : error(what, 2) {}
};

/// A checked mathematical property failed to hold (exit 3).
class property_violation : public error {
public:
    explicit property_violation(const std::string& what) : error(what, 3) {}
};

/// Iteration failed to converge, a mesh degenerated, or a numerical guard
/// such as the convexity check tripped (exit 4).
class numerical_error : public error {
public:
    explicit numerical_error(const std::string& what) : error(what, 4) {}
};

} // namespace ellflow
