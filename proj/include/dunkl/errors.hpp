#pragma once

#include <stdexcept>
#include <string>

namespace dunkl {

/// Malformed input: bad root system, dimension mismatch, schema violation.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (t <= 0, r <= 0).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Series, quadrature or iteration failed to reach its tolerance.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Enumeration request exceeds the configured budget.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two independent computations that must agree did not.
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace dunkl
