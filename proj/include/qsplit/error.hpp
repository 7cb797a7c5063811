#pragma once

#include <stdexcept>
#include <string>

namespace qsplit {

/// Malformed input document (bad JSON, wrong field types).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a model invariant. The message starts
/// with the offending field path when one is known.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the exhaustive search when the enumeration would exceed the
/// configured evaluation budget.
class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(double estimate, double budget)
        : std::runtime_error("search space of " + std::to_string(estimate) +
                             " evaluations exceeds budget " + std::to_string(budget)),
          estimate_(estimate),
          budget_(budget) {}

    double estimate() const noexcept { return estimate_; }
    double budget() const noexcept { return budget_; }

private:
    double estimate_;
    double budget_;
};

}  // namespace qsplit
