#pragma once

#include <stdexcept>
#include <string>

namespace ncmart {

// Invalid caller-supplied parameter (exponent out of range, bad level, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Function evaluated outside its domain (e.g. negative power at a zero eigenvalue).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Step function not resolved finely enough for the requested operation.
class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A construction whose verified postcondition failed (containment, sparseness, ...).
class ConstructionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ncmart
