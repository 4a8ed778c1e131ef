#pragma once

#include <stdexcept>
#include <string>

namespace anondet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Both hypotheses assign zero mass to the same event, so a ratio is 0/0.
class UndefinedRatio : public Error {
public:
    using Error::Error;
};

/// Two extended-real values cannot be compared (e.g. +inf - +inf).
class UndefinedComparison : public Error {
public:
    using Error::Error;
};

/// The request exceeds what exhaustive enumeration can handle.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// An iterative solver or grid search did not produce a certified answer.
class SolverFailure : public Error {
public:
    using Error::Error;
};

} // namespace anondet
