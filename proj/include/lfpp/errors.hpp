#ifndef LFPP_ERRORS_HPP
#define LFPP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lfpp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad n, bad region, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Lattice scale too coarse to resolve a region edge.
class ScaleTooSmall : public Error {
public:
    using Error::Error;
};

/// Problem size exceeds a configured compute budget.
class BudgetExceeded : public Error {
public:
    using Error::Error;
};

/// A unit circle around the requested point leaves the domain.
class BoundaryProximity : public Error {
public:
    using Error::Error;
};

/// Iterative solver did not reach its tolerance within the iteration cap.
class SolverDivergence : public Error {
public:
    using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace lfpp

#endif  // LFPP_ERRORS_HPP
