#pragma once

#include <stdexcept>
#include <string>

namespace fracmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad extents, alpha outside
/// (0, |dOmega|], exponents outside the admissible range, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure did not reach its stopping criterion.
class SolverError : public Error {
public:
    using Error::Error;
};

/// The scalar inequality M >= lambda M^q |g|^q + M^r |g|^r has no root.
class NoSupersolution : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace fracmix
