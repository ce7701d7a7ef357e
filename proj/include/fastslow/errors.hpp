#ifndef FASTSLOW_ERRORS_HPP
#define FASTSLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fsm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed algebraic input: arity or order mismatch, bad exponents, failed post-check.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a documented precondition (point off the manifold, wrong class, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Point outside the region where the jets are trusted.
class DomainError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// A modelling assumption of the fast-slow factorization does not hold.
class AssumptionViolation : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Input is valid but outside what the algorithm handles (non-unipotent linear part, ...).
class UnsupportedCase : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Map-spec text could not be parsed.
class ParseError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Numerical breakdown that is not attributable to the input (stiffness, no convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsm

#endif
