#pragma once

#include <stdexcept>
#include <string>

namespace gravalloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query point or region lies outside the domain where an operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Evaluation point coincides with a star (within the singularity guard).
class SingularityError : public DomainError {
 public:
  SingularityError(const std::string& what, std::size_t star)
      : DomainError(what), star_(star) {}
  std::size_t star() const noexcept { return star_; }

 private:
  std::size_t star_;
};

/// Malformed input: duplicate stars, points outside a window, bad parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Region kind is not supported by the requested operation (e.g. infinite volume).
class UnsupportedRegionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A numerical procedure could not reach its requested tolerance.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

/// An allocation query hit a point whose basin could not be resolved.
class UnresolvedError : public Error {
 public:
  using Error::Error;
};

/// Matching quotas cannot be met by the available sites.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace gravalloc
