#ifndef IPDMA_ERRORS_HPP
#define IPDMA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ipdma {

// Error taxonomy mirrors the CLI exit codes: usage -> 1, data -> 2, numerical -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// Anything wrong with input data or argument domains.
class DataError : public Error {
 public:
  using Error::Error;
};

// Input file does not have the required columns.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// A row could not be parsed (non-numeric or missing cell).
class IngestError : public DataError {
 public:
  using DataError::DataError;
};

// Structural invariant violated (single-arm trial, degenerate moderator, ...).
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

// Argument outside its mathematical domain.
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

// Factorization failures, non-finite likelihoods, divergent state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ipdma

#endif
