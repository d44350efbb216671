#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latred {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularBasisError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// Lattice reduction exceeded its iteration cap (floating-point pathology).
class IterationCapError : public Error {
 public:
  using Error::Error;
};

// Linear Diophantine equation without an integer solution.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class NotSpecialLinearError : public Error {
 public:
  using Error::Error;
};

// Autodiff shape or domain violation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NonSymmetricError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, unsigned long long seed)
      : Error(what), epoch_(epoch), seed_(seed) {}
  int epoch() const noexcept { return epoch_; }
  unsigned long long seed() const noexcept { return seed_; }

 private:
  int epoch_;
  unsigned long long seed_;
};

class EmptyReportError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; line numbers are 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// An invariant that the algorithms guarantee was observed to fail.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace latred
