#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcft {

// Every failure raised by the library derives from Error. The CLI maps the
// subclasses onto exit codes (2 config, 3 data, 4 numeric).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or arguments outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Ids out of range, duplicate ids, malformed batches.
class InputError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API contract (shape mismatch, tape reuse, user-set mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Dataset content violates an invariant (non-binary raw label, degenerate pool).
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Optimization diverged (non-finite loss or parameters).
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class ReportError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcft
