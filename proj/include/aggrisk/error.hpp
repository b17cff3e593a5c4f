#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aggrisk {

// Root of every error thrown by the library. Callers that only need to know
// "something failed" catch this; the subclasses carry the kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A violated precondition on an argument (negative loss, bad plan, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data that breaks a domain invariant (invalid portfolio, ragged YET).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A layer with no covered ELTs reached the combined-index builder.
class UncoveredLayerError : public Error {
 public:
  using Error::Error;
};

// Records reached a reducer in a state the shuffle must never produce,
// e.g. two records with the same ordering key for one trial.
class ShuffleFault : public Error {
 public:
  using Error::Error;
};

// Binary YET file problems. The kind distinguishes the failure.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, truncated, count_mismatch, invalid_content };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Text formats: the offending (1-based) line number is kept.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingFieldError : public Error {
 public:
  explicit MissingFieldError(const std::string& field)
      : Error("missing field '" + field + "'"), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A portfolio layer cites an ELT id that the pool does not contain.
class ReferentialError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace aggrisk
