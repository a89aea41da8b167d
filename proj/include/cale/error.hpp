#pragma once

#include <stdexcept>
#include <string>

namespace cale {

// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSONL, TSV, config files).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Binary container problems (bad magic, truncation, inconsistent header).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Mathematical precondition violated (zero vector, constant sample, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Lookup of an id/key that is not present.
class MissingKeyError : public Error {
 public:
  using Error::Error;
};

}  // namespace cale
