#pragma once

#include <stdexcept>
#include <string>

namespace stvg {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input record; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(int line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// A domain invariant failed; carries the offending field name.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& msg)
      : Error(msg + " [field: " + field + "]"), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Synthetic scene could not be realized (e.g. no distinguishing expression).
class GenError : public Error {
 public:
  using Error::Error;
};

}  // namespace stvg
