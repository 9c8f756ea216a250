#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bagopf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input. `line` is 1-based for text formats, 0 when unknown;
/// `path` names the offending element for structured documents.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  ParseError(const std::string& what, std::string path)
      : Error(path + ": " + what), path_(std::move(path)) {}

  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  std::size_t line_ = 0;
  std::string path_;
};

/// Valid input that asks for something this library does not model
/// (piecewise-linear costs, cubic polynomials, ...).
class UnsupportedFeature : public Error {
 public:
  using Error::Error;
};

/// An invariant of a domain type does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A broken internal contract, e.g. a constraint that refers to an entry no
/// bag houses.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// A block expected to be rank-one is not.
class NotRankOne : public Error {
 public:
  using Error::Error;
};

}  // namespace bagopf
