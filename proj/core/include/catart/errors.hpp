#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace catart {

/// Tensor or vector dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid or inconsistent configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training diverged or an update was refused (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric precondition failed for a specific user (e.g. zero-norm embedding).
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long user)
      : std::runtime_error(what + " (user " + std::to_string(user) + ")"), user_(user) {}

  long user() const noexcept { return user_; }

 private:
  long user_;
};

/// Synthetic world cannot be generated as requested.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage is missing its inputs or found them modified.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace catart
