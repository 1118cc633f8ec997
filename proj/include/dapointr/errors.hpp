#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dapointr {

/// Precondition violated by caller-supplied data (empty clouds, k > size, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inconsistent or unknown configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed point-cloud file. `line` is 1-based for text content (0 when the
/// failure is inside binary payload); `offset` is the byte offset into the file.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t offset,
             const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + " (byte " +
                           std::to_string(offset) + "): " + what),
        line_(line),
        offset_(offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

/// A loss term evaluated to NaN/Inf; the optimizer step was not applied.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& term, double value)
      : std::runtime_error("non-finite loss term '" + term + "' = " + std::to_string(value)),
        term_(term) {}

  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace dapointr
