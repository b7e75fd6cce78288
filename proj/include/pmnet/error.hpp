#ifndef PMNET_ERROR_HPP_
#define PMNET_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/extent disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied parameter is out of its allowed range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

// Malformed input text. `line` is 1-based (0 when not applicable) and
// `position` is the 0-based index of the offending whitespace-separated item.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t position)
      : DataError(format(what, line, position)), message_(what), line_(line), position_(position) {}

  const std::string& message() const { return message_; }

  std::size_t line() const { return line_; }
  std::size_t position() const { return position_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t position) {
    std::string out = what;
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    out += " at item " + std::to_string(position);
    return out;
  }

  std::string message_;
  std::size_t line_;
  std::size_t position_;
};

}  // namespace pmnet

#endif  // PMNET_ERROR_HPP_
