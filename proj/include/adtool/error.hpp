#pragma once

#include <stdexcept>
#include <string>

namespace adtool {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed textual input: expression files, derivative request strings.
class ParseError : public Error {
  public:
    explicit ParseError(const std::string& message) : Error(message) {}
    ParseError(const std::string& message, int line, int column)
        : Error(message), line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

  private:
    int line_ = 0;
    int column_ = 0;
};

// A structurally valid derivative request that cannot be honored
// (unknown variable, order above the cap).
class RequestError : public Error {
  public:
    using Error::Error;
};

// Evaluation left an operator's domain or produced a non-finite value.
class DomainError : public Error {
  public:
    using Error::Error;
};

// evaluate() called while input variables are still unset.
class MissingInputError : public Error {
  public:
    using Error::Error;
};

// API misuse: foreign NodeRef, get() before evaluate(), elided slots, ...
class UsageError : public Error {
  public:
    using Error::Error;
};

// 64-bit overflow in combinatorial counting.
class OverflowError : public Error {
  public:
    using Error::Error;
};

} // namespace adtool
