#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uniqcert {

// Base class for everything this library throws on bad input or bad points.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed DSL text. `offset` is the byte offset of the first offending
// character (length of the input for unexpected end of input).
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownFunctionError : public SyntaxError {
 public:
  UnknownFunctionError(const std::string& name, std::size_t offset)
      : SyntaxError("unknown function '" + name + "'", offset) {}
};

class UnknownVariableError : public SyntaxError {
 public:
  UnknownVariableError(const std::string& name, std::size_t offset)
      : SyntaxError("variable '" + name + "' is not declared in the signature",
                    offset) {}
};

// Evaluation left the mathematical domain (ln of a non-positive value,
// division by zero, non-finite intermediate). `subexpr` names the offending
// subexpression in DSL syntax.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::string subexpr)
      : Error(what + " in subexpression '" + subexpr + "'"),
        subexpr_(std::move(subexpr)) {}
  const std::string& subexpr() const { return subexpr_; }

 private:
  std::string subexpr_;
};

// A circulation was requested for a path that is not closed.
class OpenPathError : public Error {
 public:
  explicit OpenPathError(const std::string& what) : Error(what) {}
};

// Parameter outside the range an operation is defined for.
class InvalidRangeError : public Error {
 public:
  explicit InvalidRangeError(const std::string& what) : Error(what) {}
};

// Adaptive ODE step size shrank below the resolvable scale.
class StepUnderflowError : public Error {
 public:
  StepUnderflowError(const std::string& what, double t)
      : Error(what + " (t = " + std::to_string(t) + ")"), t_(t) {}
  double where() const { return t_; }

 private:
  double t_;
};

// The trajectory left the problem's state box.
class BoxExitError : public Error {
 public:
  BoxExitError(const std::string& what, double t)
      : Error(what + " (t = " + std::to_string(t) + ")"), t_(t) {}
  double where() const { return t_; }

 private:
  double t_;
};

// A comparison-theorem hypothesis failed at a grid point; the conclusion is
// not asserted in that case.
class HypothesisViolatedError : public Error {
 public:
  HypothesisViolatedError(const std::string& what, double t)
      : Error(what + " (t = " + std::to_string(t) + ")"), t_(t) {}
  double where() const { return t_; }

 private:
  double t_;
};

}  // namespace uniqcert
