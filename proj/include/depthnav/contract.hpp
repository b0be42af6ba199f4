#pragma once

#include <stdexcept>
#include <string>

namespace depthnav {

/// Thrown when a caller violates a documented precondition.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Thrown when a loss or gradient becomes NaN/Inf; `term` names the culprit.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string term, const std::string& what)
      : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

inline void expect(bool condition, const char* message) {
  if (!condition) throw ContractError(message);
}

inline void expect(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace depthnav
