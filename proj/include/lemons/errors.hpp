#pragma once

#include <stdexcept>
#include <string>

namespace lemons {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent input (instance files, scalar functions, configs).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// c(θ) − θ touches zero without changing sign.
class DegenerateTangencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matching ODE evaluated on the diagonal a = x away from the crossing.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matching curve left its admissible band; for the lower curve this means full trade is feasible.
class EscapeError : public std::runtime_error {
 public:
  EscapeError(const std::string& what, double x, double a) : std::runtime_error(what), x_(x), a_(a) {}
  double x() const { return x_; }
  double a() const { return a_; }

 private:
  double x_, a_;
};

class NoBracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The weight/ratio shape is outside the cases with a known optimal construction.
class UnclassifiedRatioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lemons
