#pragma once

#include <stdexcept>
#include <string>

namespace volbound {

// Input outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unknown model, unsupported scheme, bad scenario wiring.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// No positive eigenfunction exists on the requested window.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Root bracketing failed.
class SearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A Monte-Carlo quantity became non-finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace volbound
