#pragma once

#include <stdexcept>
#include <string>

namespace escape {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// G(x) has a non-positive eigenvalue; the family parameters are bad.
class NonPositiveDefinite : public MetricError {
 public:
  using MetricError::MetricError;
};

/// Query outside the set where the metric (or the formula) is defined.
class DomainError : public MetricError {
 public:
  using MetricError::MetricError;
};

class ParameterError : public MetricError {
 public:
  using MetricError::MetricError;
};

class NotTangent : public MetricError {
 public:
  using MetricError::MetricError;
};

/// A theorem check was requested but its hypotheses do not hold.
class InapplicableTheorem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CFLViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HypothesisViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace escape
