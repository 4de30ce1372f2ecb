#pragma once

#include <stdexcept>

namespace aif {

/// Input file or table violates its declared schema. CLI exit code 3.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage was invoked before the stages it depends on. CLI exit code 2.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss, rank deficiency, failed convergence. CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aif
