#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gpsobol {

/// Bad argument or inconsistent dimensions supplied by the caller.
class input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A correlation or bordered system could not be factorized, even after
/// nugget escalation. Carries the nugget values that were attempted.
class conditioning_error : public std::runtime_error {
 public:
  conditioning_error(const std::string& what, std::vector<double> nuggets)
      : std::runtime_error(what), attempted_nuggets(std::move(nuggets)) {}
  std::vector<double> attempted_nuggets;
};

/// The estimator denominator is numerically zero (constant output sample).
class degenerate_output_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hyperparameter fit failed (non-finite objective, rank-deficient trend).
class fit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpsobol
