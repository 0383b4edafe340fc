#pragma once

#include <stdexcept>
#include <string>

namespace multiarm {

// Configuration / input-shape problems: CLI exits with code 2 on these.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cross-field consistency problems (counts that do not add up, etc.).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Elicitation target not achievable inside the ESS bracket.
struct ElicitationError : std::runtime_error {
  ElicitationError(const std::string& msg, double lo, double hi)
      : std::runtime_error(msg), achievable_lo(lo), achievable_hi(hi) {}
  double achievable_lo{0.0};
  double achievable_hi{0.0};
};

// No failure count can trigger the stopping rule at the requested size.
struct UnreachableBoundaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Logistic likelihood is maximised at infinity for some term.
struct SeparationError : std::runtime_error {
  SeparationError(const std::string& msg, std::string term_name)
      : std::runtime_error(msg), term(std::move(term_name)) {}
  std::string term;
};

// Information matrix is rank deficient.
struct RankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace multiarm
