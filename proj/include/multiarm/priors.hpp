#pragma once

#include <string>

#include "multiarm/numeric.hpp"

namespace multiarm {

// Target of the effective-sample-size search: find a beta prior with the
// given mean whose probability of lying below `threshold` equals `tail_prob`.
struct ElicitationTarget {
  double mean{0.9};
  double threshold{0.9};
  double tail_prob{0.34};
};

void validate(const ElicitationTarget& t);

struct NamedPrior {
  std::string label;
  BetaParams params;
  double mean{0.0};
  double variance{0.0};
  double ess{0.0};
};

NamedPrior make_named_prior(std::string label, BetaParams params);

// Shapes rounded to `decimals` decimal places (the reporting convention for
// prior tables; full precision is kept everywhere else).
BetaParams round_shapes(const BetaParams& p, int decimals);

// ESS search bracket. A degenerate bracket (lo == hi) pins the ESS and skips
// the search entirely.
struct EssBracket {
  double lo{0.01};
  double hi{1e4};
};

struct ElicitationResult {
  NamedPrior prior;          // exact bisection solution
  double ess{0.0};           // its effective sample size
  double achieved_tail{0.0};
  BetaParams rounded_2dp;    // shapes at two decimals
  BetaParams unit_ess;       // shapes rebuilt from the ESS rounded to a whole
                             // patient-equivalent
  bool non_unique{false};    // tail is flat in the ESS (mean == threshold == tail 0.5)
};

// Monotone bisection on the ESS in `bracket` until the tail probability is
// within 1e-6 of the target. Throws ElicitationError (naming the achievable
// tail range) when the target cannot be reached inside the bracket.
ElicitationResult elicit_beta(const ElicitationTarget& target,
                              EssBracket bracket = {},
                              const std::string& label = "elicited");

// Conjugate update: (a + successes, b + failures).
BetaParams posterior_update(const BetaParams& prior, long successes,
                            long failures);

// The two named priors used throughout: beta(4.5, 0.5) for monitoring and
// beta(4.75, 0.25) for the control-rate analysis (mean 0.95, ESS pinned at 5).
NamedPrior monitoring_prior();
NamedPrior control_analysis_prior();

}  // namespace multiarm
