#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "multiarm/numeric.hpp"

namespace multiarm {

// Futility rule: stop a group when the posterior probability that its true
// cure rate lies below `cure_threshold` strictly exceeds
// `posterior_prob_threshold`.
struct StoppingRule {
  double cure_threshold{0.9};
  double posterior_prob_threshold{0.95};
  BetaParams prior{4.5, 0.5};
};

StoppingRule default_stopping_rule();
void validate(const StoppingRule& rule);

// Data observed on one group: patients with an assessable outcome and the
// failures among them.
struct GroupState {
  long analysed{0};
  long failures{0};
};

void validate(const GroupState& state);

struct StopDecision {
  bool stop{false};
  double posterior_prob{0.0};
};

StopDecision should_stop(const StoppingRule& rule, const GroupState& state);

// Minimum failures triggering the rule, per number of analysed patients.
// Entries are empty where no failure count <= n qualifies (tiny n under a
// strong prior).
struct BoundaryTable {
  int max_n{0};
  std::vector<std::optional<int>> min_failures;  // index n, 0..max_n

  std::optional<int> at(int n) const {
    if (n < 0 || n > max_n) return std::nullopt;
    return min_failures[static_cast<std::size_t>(n)];
  }
};

BoundaryTable boundary(const StoppingRule& rule, int max_n);

// Shared memoised table per (prior, thresholds); the rule is evaluated inside
// simulation loops, so boundaries are computed once and reused. Thread-safe.
std::shared_ptr<const BoundaryTable> cached_boundary(const StoppingRule& rule,
                                                     int min_max_n);

// P(observed failures reach the boundary | n analysed, true cure rate).
double stop_prob(const StoppingRule& rule, int n, double true_cure);
double stop_prob(const BoundaryTable& table, int n, double true_cure);

enum class Weighting { kUniform, kPriorTruncated };

// Assumed distribution of a genuinely inferior group's cure rate.
struct CureRateRange {
  double lower{0.6};
  double upper{0.9};
  Weighting weighting{Weighting::kUniform};
};

void validate(const CureRateRange& range);

// Stop probability integrated over the cure-rate distribution (uniform, or
// the monitoring prior renormalised to the range). Absolute error <= 1e-6.
double avg_stop_prob(const StoppingRule& rule, int n,
                     const CureRateRange& range);

// Probability, given current data, that the rule would be met at full
// recruitment: P(failures + F' >= boundary(total_n)) with future failures
// F' ~ BetaBinomial(total_n - analysed; b + failures, a + successes).
double predictive_stop_prob(const StoppingRule& rule, const GroupState& state,
                            int total_n);

// Rule applied to the combined group and to each stratum separately.
struct StratumCheck {
  StopDecision combined;
  std::vector<StopDecision> strata;
};

StratumCheck stratum_check(const StoppingRule& rule, const GroupState& combined,
                           const std::vector<GroupState>& strata);

}  // namespace multiarm
