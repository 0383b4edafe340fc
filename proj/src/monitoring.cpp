#include "multiarm/monitoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "multiarm/errors.hpp"
#include "multiarm/integrate.hpp"
#include "multiarm/priors.hpp"

namespace multiarm {

StoppingRule default_stopping_rule() { return StoppingRule{}; }

void validate(const StoppingRule& rule) {
  check_beta_params(rule.prior, "stopping rule prior");
  if (!(rule.cure_threshold > 0.0 && rule.cure_threshold < 1.0)) {
    throw std::domain_error("stopping rule: cure threshold must lie in (0, 1)");
  }
  if (!(rule.posterior_prob_threshold >= 0.0 &&
        rule.posterior_prob_threshold < 1.0)) {
    throw std::domain_error(
        "stopping rule: posterior probability threshold must lie in [0, 1)");
  }
}

void validate(const GroupState& state) {
  if (state.analysed < 0 || state.failures < 0 ||
      state.failures > state.analysed) {
    throw ValidationError(
        "group state: need 0 <= failures <= analysed");
  }
}

StopDecision should_stop(const StoppingRule& rule, const GroupState& state) {
  validate(rule);
  validate(state);
  const BetaParams post = posterior_update(
      rule.prior, state.analysed - state.failures, state.failures);
  const double prob = reg_inc_beta(post, rule.cure_threshold);
  // strict inequality: ties do not stop
  return StopDecision{prob > rule.posterior_prob_threshold, prob};
}

BoundaryTable boundary(const StoppingRule& rule, int max_n) {
  validate(rule);
  if (max_n < 1) throw std::domain_error("boundary: max_n must be >= 1");

  BoundaryTable table;
  table.max_n = max_n;
  table.min_failures.assign(static_cast<std::size_t>(max_n) + 1, std::nullopt);

  auto stops = [&](long n, long f) {
    const BetaParams post = posterior_update(rule.prior, n - f, f);
    return reg_inc_beta(post, rule.cure_threshold) >
           rule.posterior_prob_threshold;
  };

  for (int n = 1; n <= max_n; ++n) {
    // posterior tail grows with f, so the least stopping f is found by
    // binary search over 0..n
    if (!stops(n, n)) continue;
    int lo = 0;
    int hi = n;
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      if (stops(n, mid)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    table.min_failures[static_cast<std::size_t>(n)] = lo;
  }
  return table;
}

namespace {

using CacheKey = std::tuple<double, double, double, double>;

CacheKey key_of(const StoppingRule& rule) {
  return {rule.prior.a, rule.prior.b, rule.cure_threshold,
          rule.posterior_prob_threshold};
}

std::mutex g_boundary_mutex;
std::map<CacheKey, std::shared_ptr<const BoundaryTable>> g_boundary_cache;

}  // namespace

std::shared_ptr<const BoundaryTable> cached_boundary(const StoppingRule& rule,
                                                     int min_max_n) {
  validate(rule);
  min_max_n = std::max(min_max_n, 1);
  const CacheKey key = key_of(rule);
  std::lock_guard<std::mutex> lock(g_boundary_mutex);
  auto it = g_boundary_cache.find(key);
  if (it != g_boundary_cache.end() && it->second->max_n >= min_max_n) {
    return it->second;
  }
  int size = 128;
  while (size < min_max_n) size *= 2;
  auto table = std::make_shared<const BoundaryTable>(boundary(rule, size));
  g_boundary_cache[key] = table;
  return table;
}

double stop_prob(const BoundaryTable& table, int n, double true_cure) {
  if (n < 0 || n > table.max_n) {
    throw std::domain_error("stop_prob: n outside boundary table");
  }
  if (!(true_cure >= 0.0 && true_cure <= 1.0)) {
    throw std::domain_error("stop_prob: cure rate must lie in [0, 1]");
  }
  const auto bound = table.at(n);
  if (!bound) return 0.0;
  return binom_tail_geq(n, 1.0 - true_cure, *bound);
}

double stop_prob(const StoppingRule& rule, int n, double true_cure) {
  return stop_prob(*cached_boundary(rule, n), n, true_cure);
}

void validate(const CureRateRange& range) {
  if (!(range.lower >= 0.0 && range.lower < range.upper &&
        range.upper <= 1.0)) {
    throw std::domain_error("cure rate range: need 0 <= lower < upper <= 1");
  }
}

double avg_stop_prob(const StoppingRule& rule, int n,
                     const CureRateRange& range) {
  validate(range);
  const auto table = cached_boundary(rule, n);
  const auto bound = table->at(n);
  if (!bound) return 0.0;

  const int k = *bound;
  auto stop_at = [&](double p) { return binom_tail_geq(n, 1.0 - p, k); };

  if (range.weighting == Weighting::kUniform) {
    const double integral =
        adaptive_simpson(stop_at, range.lower, range.upper, 1e-9);
    return integral / (range.upper - range.lower);
  }

  // monitoring prior renormalised to the range
  const double mass = reg_inc_beta(rule.prior, range.upper) -
                      reg_inc_beta(rule.prior, range.lower);
  if (mass <= 0.0) {
    throw std::domain_error("avg_stop_prob: prior has no mass on the range");
  }
  auto weighted = [&](double p) { return stop_at(p) * beta_pdf(rule.prior, p); };
  return adaptive_simpson(weighted, range.lower, range.upper, 1e-10) / mass;
}

double predictive_stop_prob(const StoppingRule& rule, const GroupState& state,
                            int total_n) {
  validate(rule);
  validate(state);
  if (state.analysed > total_n) {
    throw std::domain_error(
        "predictive_stop_prob: analysed exceeds total group size");
  }
  const auto table = cached_boundary(rule, total_n);
  const auto bound = table->at(total_n);
  if (!bound) {
    throw UnreachableBoundaryError(
        "predictive_stop_prob: rule cannot be met at the full group size");
  }
  if (state.failures >= *bound) return 1.0;
  const int future = total_n - static_cast<int>(state.analysed);
  const int needed = *bound - static_cast<int>(state.failures);
  if (needed > future) return 0.0;
  // future failures follow the posterior-predictive beta-binomial with the
  // failure-side shape first
  const BetaParams post_fail{rule.prior.b + static_cast<double>(state.failures),
                             rule.prior.a + static_cast<double>(state.analysed -
                                                                state.failures)};
  return beta_binom_tail_geq(future, post_fail, needed);
}

StratumCheck stratum_check(const StoppingRule& rule, const GroupState& combined,
                           const std::vector<GroupState>& strata) {
  validate(combined);
  long analysed = 0;
  long failures = 0;
  for (const auto& s : strata) {
    validate(s);
    analysed += s.analysed;
    failures += s.failures;
  }
  if (analysed != combined.analysed || failures != combined.failures) {
    throw ValidationError(
        "stratum_check: stratum counts do not sum to the combined group");
  }
  StratumCheck out;
  out.combined = should_stop(rule, combined);
  out.strata.reserve(strata.size());
  for (const auto& s : strata) out.strata.push_back(should_stop(rule, s));
  return out;
}

}  // namespace multiarm
