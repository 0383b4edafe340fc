#include "multiarm/priors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "multiarm/errors.hpp"

namespace multiarm {

namespace {

BetaParams shapes_for_ess(double mean, double ess) {
  return BetaParams{mean * ess, (1.0 - mean) * ess};
}

double tail_at_ess(const ElicitationTarget& t, double ess) {
  return reg_inc_beta(shapes_for_ess(t.mean, ess), t.threshold);
}

}  // namespace

void validate(const ElicitationTarget& t) {
  const bool ok = t.mean > 0.0 && t.mean < 1.0 && t.threshold > 0.0 &&
                  t.threshold < 1.0 && t.tail_prob > 0.0 && t.tail_prob < 1.0;
  if (!ok) {
    throw std::domain_error(
        "elicitation target: mean, threshold and tail_prob must lie in (0, 1)");
  }
}

NamedPrior make_named_prior(std::string label, BetaParams params) {
  check_beta_params(params, "make_named_prior");
  const double s = params.a + params.b;
  NamedPrior p;
  p.label = std::move(label);
  p.params = params;
  p.mean = params.a / s;
  p.variance = params.a * params.b / (s * s * (s + 1.0));
  p.ess = s;
  return p;
}

BetaParams round_shapes(const BetaParams& p, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return BetaParams{std::round(p.a * scale) / scale,
                    std::round(p.b * scale) / scale};
}

ElicitationResult elicit_beta(const ElicitationTarget& target,
                              EssBracket bracket, const std::string& label) {
  validate(target);
  if (!(bracket.lo > 0.0) || bracket.hi < bracket.lo) {
    throw std::domain_error("elicit_beta: bracket must satisfy 0 < lo <= hi");
  }

  constexpr double kTailTol = 1e-6;

  auto finish = [&](double ess, bool non_unique) {
    ElicitationResult r;
    r.prior = make_named_prior(label, shapes_for_ess(target.mean, ess));
    r.ess = ess;
    r.achieved_tail = tail_at_ess(target, ess);
    r.rounded_2dp = round_shapes(r.prior.params, 2);
    r.unit_ess = shapes_for_ess(target.mean, std::round(ess));
    r.non_unique = non_unique;
    return r;
  };

  // pinned-ESS pathway
  if (bracket.lo == bracket.hi) return finish(bracket.lo, false);

  double lo = bracket.lo;
  double hi = bracket.hi;
  double f_lo = tail_at_ess(target, lo);
  double f_hi = tail_at_ess(target, hi);

  if (std::fabs(f_lo - f_hi) < 1e-9) {
    // tail does not move with the ESS: every bracket point solves (or none
    // does); surface the non-uniqueness rather than inventing an answer
    if (std::fabs(f_lo - target.tail_prob) <= kTailTol) {
      return finish(0.5 * (lo + hi), true);
    }
    std::ostringstream msg;
    msg << "elicit_beta: tail probability is constant at " << f_lo
        << " over the bracket; target " << target.tail_prob
        << " is unreachable";
    throw ElicitationError(msg.str(), f_lo, f_hi);
  }

  const bool increasing = f_hi > f_lo;
  const double min_tail = std::min(f_lo, f_hi);
  const double max_tail = std::max(f_lo, f_hi);
  if (target.tail_prob < min_tail - kTailTol ||
      target.tail_prob > max_tail + kTailTol) {
    std::ostringstream msg;
    msg << "elicit_beta: target tail " << target.tail_prob
        << " outside achievable range [" << min_tail << ", " << max_tail
        << "] for ESS in [" << lo << ", " << hi << "]";
    throw ElicitationError(msg.str(), min_tail, max_tail);
  }

  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 300; ++iter) {
    mid = 0.5 * (lo + hi);
    const double f_mid = tail_at_ess(target, mid);
    if (std::fabs(f_mid - target.tail_prob) <= kTailTol) return finish(mid, false);
    const bool go_up = increasing ? (f_mid < target.tail_prob)
                                  : (f_mid > target.tail_prob);
    if (go_up) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  // bracket exhausted to double precision; accept the midpoint if it is close
  const double f_mid = tail_at_ess(target, mid);
  if (std::fabs(f_mid - target.tail_prob) <= 1e-5) return finish(mid, false);
  std::ostringstream msg;
  msg << "elicit_beta: bisection failed to reach tail " << target.tail_prob
      << " (last " << f_mid << ")";
  throw ElicitationError(msg.str(), min_tail, max_tail);
}

BetaParams posterior_update(const BetaParams& prior, long successes,
                            long failures) {
  check_beta_params(prior, "posterior_update");
  if (successes < 0 || failures < 0) {
    throw std::domain_error("posterior_update: counts must be >= 0");
  }
  return BetaParams{prior.a + static_cast<double>(successes),
                    prior.b + static_cast<double>(failures)};
}

NamedPrior monitoring_prior() {
  return make_named_prior("monitoring", BetaParams{4.5, 0.5});
}

NamedPrior control_analysis_prior() {
  return make_named_prior("control-analysis", BetaParams{4.75, 0.25});
}

}  // namespace multiarm
