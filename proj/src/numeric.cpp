#include "multiarm/numeric.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace multiarm {

namespace {

bool is_prob(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

[[noreturn]] void domain_fail(const char* where, const std::string& what) {
  throw std::domain_error(std::string(where) + ": " + what);
}

// Lentz evaluation of the continued fraction for I_x(a, b), valid for
// x <= (a+1)/(a+b+2).
double betacf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  constexpr int kMaxIter = 500;

  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double f = d;

  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    // even step
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    f *= d * c;
    // odd step
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::fabs(delta - 1.0) < kEps) return f;
  }
  throw std::runtime_error("reg_inc_beta: continued fraction did not converge");
}

}  // namespace

void check_beta_params(const BetaParams& p, const char* where) {
  if (!std::isfinite(p.a) || !std::isfinite(p.b) || p.a <= 0.0 || p.b <= 0.0) {
    domain_fail(where, "beta shapes must be finite and > 0");
  }
}

void check_binomial_params(const BinomialParams& p, const char* where) {
  if (p.n < 0) domain_fail(where, "trial count must be >= 0");
  if (!is_prob(p.q)) domain_fail(where, "event probability must lie in [0, 1]");
}

double log_gamma(double x) { return std::lgamma(x); }

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double log_choose(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double reg_inc_beta(double a, double b, double x) {
  check_beta_params({a, b}, "reg_inc_beta");
  if (!is_prob(x)) domain_fail("reg_inc_beta", "x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  if (x > (a + 1.0) / (a + b + 2.0)) {
    return 1.0 - reg_inc_beta(b, a, 1.0 - x);
  }
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b)) / a;
  return front * betacf(a, b, x);
}

double reg_inc_beta(const BetaParams& p, double x) {
  return reg_inc_beta(p.a, p.b, x);
}

double beta_pdf(const BetaParams& p, double x) {
  check_beta_params(p, "beta_pdf");
  if (!is_prob(x)) domain_fail("beta_pdf", "x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) {
    // only finite-density edges are meaningful here
    if ((x == 0.0 && p.a < 1.0) || (x == 1.0 && p.b < 1.0)) {
      return std::numeric_limits<double>::infinity();
    }
    if ((x == 0.0 && p.a > 1.0) || (x == 1.0 && p.b > 1.0)) return 0.0;
  }
  return std::exp((p.a - 1.0) * std::log(x) + (p.b - 1.0) * std::log1p(-x) -
                  log_beta(p.a, p.b));
}

double binom_pmf(int n, double q, int k) {
  check_binomial_params({n, q}, "binom_pmf");
  if (k < 0 || k > n) return 0.0;
  if (q == 0.0) return k == 0 ? 1.0 : 0.0;
  if (q == 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_choose(n, k) + k * std::log(q) +
                  (n - k) * std::log1p(-q));
}

double binom_tail_geq(int n, double q, int k) {
  check_binomial_params({n, q}, "binom_tail_geq");
  if (k < 0) domain_fail("binom_tail_geq", "k must be >= 0");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;

  const double mean = n * q;
  if (static_cast<double>(k) > mean) {
    // upper tail is the smaller one; accumulate from the far end so the
    // summation runs small-to-large
    double sum = 0.0;
    for (int j = n; j >= k; --j) sum += binom_pmf(n, q, j);
    return sum;
  }
  double lower = 0.0;
  for (int j = 0; j < k; ++j) lower += binom_pmf(n, q, j);
  return 1.0 - lower;
}

double binom_tail_geq(const BinomialParams& p, int k) {
  return binom_tail_geq(p.n, p.q, k);
}

double beta_binom_pmf(int m, const BetaParams& p, int k) {
  check_beta_params(p, "beta_binom_pmf");
  if (m < 0) domain_fail("beta_binom_pmf", "m must be >= 0");
  if (k < 0 || k > m) return 0.0;
  return std::exp(log_choose(m, k) + log_beta(k + p.a, m - k + p.b) -
                  log_beta(p.a, p.b));
}

double beta_binom_tail_geq(int m, const BetaParams& p, int k) {
  check_beta_params(p, "beta_binom_tail_geq");
  if (m < 0) domain_fail("beta_binom_tail_geq", "m must be >= 0");
  if (k < 0) domain_fail("beta_binom_tail_geq", "k must be >= 0");
  if (k <= 0) return 1.0;
  if (k > m) return 0.0;

  const double mean = m * p.a / (p.a + p.b);
  if (static_cast<double>(k) > mean) {
    double sum = 0.0;
    for (int j = m; j >= k; --j) sum += beta_binom_pmf(m, p, j);
    return sum;
  }
  double lower = 0.0;
  for (int j = 0; j < k; ++j) lower += beta_binom_pmf(m, p, j);
  return 1.0 - lower;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    domain_fail("normal_quantile", "p must lie in (0, 1)");
  }
  // Acklam's rational approximation, then one Halley refinement against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double u = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (p <= 1.0 - plow) {
    const double u = p - 0.5;
    const double r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double u = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace multiarm
