#pragma once

#include <string>

namespace multiarm {

// Shape parameters of a beta distribution. Both must be strictly positive.
struct BetaParams {
  double a{1.0};
  double b{1.0};
};

// Trial count and per-trial event probability of a binomial distribution.
struct BinomialParams {
  int n{0};
  double q{0.0};
};

void check_beta_params(const BetaParams& p, const char* where);
void check_binomial_params(const BinomialParams& p, const char* where);

double log_gamma(double x);
double log_beta(double a, double b);
double log_choose(int n, int k);

// Regularized incomplete beta function I_x(a, b), i.e. the beta CDF at x.
// Continued fraction (modified Lentz) with the symmetry switch at
// x > (a+1)/(a+b+2). Absolute accuracy well below 1e-10 over the shape
// ranges used here.
double reg_inc_beta(double a, double b, double x);
double reg_inc_beta(const BetaParams& p, double x);

double beta_pdf(const BetaParams& p, double x);

// P(X == k) and P(X >= k) for X ~ Binomial(n, q). The tail sums the side
// with the smaller mass to avoid 1 - (almost 1) cancellation; pmf terms go
// through log-gamma so counts up to 1e4 stay finite.
double binom_pmf(int n, double q, int k);
double binom_tail_geq(int n, double q, int k);
double binom_tail_geq(const BinomialParams& p, int k);

// P(Y == k) and P(Y >= k) for Y ~ BetaBinomial(m; a, b).
double beta_binom_pmf(int m, const BetaParams& p, int k);
double beta_binom_tail_geq(int m, const BetaParams& p, int k);

double normal_cdf(double z);
double normal_quantile(double p);

}  // namespace multiarm
