#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "multiarm/design.hpp"

namespace multiarm {

enum class ComparisonTarget { kRegimen, kStrategy, kRibavirin };
enum class ComparisonKind { kNonInferiority, kSuperiority };
enum class Sidedness { kOne, kTwo };

struct NormalPrior {
  double mean{0.0};
  double variance{10000.0};  // the flat default
};

// A final-analysis contrast on the risk-difference scale.
struct ComparisonSpec {
  ComparisonTarget target{ComparisonTarget::kRegimen};
  ComparisonKind kind{ComparisonKind::kNonInferiority};
  double margin_or_delta{-0.05};
  double alpha{0.05};
  Sidedness sidedness{Sidedness::kOne};
  std::optional<NormalPrior> analysis_prior;
};

void validate(const ComparisonSpec& spec);

// Presets: non-inferiority margins of 5% (regimen) and 10% (strategy), a 5%
// superiority target for ribavirin, with flat analysis priors.
std::vector<ComparisonSpec> default_comparisons();
NormalPrior flat_prior();
NormalPrior sceptical_prior(ComparisonTarget target);
NormalPrior enthusiastic_prior(ComparisonTarget target);

struct PatientRecord {
  int regimen{0};
  int strategy{0};
  int ribavirin{-1};  // -1 = not applicable, exactly when strategy == 0
  int stratum{0};
  int outcome{0};
};

void validate(const PatientRecord& r);

enum class InteractionSet { kNone, kRandomisedPairs, kSaturated };

struct RiskDifference {
  double estimate{0.0};
  double se{0.0};
};

struct InteractionTerm {
  std::string name;
  double estimate{0.0};
  double lower{0.0};
  double upper{0.0};
  bool retained{false};
};

struct FitResult {
  std::vector<std::string> terms;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;  // inverse information on the log-odds scale
  int iterations{0};

  // marginal (standardised) risk differences
  std::optional<RiskDifference> regimen;
  std::optional<RiskDifference> strategy_pooled;        // pooled shortening vs control
  std::array<std::optional<RiskDifference>, 3> per_strategy;
  std::optional<RiskDifference> ribavirin;              // over shortening arms only

  std::vector<InteractionTerm> interactions;
};

// Damped-Newton logistic fit of outcome on all varying randomised factors and
// stratum, followed by g-computation marginal risk differences with
// delta-method standard errors. The ribavirin indicator is 0 for control
// patients; its marginal effect standardises over shortening-arm patients.
FitResult fit_logistic(const std::vector<PatientRecord>& data,
                       InteractionSet interactions = InteractionSet::kNone,
                       double interaction_alpha = 0.05);

struct TestOutcome {
  bool pass{false};
  double lower{0.0};
  double upper{0.0};
};

// Non-inferiority: one-sided (1-alpha) lower bound must exceed the margin.
// Superiority: two-sided (1-alpha) interval must exclude zero.
TestOutcome test_comparison(const RiskDifference& rd, const ComparisonSpec& spec);
TestOutcome test_comparison(const FitResult& fit, const ComparisonSpec& spec);

struct PosteriorSummary {
  double mean{0.0};
  double variance{0.0};
  std::pair<double, double> ci90;
  std::pair<double, double> ci95;
};

// Conjugate normal update treating the marginal RD and its squared SE as the
// likelihood.
PosteriorSummary bayes_risk_difference(const RiskDifference& rd,
                                       const ComparisonSpec& spec);

struct PowerRow {
  ComparisonTarget target{ComparisonTarget::kRegimen};
  std::string variant;  // "regimen", "pooled", per-strategy label, "all-strategies", "ribavirin"
  double power{0.0};
  double mc_se{0.0};
  int fit_errors{0};
};

struct PowerTable {
  int replicates{0};
  std::vector<PowerRow> rows;
};

// Simulation-based power: randomise the full trial, draw outcomes from the
// per-group cure rates, fit, and apply each comparison. Fit failures are
// counted separately and excluded from the denominators.
PowerTable power_study(const TrialDesign& design,
                       const std::map<int, double>& cure_by_group,
                       const std::vector<ComparisonSpec>& specs, int replicates,
                       std::uint64_t seed, int threads = 0, double ltfu = 0.0);

// Cure-rate columns where the overall rate is ~95%, ribavirin adds 5 points
// within shortening, regimens are equal, and the shortening-vs-standard gap
// varies.
struct PowerScenario {
  std::string name;
  double standard{0.933};
  double shortened_rbv{0.983};
  double shortened_norbv{0.933};
  std::map<int, double> cure_by_group(const TrialDesign& design) const;
};

std::vector<PowerScenario> reference_power_scenarios();

struct SampleSizeResult {
  // single-stage exact binomial design
  int evaluable_exact{0};
  int total_exact{0};
  int critical_failures{0};  // failures triggering rejection at the exact n
  // normal approximation, plain and continuity-corrected
  int evaluable_approx{0};
  int total_approx{0};
  int evaluable_approx_cc{0};
  int total_approx_cc{0};
};

// Smallest evaluable n so that a one-sided level-alpha test of
// H0: cure = target rejects with probability >= power when cure =
// unacceptable; totals inflate by 1/(1-ltfu).
SampleSizeResult single_group_sample_size(double target, double unacceptable,
                                          double power, double alpha,
                                          double ltfu);

// Fits the randomised-pairs interaction model and reports each interaction
// term with its (1-alpha) interval and retention flag.
std::vector<InteractionTerm> interaction_screen(
    const std::vector<PatientRecord>& data, double alpha = 0.05);

// Dataset exchange: header `regimen,strategy,ribavirin,stratum,outcome`, one
// row per patient, ribavirin blank where not applicable.
void write_patient_csv(std::ostream& out,
                       const std::vector<PatientRecord>& records);
std::vector<PatientRecord> read_patient_csv(std::istream& in);

}  // namespace multiarm
