#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "multiarm/analysis.hpp"
#include "multiarm/design.hpp"
#include "multiarm/monitoring.hpp"
#include "multiarm/simulate.hpp"

namespace multiarm {

// Everything a run needs, assembled from defaults, one config file, and flag
// overrides (flags win). Unknown config keys are rejected.
struct RunConfig {
  TrialDesign design;
  RecruitmentSchedule schedule;
  StoppingRule rule;
  CureRateRange range;

  std::vector<double> thresholds{0.3, 0.5, 0.7};
  int min_early_n{5};
  int boundary_max_n{78};
  std::vector<double> boundary_cure_rates{0.9, 0.95, 0.8, 0.7, 0.6};

  std::vector<int> analysis_months{7, 10, 13, 18};
  std::map<int, double> true_cure;  // group index -> rate
  int replicates{5000};
  std::uint64_t seed{42};
  int threads{0};

  std::string power_scenario{"all"};  // named column or "all"
  int power_replicates{5000};
  double power_ltfu{0.0};

  std::string out_dir{"."};
  bool full_precision{false};
};

RunConfig default_run_config();

// Parse a JSON config file over the defaults. Throws ConfigError on unknown
// keys, malformed values, or invariant violations.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

// Re-checks every embedded object's invariants.
void validate(const RunConfig& config);

}  // namespace multiarm
