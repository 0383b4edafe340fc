#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "multiarm/design.hpp"
#include "multiarm/monitoring.hpp"

namespace multiarm {

// One monitored run of the whole trial: accrual per schedule, futility looks
// at the listed months, per-group true cure rates.
struct MonitoringScenario {
  TrialDesign design;
  RecruitmentSchedule schedule;
  StoppingRule rule;
  std::vector<int> analysis_months{7, 10, 13, 18};
  std::map<int, double> true_cure;  // group index -> cure probability
  int replicates{5000};
  std::uint64_t seed{42};
  int threads{0};  // 0 = hardware concurrency
};

void validate(const MonitoringScenario& scenario);
MonitoringScenario default_scenario(double cure_everywhere = 0.8);

struct GroupStopStats {
  std::vector<double> cum_stop_prob;  // by analysis, nondecreasing
  std::vector<double> mc_se;
  std::optional<double> mean_stop_month;
  double mean_n_final{0.0};  // average analysable patients at the last look
};

struct StopReport {
  std::vector<int> analysis_months;
  int replicates{0};
  std::vector<GroupStopStats> per_group;  // index = design group index
};

// Patient-level Monte Carlo of sequential monitoring. Stopped groups close
// and later patients rerandomise among open groups; failures persist across
// looks. Bitwise deterministic for a given seed, independent of thread count.
StopReport simulate_monitoring(const MonitoringScenario& scenario);

// Single-group engine with a pinned analysable-n path; the whole-trial
// simulation reduces to this once assignment noise is removed, so tests and
// grids use it directly.
struct GroupSimResult {
  std::vector<double> cum_stop_prob;
  std::vector<double> mc_se;
};

GroupSimResult simulate_group_monitoring(const StoppingRule& rule,
                                         const std::vector<int>& n_at_analysis,
                                         double true_cure, int replicates,
                                         std::uint64_t seed,
                                         std::uint64_t stream_salt = 0x6d6f6e6f);

struct RecruitmentScanRow {
  double multiplier{1.0};
  TimingResult timing;
  // per analysis month (early + thresholds, in order): analysable n per
  // monitored strategy and the projected total
  std::vector<int> months;
  std::vector<long> total_at_eot12;
  std::vector<std::vector<long>> per_group_n;  // [month][strategy]
};

// Rescales the schedule's time axis by each multiplier and reruns the timing
// search plus projections.
std::vector<RecruitmentScanRow> scan_recruitment(
    const TrialDesign& design, const RecruitmentSchedule& schedule,
    const StoppingRule& rule, const CureRateRange& range,
    const std::vector<double>& thresholds,
    const std::vector<double>& multipliers, int min_early_n = 5);

struct CureFloorScanRow {
  double floor{0.6};
  TimingResult timing;
};

// Reruns the timing search with the cure-rate floor replaced by each value.
std::vector<CureFloorScanRow> scan_cure_floor(
    const TrialDesign& design, const RecruitmentSchedule& schedule,
    const StoppingRule& rule, const CureRateRange& range,
    const std::vector<double>& thresholds, const std::vector<double>& floors,
    int min_early_n = 5);

}  // namespace multiarm
