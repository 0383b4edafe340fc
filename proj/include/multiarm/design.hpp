#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "multiarm/monitoring.hpp"
#include "multiarm/rng.hpp"

namespace multiarm {

// One mixture component of the randomisation-to-outcome lag.
struct LagPart {
  double weeks{0.0};
  double weight{1.0};
};

struct StrategyArm {
  std::string label;
  std::vector<LagPart> lag_distribution;
  bool monitored{true};
};

// Factorial structure: 2 regimens x (control + 3 shortening strategies) x
// (ribavirin yes/no within shortening) = 14 equally allocated groups, two
// genotype strata per group.
struct TrialDesign {
  std::array<std::string, 2> regimens{"sof-vel", "sof-dcv"};
  std::vector<StrategyArm> strategies;  // [0] is control
  std::array<std::string, 2> ribavirin_levels{"no-rbv", "rbv"};
  std::array<std::string, 2> strata{"gt6", "other"};
  std::array<int, 4> strategy_ratio{1, 2, 2, 2};
  int group_size{78};
  double weeks_per_month{52.0 / 12.0};
  double ltfu{0.0};  // projection haircut, default off

  static constexpr int kGroupsPerRegimen = 7;
  static constexpr int kNumGroups = 14;

  struct Group {
    int regimen{0};
    int strategy{0};
    int ribavirin{-1};  // -1 = not applicable (control)
  };

  int total_n() const { return kNumGroups * group_size; }
  int group_index(int regimen, int strategy, int ribavirin) const;
  Group group(int index) const;
  std::string group_label(int index) const;
  // groups belonging to one strategy (2 for control, 4 otherwise)
  std::vector<int> groups_of_strategy(int strategy) const;
  double mean_lag_months(int strategy) const;
};

void validate(const TrialDesign& design);
TrialDesign default_design();

// Cumulative patients randomised by month; continuous via linear
// interpolation, flat after the last point, linear ramp from (0, 0) up to the
// first point.
struct RecruitmentSchedule {
  std::vector<std::pair<double, double>> cumulative;  // (month, total)

  double at(double month) const;
  double inverse(double count) const;  // first month reaching `count`
  double horizon_months() const;
  double total() const;
  RecruitmentSchedule scaled(double rate_multiplier) const;
};

void validate(const RecruitmentSchedule& schedule);
RecruitmentSchedule default_schedule();

// Expected patients at EOT+12 by calendar month, per group of each strategy,
// with counts reported rounded to nearest.
struct ProjectionRow {
  int month{0};
  long total_recruited{0};
  long total_at_eot12{0};
  // per-group count for each strategy, in design strategy order
  std::vector<std::pair<std::string, long>> per_group_at_eot12;
};

// Unrounded per-group expected count at EOT+12 for each strategy.
std::vector<double> eot12_per_group_exact(const TrialDesign& design,
                                          const RecruitmentSchedule& schedule,
                                          double month);

ProjectionRow project_eot12(const TrialDesign& design,
                            const RecruitmentSchedule& schedule, int month);

struct GroupAssignment {
  int group{0};
  int regimen{0};
  int strategy{0};
  int ribavirin{-1};
};

// Stratified draw over open groups with the design's allocation ratios;
// closed groups get zero weight and the rest renormalise.
GroupAssignment randomize(const TrialDesign& design, int stratum,
                          RngStream& stream,
                          const std::vector<bool>* open_groups = nullptr);

struct ThresholdMonth {
  double threshold{0.0};
  std::optional<int> month;  // empty = unreachable within the horizon
};

struct TimingResult {
  std::optional<int> early_month;  // first month any monitored group reaches
                                   // the minimum analysable size
  std::vector<ThresholdMonth> thresholds;
  int horizon_months{0};
};

// Earliest month, per threshold, at which the best monitored strategy's
// average stop probability reaches the threshold, given projected accrual.
TimingResult timing_search(const TrialDesign& design,
                           const RecruitmentSchedule& schedule,
                           const StoppingRule& rule, const CureRateRange& range,
                           std::vector<double> thresholds, int min_early_n = 5);

}  // namespace multiarm
