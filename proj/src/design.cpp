#include "multiarm/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "multiarm/errors.hpp"

namespace multiarm {

int TrialDesign::group_index(int regimen, int strategy, int ribavirin) const {
  if (regimen < 0 || regimen > 1 || strategy < 0 || strategy > 3) {
    throw std::domain_error("group_index: bad regimen/strategy");
  }
  if (strategy == 0) {
    if (ribavirin != -1) {
      throw std::domain_error("group_index: control has no ribavirin level");
    }
    return regimen * kGroupsPerRegimen;
  }
  if (ribavirin != 0 && ribavirin != 1) {
    throw std::domain_error("group_index: ribavirin must be 0 or 1");
  }
  return regimen * kGroupsPerRegimen + 1 + (strategy - 1) * 2 + ribavirin;
}

TrialDesign::Group TrialDesign::group(int index) const {
  if (index < 0 || index >= kNumGroups) {
    throw std::domain_error("group: index out of range");
  }
  Group g;
  g.regimen = index / kGroupsPerRegimen;
  const int within = index % kGroupsPerRegimen;
  if (within == 0) {
    g.strategy = 0;
    g.ribavirin = -1;
  } else {
    g.strategy = 1 + (within - 1) / 2;
    g.ribavirin = (within - 1) % 2;
  }
  return g;
}

std::string TrialDesign::group_label(int index) const {
  const Group g = group(index);
  std::string label = regimens[g.regimen] + "/" + strategies[g.strategy].label;
  if (g.ribavirin >= 0) label += "/" + ribavirin_levels[g.ribavirin];
  return label;
}

std::vector<int> TrialDesign::groups_of_strategy(int strategy) const {
  std::vector<int> out;
  for (int i = 0; i < kNumGroups; ++i) {
    if (group(i).strategy == strategy) out.push_back(i);
  }
  return out;
}

double TrialDesign::mean_lag_months(int strategy) const {
  const auto& arm = strategies.at(static_cast<std::size_t>(strategy));
  double lag = 0.0;
  for (const auto& part : arm.lag_distribution) {
    lag += part.weight * part.weeks;
  }
  return lag / weeks_per_month;
}

void validate(const TrialDesign& design) {
  if (design.strategies.size() != 4) {
    throw ValidationError("design: exactly 4 strategies expected (control first)");
  }
  if (design.group_size < 2 || design.group_size % 2 != 0) {
    throw ValidationError("design: group size must be even (two strata)");
  }
  if (design.weeks_per_month <= 0.0) {
    throw ValidationError("design: weeks_per_month must be positive");
  }
  if (design.ltfu < 0.0 || design.ltfu >= 1.0) {
    throw ValidationError("design: ltfu must lie in [0, 1)");
  }
  for (const auto& ratio : design.strategy_ratio) {
    if (ratio <= 0) throw ValidationError("design: allocation ratios must be positive");
  }
  for (const auto& arm : design.strategies) {
    double total = 0.0;
    for (const auto& part : arm.lag_distribution) {
      if (part.weeks <= 0.0 || part.weight < 0.0) {
        throw ValidationError("design: lags must be positive, weights non-negative");
      }
      total += part.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw ValidationError("design: lag weights must sum to 1 in " + arm.label);
    }
  }
}

TrialDesign default_design() {
  TrialDesign d;
  d.strategies = {
      StrategyArm{"standard", {{24.0, 1.0}}, false},
      StrategyArm{"peg-ifn", {{16.0, 1.0}}, true},
      // response-guided: 4/8/12 weeks of treatment in a 1:3:1 split
      StrategyArm{"rgt", {{16.0, 0.2}, {20.0, 0.6}, {24.0, 0.2}}, true},
      StrategyArm{"induction-maintenance", {{24.0, 1.0}}, true},
  };
  validate(d);
  return d;
}

void validate(const RecruitmentSchedule& schedule) {
  if (schedule.cumulative.empty()) {
    throw ValidationError("schedule: no points");
  }
  double prev_month = 0.0;
  double prev_count = 0.0;
  for (const auto& [month, count] : schedule.cumulative) {
    if (month < prev_month || count < prev_count) {
      throw ValidationError("schedule: months and totals must be nondecreasing");
    }
    prev_month = month;
    prev_count = count;
  }
}

double RecruitmentSchedule::at(double month) const {
  if (month <= 0.0) return 0.0;
  double m0 = 0.0;
  double c0 = 0.0;
  for (const auto& [m1, c1] : cumulative) {
    if (month <= m1) {
      if (m1 == m0) return c1;
      return c0 + (c1 - c0) * (month - m0) / (m1 - m0);
    }
    m0 = m1;
    c0 = c1;
  }
  return c0;  // flat after the last point
}

double RecruitmentSchedule::inverse(double count) const {
  if (count <= 0.0) return 0.0;
  double m0 = 0.0;
  double c0 = 0.0;
  for (const auto& [m1, c1] : cumulative) {
    if (count <= c1) {
      if (c1 == c0) return m1;
      return m0 + (m1 - m0) * (count - c0) / (c1 - c0);
    }
    m0 = m1;
    c0 = c1;
  }
  return m0;
}

double RecruitmentSchedule::horizon_months() const {
  return cumulative.empty() ? 0.0 : cumulative.back().first;
}

double RecruitmentSchedule::total() const {
  return cumulative.empty() ? 0.0 : cumulative.back().second;
}

RecruitmentSchedule RecruitmentSchedule::scaled(double rate_multiplier) const {
  if (rate_multiplier <= 0.0) {
    throw std::domain_error("schedule: rate multiplier must be positive");
  }
  RecruitmentSchedule out;
  out.cumulative.reserve(cumulative.size());
  for (const auto& [month, count] : cumulative) {
    out.cumulative.emplace_back(month / rate_multiplier, count);
  }
  return out;
}

RecruitmentSchedule default_schedule() {
  RecruitmentSchedule s;
  s.cumulative = {{5, 113},   {6, 153},   {7, 205},   {8, 257},  {9, 309},
                  {10, 361},  {11, 413},  {12, 465},  {13, 517}, {14, 569},
                  {15, 621},  {16, 673},  {17, 725},  {18, 777}, {19, 829},
                  {20, 881},  {21, 933},  {22, 985},  {23, 1037}, {24, 1092}};
  return s;
}

std::vector<double> eot12_per_group_exact(const TrialDesign& design,
                                          const RecruitmentSchedule& schedule,
                                          double month) {
  std::vector<double> out;
  out.reserve(design.strategies.size());
  const double haircut = 1.0 - design.ltfu;
  for (const auto& arm : design.strategies) {
    double count = 0.0;
    for (const auto& part : arm.lag_distribution) {
      const double lag_months = part.weeks / design.weeks_per_month;
      count += part.weight * schedule.at(month - lag_months);
    }
    out.push_back(haircut * count / TrialDesign::kNumGroups);
  }
  return out;
}

ProjectionRow project_eot12(const TrialDesign& design,
                            const RecruitmentSchedule& schedule, int month) {
  validate(design);
  validate(schedule);
  ProjectionRow row;
  row.month = month;
  if (month <= 0) {
    for (const auto& arm : design.strategies) {
      row.per_group_at_eot12.emplace_back(arm.label, 0);
    }
    return row;
  }
  row.total_recruited = std::llround(schedule.at(month));
  const std::vector<double> exact =
      eot12_per_group_exact(design, schedule, month);
  long total = 0;
  for (std::size_t s = 0; s < exact.size(); ++s) {
    const long per_group = std::llround(exact[s]);
    const long multiplicity =
        static_cast<long>(design.groups_of_strategy(static_cast<int>(s)).size());
    row.per_group_at_eot12.emplace_back(design.strategies[s].label, per_group);
    total += per_group * multiplicity;
  }
  row.total_at_eot12 = total;
  return row;
}

GroupAssignment randomize(const TrialDesign& design, int stratum,
                          RngStream& stream,
                          const std::vector<bool>* open_groups) {
  if (stratum < 0 || stratum > 1) {
    throw std::domain_error("randomize: stratum must be 0 or 1");
  }
  std::vector<double> weights(TrialDesign::kNumGroups, 0.0);
  bool any_open = false;
  for (int i = 0; i < TrialDesign::kNumGroups; ++i) {
    if (open_groups && !(*open_groups)[static_cast<std::size_t>(i)]) continue;
    const auto g = design.group(i);
    // the ribavirin split halves each shortening strategy's ratio
    const double w = g.strategy == 0
                         ? design.strategy_ratio[0]
                         : design.strategy_ratio[static_cast<std::size_t>(
                               g.strategy)] /
                               2.0;
    weights[static_cast<std::size_t>(i)] = w;
    any_open = true;
  }
  if (!any_open) throw ValidationError("randomize: all groups are closed");
  const int idx = stream.categorical(weights);
  const auto g = design.group(idx);
  return GroupAssignment{idx, g.regimen, g.strategy, g.ribavirin};
}

TimingResult timing_search(const TrialDesign& design,
                           const RecruitmentSchedule& schedule,
                           const StoppingRule& rule, const CureRateRange& range,
                           std::vector<double> thresholds, int min_early_n) {
  validate(design);
  validate(schedule);
  validate(range);
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::domain_error("timing_search: thresholds must be ascending");
  }

  double max_lag = 0.0;
  for (const auto& arm : design.strategies) {
    for (const auto& part : arm.lag_distribution) {
      max_lag = std::max(max_lag, part.weeks / design.weeks_per_month);
    }
  }
  const int horizon =
      static_cast<int>(std::ceil(schedule.horizon_months() + max_lag)) + 1;

  TimingResult result;
  result.horizon_months = horizon;
  result.thresholds.reserve(thresholds.size());
  for (double t : thresholds) result.thresholds.push_back({t, std::nullopt});

  std::map<int, double> avg_cache;
  auto avg_at = [&](int n) {
    auto it = avg_cache.find(n);
    if (it != avg_cache.end()) return it->second;
    const double v = avg_stop_prob(rule, n, range);
    avg_cache.emplace(n, v);
    return v;
  };

  for (int month = 0; month <= horizon; ++month) {
    const std::vector<double> exact =
        eot12_per_group_exact(design, schedule, month);
    long best_n = 0;
    double best_avg = 0.0;
    bool any_patients = false;
    for (std::size_t s = 0; s < exact.size(); ++s) {
      if (!design.strategies[s].monitored) continue;
      // analysable patients are whole: count completed ones only
      const long n = static_cast<long>(std::floor(exact[s] + 1e-9));
      if (n <= 0) continue;
      any_patients = true;
      best_n = std::max(best_n, n);
      best_avg = std::max(best_avg, avg_at(static_cast<int>(n)));
    }
    if (!any_patients) continue;
    if (!result.early_month && best_n >= min_early_n) {
      result.early_month = month;
    }
    for (auto& tm : result.thresholds) {
      if (!tm.month && best_avg >= tm.threshold) tm.month = month;
    }
  }
  return result;
}

}  // namespace multiarm
