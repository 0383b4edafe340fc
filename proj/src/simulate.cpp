#include "multiarm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "multiarm/errors.hpp"

namespace multiarm {

namespace {

constexpr std::uint64_t kReplicateSalt = 0x7265706c;  // replicate streams

struct PatientPlan {
  double arrival_month{0.0};
};

// deterministic arrival grid: patient j arrives when the cumulative curve
// first reaches j - 1/2
std::vector<PatientPlan> arrival_plan(const RecruitmentSchedule& schedule,
                                      int total_n) {
  std::vector<PatientPlan> plan(static_cast<std::size_t>(total_n));
  for (int j = 0; j < total_n; ++j) {
    plan[static_cast<std::size_t>(j)].arrival_month =
        schedule.inverse(static_cast<double>(j) + 0.5);
  }
  return plan;
}

int hardware_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace

void validate(const MonitoringScenario& scenario) {
  validate(scenario.design);
  validate(scenario.schedule);
  validate(scenario.rule);
  if (scenario.replicates < 1) {
    throw ValidationError("scenario: replicates must be >= 1");
  }
  if (!std::is_sorted(scenario.analysis_months.begin(),
                      scenario.analysis_months.end())) {
    throw ValidationError("scenario: analysis months must be ascending");
  }
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    const auto it = scenario.true_cure.find(g);
    if (it == scenario.true_cure.end()) {
      throw ValidationError("scenario: missing cure rate for a group");
    }
    if (!(it->second >= 0.0 && it->second <= 1.0)) {
      throw ValidationError("scenario: cure rates must lie in [0, 1]");
    }
  }
}

MonitoringScenario default_scenario(double cure_everywhere) {
  MonitoringScenario s;
  s.design = default_design();
  s.schedule = default_schedule();
  s.rule = default_stopping_rule();
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    s.true_cure[g] = cure_everywhere;
  }
  return s;
}

StopReport simulate_monitoring(const MonitoringScenario& scenario) {
  validate(scenario);
  const auto& design = scenario.design;
  const int total_n = design.total_n();
  const int num_analyses = static_cast<int>(scenario.analysis_months.size());
  const auto plan = arrival_plan(scenario.schedule, total_n);
  const auto table = cached_boundary(scenario.rule, design.group_size);

  std::vector<double> cure(TrialDesign::kNumGroups, 0.0);
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    cure[static_cast<std::size_t>(g)] = scenario.true_cure.at(g);
  }

  // per-group month lags, one entry per mixture component, plus component
  // weights for the randomisation-time duration draw
  std::vector<std::vector<double>> lag_months(design.strategies.size());
  std::vector<std::vector<double>> lag_weights(design.strategies.size());
  for (std::size_t s = 0; s < design.strategies.size(); ++s) {
    for (const auto& part : design.strategies[s].lag_distribution) {
      lag_months[s].push_back(part.weeks / design.weeks_per_month);
      lag_weights[s].push_back(part.weight);
    }
  }

  struct Accum {
    std::vector<long> stop_count;        // [group * A + analysis]
    std::vector<long> stop_month_sum;    // [group]
    std::vector<long> stopped_total;     // [group]
    std::vector<long> n_final_sum;       // [group]
    void init(int groups, int analyses) {
      stop_count.assign(static_cast<std::size_t>(groups) * analyses, 0);
      stop_month_sum.assign(static_cast<std::size_t>(groups), 0);
      stopped_total.assign(static_cast<std::size_t>(groups), 0);
      n_final_sum.assign(static_cast<std::size_t>(groups), 0);
    }
    void merge(const Accum& other) {
      for (std::size_t i = 0; i < stop_count.size(); ++i) stop_count[i] += other.stop_count[i];
      for (std::size_t i = 0; i < stop_month_sum.size(); ++i) {
        stop_month_sum[i] += other.stop_month_sum[i];
        stopped_total[i] += other.stopped_total[i];
        n_final_sum[i] += other.n_final_sum[i];
      }
    }
  };

  auto run_replicate = [&](std::uint64_t rep, Accum& acc) {
    RngStream stream(scenario.seed, kReplicateSalt + rep);
    struct Obs {
      double eot12;
      bool failure;
    };
    std::vector<std::vector<Obs>> patients(TrialDesign::kNumGroups);
    for (auto& v : patients) v.reserve(design.group_size + 16);
    std::vector<bool> open(TrialDesign::kNumGroups, true);
    std::vector<int> stopped_at(TrialDesign::kNumGroups, -1);

    std::size_t next_patient = 0;
    auto accrue_until = [&](double month) {
      while (next_patient < plan.size() &&
             plan[next_patient].arrival_month <= month) {
        const int stratum = stream.bernoulli(0.5) ? 1 : 0;
        const auto assign = randomize(design, stratum, stream, &open);
        const auto& lags = lag_months[static_cast<std::size_t>(assign.strategy)];
        std::size_t part = 0;
        if (lags.size() > 1) {
          part = static_cast<std::size_t>(stream.categorical(
              lag_weights[static_cast<std::size_t>(assign.strategy)]));
        }
        const bool fail =
            !stream.bernoulli(cure[static_cast<std::size_t>(assign.group)]);
        patients[static_cast<std::size_t>(assign.group)].push_back(
            Obs{plan[next_patient].arrival_month + lags[part], fail});
        ++next_patient;
      }
    };

    for (int k = 0; k < num_analyses; ++k) {
      const double month = scenario.analysis_months[static_cast<std::size_t>(k)];
      accrue_until(month);
      for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
        const auto sg = design.group(g).strategy;
        if (!design.strategies[static_cast<std::size_t>(sg)].monitored) continue;
        if (!open[static_cast<std::size_t>(g)]) continue;
        long n = 0;
        long f = 0;
        for (const auto& obs : patients[static_cast<std::size_t>(g)]) {
          if (obs.eot12 <= month) {
            ++n;
            if (obs.failure) ++f;
          }
        }
        const auto bound = table->at(static_cast<int>(n));
        if (bound && f >= *bound) {
          open[static_cast<std::size_t>(g)] = false;
          stopped_at[static_cast<std::size_t>(g)] = k;
        }
      }
    }

    const double last_month =
        scenario.analysis_months.empty()
            ? 0.0
            : scenario.analysis_months.back();
    for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
      const int k_stop = stopped_at[static_cast<std::size_t>(g)];
      if (k_stop >= 0) {
        for (int k = k_stop; k < num_analyses; ++k) {
          ++acc.stop_count[static_cast<std::size_t>(g) * num_analyses + k];
        }
        acc.stop_month_sum[static_cast<std::size_t>(g)] +=
            scenario.analysis_months[static_cast<std::size_t>(k_stop)];
        ++acc.stopped_total[static_cast<std::size_t>(g)];
      }
      long n = 0;
      for (const auto& obs : patients[static_cast<std::size_t>(g)]) {
        if (obs.eot12 <= last_month) ++n;
      }
      acc.n_final_sum[static_cast<std::size_t>(g)] += n;
    }
  };

  const int threads = std::min(hardware_threads(scenario.threads),
                               std::max(1, scenario.replicates));
  std::vector<Accum> partial(static_cast<std::size_t>(threads));
  for (auto& a : partial) a.init(TrialDesign::kNumGroups, num_analyses);

  if (threads == 1) {
    for (int rep = 0; rep < scenario.replicates; ++rep) {
      run_replicate(static_cast<std::uint64_t>(rep), partial[0]);
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int rep = t; rep < scenario.replicates; rep += threads) {
          run_replicate(static_cast<std::uint64_t>(rep),
                        partial[static_cast<std::size_t>(t)]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  Accum acc;
  acc.init(TrialDesign::kNumGroups, num_analyses);
  for (const auto& p : partial) acc.merge(p);

  StopReport report;
  report.analysis_months = scenario.analysis_months;
  report.replicates = scenario.replicates;
  report.per_group.resize(TrialDesign::kNumGroups);
  const double r = scenario.replicates;
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    auto& stats = report.per_group[static_cast<std::size_t>(g)];
    stats.cum_stop_prob.resize(static_cast<std::size_t>(num_analyses));
    stats.mc_se.resize(static_cast<std::size_t>(num_analyses));
    for (int k = 0; k < num_analyses; ++k) {
      const double p =
          acc.stop_count[static_cast<std::size_t>(g) * num_analyses + k] / r;
      stats.cum_stop_prob[static_cast<std::size_t>(k)] = p;
      stats.mc_se[static_cast<std::size_t>(k)] = std::sqrt(p * (1.0 - p) / r);
    }
    if (acc.stopped_total[static_cast<std::size_t>(g)] > 0) {
      stats.mean_stop_month =
          static_cast<double>(acc.stop_month_sum[static_cast<std::size_t>(g)]) /
          acc.stopped_total[static_cast<std::size_t>(g)];
    }
    stats.mean_n_final = acc.n_final_sum[static_cast<std::size_t>(g)] / r;
  }
  return report;
}

GroupSimResult simulate_group_monitoring(const StoppingRule& rule,
                                         const std::vector<int>& n_at_analysis,
                                         double true_cure, int replicates,
                                         std::uint64_t seed,
                                         std::uint64_t stream_salt) {
  if (!std::is_sorted(n_at_analysis.begin(), n_at_analysis.end())) {
    throw std::domain_error("group sim: n path must be nondecreasing");
  }
  if (!(true_cure >= 0.0 && true_cure <= 1.0)) {
    throw std::domain_error("group sim: cure rate must lie in [0, 1]");
  }
  const int max_n = n_at_analysis.empty() ? 1 : n_at_analysis.back();
  const auto table = cached_boundary(rule, std::max(max_n, 1));
  const int num_analyses = static_cast<int>(n_at_analysis.size());

  std::vector<long> stop_count(static_cast<std::size_t>(num_analyses), 0);
  for (int rep = 0; rep < replicates; ++rep) {
    RngStream stream(seed, stream_salt + static_cast<std::uint64_t>(rep));
    int n = 0;
    int f = 0;
    for (int k = 0; k < num_analyses; ++k) {
      const int target = n_at_analysis[static_cast<std::size_t>(k)];
      for (; n < target; ++n) {
        if (!stream.bernoulli(true_cure)) ++f;
      }
      const auto bound = table->at(n);
      if (bound && f >= *bound) {
        for (int j = k; j < num_analyses; ++j) {
          ++stop_count[static_cast<std::size_t>(j)];
        }
        break;
      }
    }
  }

  GroupSimResult out;
  out.cum_stop_prob.resize(static_cast<std::size_t>(num_analyses));
  out.mc_se.resize(static_cast<std::size_t>(num_analyses));
  for (int k = 0; k < num_analyses; ++k) {
    const double p = static_cast<double>(stop_count[static_cast<std::size_t>(k)]) /
                     replicates;
    out.cum_stop_prob[static_cast<std::size_t>(k)] = p;
    out.mc_se[static_cast<std::size_t>(k)] =
        std::sqrt(p * (1.0 - p) / replicates);
  }
  return out;
}

std::vector<RecruitmentScanRow> scan_recruitment(
    const TrialDesign& design, const RecruitmentSchedule& schedule,
    const StoppingRule& rule, const CureRateRange& range,
    const std::vector<double>& thresholds,
    const std::vector<double>& multipliers, int min_early_n) {
  std::vector<RecruitmentScanRow> rows;
  rows.reserve(multipliers.size());
  for (double mult : multipliers) {
    if (mult <= 0.0) {
      throw std::domain_error("scan_recruitment: multipliers must be positive");
    }
    RecruitmentScanRow row;
    row.multiplier = mult;
    const RecruitmentSchedule scaled = schedule.scaled(mult);
    row.timing =
        timing_search(design, scaled, rule, range, thresholds, min_early_n);
    if (row.timing.early_month) row.months.push_back(*row.timing.early_month);
    for (const auto& tm : row.timing.thresholds) {
      if (tm.month) row.months.push_back(*tm.month);
    }
    for (int month : row.months) {
      const auto projection = project_eot12(design, scaled, month);
      row.total_at_eot12.push_back(projection.total_at_eot12);
      std::vector<long> per_group;
      for (std::size_t s = 0; s < design.strategies.size(); ++s) {
        if (!design.strategies[s].monitored) continue;
        per_group.push_back(projection.per_group_at_eot12[s].second);
      }
      row.per_group_n.push_back(std::move(per_group));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CureFloorScanRow> scan_cure_floor(
    const TrialDesign& design, const RecruitmentSchedule& schedule,
    const StoppingRule& rule, const CureRateRange& range,
    const std::vector<double>& thresholds, const std::vector<double>& floors,
    int min_early_n) {
  std::vector<CureFloorScanRow> rows;
  rows.reserve(floors.size());
  for (double floor : floors) {
    if (!(floor < range.upper)) {
      throw std::domain_error("scan_cure_floor: floor must lie below the cap");
    }
    CureFloorScanRow row;
    row.floor = floor;
    CureRateRange adjusted = range;
    adjusted.lower = floor;
    row.timing =
        timing_search(design, schedule, rule, adjusted, thresholds, min_early_n);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace multiarm
