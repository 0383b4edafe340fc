#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "multiarm/monitoring.hpp"
#include "multiarm/simulate.hpp"

using namespace multiarm;

TEST_CASE("perfect cure rates never stop anything") {
  auto scenario = default_scenario(1.0);
  scenario.replicates = 500;
  const auto report = simulate_monitoring(scenario);
  for (const auto& stats : report.per_group) {
    for (double p : stats.cum_stop_prob) CHECK(p == 0.0);
    CHECK_FALSE(stats.mean_stop_month.has_value());
  }
}

TEST_CASE("single look at n = 7 reduces to the analytic stop probability") {
  const auto rule = default_stopping_rule();
  const auto sim = simulate_group_monitoring(rule, {7}, 0.6, 20000, 99);
  const double analytic = stop_prob(rule, 7, 0.6);  // 0.064 at 3 decimals
  const double se = std::sqrt(analytic * (1.0 - analytic) / 20000.0);
  CHECK(std::fabs(sim.cum_stop_prob[0] - analytic) <= 3.0 * se);
}

TEST_CASE("single-look grid agrees with analytic stop probabilities") {
  const auto rule = default_stopping_rule();
  int cell = 0;
  for (int n : {7, 13, 21, 39}) {
    for (double cure : {0.6, 0.8, 0.9}) {
      const auto sim = simulate_group_monitoring(
          rule, {n}, cure, 20000, 1234, 0x9d2c5680u + static_cast<unsigned>(cell));
      const double analytic = stop_prob(rule, n, cure);
      const double se =
          std::sqrt(std::max(analytic * (1.0 - analytic), 1e-9) / 20000.0);
      CAPTURE(n);
      CAPTURE(cure);
      CHECK(std::fabs(sim.cum_stop_prob[0] - analytic) <= 3.0 * se);
      ++cell;
    }
  }
}

TEST_CASE("multiple looks dominate the final single look") {
  const auto rule = default_stopping_rule();
  // the peg-ifn analysable path at the four default analyses
  const std::vector<int> path{5, 12, 23, 41};
  const double cure = 0.75;
  const auto oracle = simulate_group_monitoring(rule, path, cure, 1000000, 4242);
  const double single = stop_prob(rule, path.back(), cure);
  const double se = oracle.mc_se.back();
  CHECK(oracle.cum_stop_prob.back() > single + 3.0 * se);

  // the whole-trial simulation shows the same dominance for peg-ifn groups
  auto scenario = default_scenario(0.75);
  scenario.replicates = 4000;
  const auto report = simulate_monitoring(scenario);
  const auto design = scenario.design;
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    if (design.group(g).strategy != 1) continue;
    const auto& stats = report.per_group[static_cast<std::size_t>(g)];
    CHECK(stats.cum_stop_prob.back() >
          single + 3.0 * stats.mc_se.back());
  }
}

TEST_CASE("cumulative stop probabilities never decrease") {
  auto scenario = default_scenario(0.8);
  scenario.replicates = 2000;
  const auto report = simulate_monitoring(scenario);
  for (const auto& stats : report.per_group) {
    for (std::size_t k = 1; k < stats.cum_stop_prob.size(); ++k) {
      CHECK(stats.cum_stop_prob[k] >= stats.cum_stop_prob[k - 1]);
    }
  }
}

TEST_CASE("reports are bitwise deterministic across thread counts") {
  auto scenario = default_scenario(0.8);
  scenario.replicates = 1500;
  scenario.threads = 1;
  const auto one = simulate_monitoring(scenario);
  scenario.threads = 2;
  const auto two = simulate_monitoring(scenario);
  scenario.threads = 4;
  const auto four = simulate_monitoring(scenario);
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    const auto& a = one.per_group[static_cast<std::size_t>(g)];
    const auto& b = two.per_group[static_cast<std::size_t>(g)];
    const auto& c = four.per_group[static_cast<std::size_t>(g)];
    for (std::size_t k = 0; k < a.cum_stop_prob.size(); ++k) {
      CHECK(a.cum_stop_prob[k] == b.cum_stop_prob[k]);
      CHECK(a.cum_stop_prob[k] == c.cum_stop_prob[k]);
    }
    CHECK(a.mean_stop_month == b.mean_stop_month);
    CHECK(a.mean_n_final == c.mean_n_final);
  }

  // and a different seed gives a different report
  scenario.threads = 1;
  scenario.seed = 43;
  const auto other = simulate_monitoring(scenario);
  bool any_diff = false;
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    const auto& a = one.per_group[static_cast<std::size_t>(g)];
    const auto& b = other.per_group[static_cast<std::size_t>(g)];
    for (std::size_t k = 0; k < a.cum_stop_prob.size(); ++k) {
      any_diff = any_diff || a.cum_stop_prob[k] != b.cum_stop_prob[k];
    }
  }
  CHECK(any_diff);
}

TEST_CASE("monte carlo error shrinks like one over root replicates") {
  const auto rule = default_stopping_rule();
  const auto small = simulate_group_monitoring(rule, {21}, 0.8, 5000, 7);
  const auto large = simulate_group_monitoring(rule, {21}, 0.8, 20000, 7);
  const double ratio = small.mc_se[0] / large.mc_se[0];
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("closing a failing strategy feeds patients to open groups") {
  auto equal = default_scenario(0.95);
  equal.replicates = 800;
  const auto base = simulate_monitoring(equal);

  auto one_bad = default_scenario(0.95);
  one_bad.replicates = 800;
  for (int g : one_bad.design.groups_of_strategy(1)) one_bad.true_cure[g] = 0.4;
  const auto report = simulate_monitoring(one_bad);

  // the failing strategy stops nearly always...
  for (int g : one_bad.design.groups_of_strategy(1)) {
    CHECK(report.per_group[static_cast<std::size_t>(g)].cum_stop_prob.back() >
          0.9);
  }
  // ...and the surviving monitored strategies end with more analysable
  // patients than under the all-equal scenario
  double moved = 0.0;
  double base_n = 0.0;
  for (int s : {2, 3}) {
    for (int g : one_bad.design.groups_of_strategy(s)) {
      moved += report.per_group[static_cast<std::size_t>(g)].mean_n_final;
      base_n += base.per_group[static_cast<std::size_t>(g)].mean_n_final;
    }
  }
  CHECK(moved > base_n);
}

TEST_CASE("recruitment scan rows behave as the schedule scales") {
  const auto design = default_design();
  const auto schedule = default_schedule();
  const auto rule = default_stopping_rule();
  const CureRateRange range;
  const std::vector<double> thresholds{0.3, 0.5};

  const auto rows = scan_recruitment(design, schedule, rule, range, thresholds,
                                     {1.0, 2.0, 0.5});
  REQUIRE(rows.size() == 3);

  const auto base = timing_search(design, schedule, rule, range, thresholds);
  REQUIRE(rows[0].timing.thresholds.size() == 2);
  CHECK(*rows[0].timing.thresholds[0].month == *base.thresholds[0].month);
  CHECK(*rows[0].timing.thresholds[1].month == *base.thresholds[1].month);

  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    CHECK(*rows[1].timing.thresholds[i].month <= *base.thresholds[i].month);
    CHECK(*rows[2].timing.thresholds[i].month >= *base.thresholds[i].month);
  }

  // patient counts at the faster schedule's analyses stay within one month
  // of recruitment of the baseline counts
  const double month_of_recruitment = 55.0;
  for (std::size_t k = 0; k < rows[0].total_at_eot12.size(); ++k) {
    CHECK(std::fabs(static_cast<double>(rows[1].total_at_eot12[k]) -
                    static_cast<double>(rows[0].total_at_eot12[k])) <=
          month_of_recruitment);
  }
}

TEST_CASE("cure-floor scan") {
  const auto design = default_design();
  const auto schedule = default_schedule();
  const auto rule = default_stopping_rule();
  const CureRateRange range;
  const std::vector<double> thresholds{0.3, 0.5, 0.7};

  const auto rows = scan_cure_floor(design, schedule, rule, range, thresholds,
                                    {0.6, 0.5, 0.89});
  REQUIRE(rows.size() == 3);

  const auto base = timing_search(design, schedule, rule, range, thresholds);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    CHECK(*rows[0].timing.thresholds[i].month == *base.thresholds[i].month);
  }
  // a lower floor raises the average stop probability, so thresholds are met
  // no later
  CHECK(*rows[1].timing.thresholds[0].month <= *base.thresholds[0].month);
  // a floor just under the target leaves the rule nearly powerless: late or
  // unreachable everywhere
  for (const auto& tm : rows[2].timing.thresholds) {
    if (tm.month) {
      CHECK(*tm.month >= *base.thresholds[0].month);
    } else {
      CHECK_FALSE(tm.month.has_value());
    }
  }
  // the strictest threshold is genuinely unreachable at floor 0.89
  CHECK_FALSE(rows[2].timing.thresholds[2].month.has_value());
}

TEST_CASE("scenario validation") {
  auto scenario = default_scenario(0.8);
  scenario.true_cure.erase(3);
  CHECK_THROWS_AS(simulate_monitoring(scenario), ValidationError);

  scenario = default_scenario(0.8);
  scenario.replicates = 0;
  CHECK_THROWS_AS(simulate_monitoring(scenario), ValidationError);

  scenario = default_scenario(0.8);
  scenario.analysis_months = {10, 7};
  CHECK_THROWS_AS(simulate_monitoring(scenario), ValidationError);
}
