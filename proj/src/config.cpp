#include "multiarm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "multiarm/errors.hpp"

namespace multiarm {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) {
    throw ConfigError(where + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return v.get<int>();
}

void parse_design(const json& obj, TrialDesign& design) {
  require_keys(obj, "design",
               {"group_size", "weeks_per_month", "ltfu", "lag_weeks",
                "strategy_ratio"});
  if (obj.contains("group_size")) {
    design.group_size = as_int(obj["group_size"], "design.group_size");
  }
  if (obj.contains("weeks_per_month")) {
    design.weeks_per_month =
        as_number(obj["weeks_per_month"], "design.weeks_per_month");
  }
  if (obj.contains("ltfu")) {
    design.ltfu = as_number(obj["ltfu"], "design.ltfu");
  }
  if (obj.contains("strategy_ratio")) {
    const auto& arr = obj["strategy_ratio"];
    if (!arr.is_array() || arr.size() != 4) {
      throw ConfigError("design.strategy_ratio: expected 4 integers");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      design.strategy_ratio[i] = as_int(arr[i], "design.strategy_ratio");
    }
  }
  if (obj.contains("lag_weeks")) {
    const auto& lags = obj["lag_weeks"];
    if (!lags.is_object()) throw ConfigError("design.lag_weeks: expected object");
    for (const auto& [label, spec] : lags.items()) {
      bool found = false;
      for (auto& arm : design.strategies) {
        if (arm.label != label) continue;
        found = true;
        arm.lag_distribution.clear();
        if (spec.is_number()) {
          arm.lag_distribution.push_back({spec.get<double>(), 1.0});
        } else if (spec.is_array()) {
          for (const auto& part : spec) {
            if (!part.is_array() || part.size() != 2) {
              throw ConfigError("design.lag_weeks: mixture parts are [weeks, weight]");
            }
            arm.lag_distribution.push_back(
                {as_number(part[0], "lag weeks"), as_number(part[1], "lag weight")});
          }
        } else {
          throw ConfigError("design.lag_weeks: expected number or mixture array");
        }
      }
      if (!found) {
        throw ConfigError("design.lag_weeks: unknown strategy '" + label + "'");
      }
    }
  }
}

void parse_schedule(const json& obj, RecruitmentSchedule& schedule) {
  require_keys(obj, "schedule", {"cumulative", "rate_multiplier"});
  if (obj.contains("cumulative")) {
    const auto& arr = obj["cumulative"];
    if (!arr.is_array() || arr.empty()) {
      throw ConfigError("schedule.cumulative: expected a non-empty array");
    }
    schedule.cumulative.clear();
    for (const auto& point : arr) {
      if (!point.is_array() || point.size() != 2) {
        throw ConfigError("schedule.cumulative: points are [month, total]");
      }
      schedule.cumulative.emplace_back(as_number(point[0], "schedule month"),
                                       as_number(point[1], "schedule total"));
    }
  }
  if (obj.contains("rate_multiplier")) {
    schedule = schedule.scaled(
        as_number(obj["rate_multiplier"], "schedule.rate_multiplier"));
  }
}

void parse_rule(const json& obj, StoppingRule& rule) {
  require_keys(obj, "rule",
               {"prior", "cure_threshold", "posterior_prob_threshold"});
  if (obj.contains("prior")) {
    const auto& arr = obj["prior"];
    if (!arr.is_array() || arr.size() != 2) {
      throw ConfigError("rule.prior: expected [a, b]");
    }
    rule.prior = BetaParams{as_number(arr[0], "rule.prior"),
                            as_number(arr[1], "rule.prior")};
  }
  if (obj.contains("cure_threshold")) {
    rule.cure_threshold = as_number(obj["cure_threshold"], "rule.cure_threshold");
  }
  if (obj.contains("posterior_prob_threshold")) {
    rule.posterior_prob_threshold =
        as_number(obj["posterior_prob_threshold"], "rule.posterior_prob_threshold");
  }
}

void parse_range(const json& obj, CureRateRange& range) {
  require_keys(obj, "range", {"lower", "upper", "weighting"});
  if (obj.contains("lower")) range.lower = as_number(obj["lower"], "range.lower");
  if (obj.contains("upper")) range.upper = as_number(obj["upper"], "range.upper");
  if (obj.contains("weighting")) {
    const std::string w = obj["weighting"].get<std::string>();
    if (w == "uniform") {
      range.weighting = Weighting::kUniform;
    } else if (w == "prior-truncated") {
      range.weighting = Weighting::kPriorTruncated;
    } else {
      throw ConfigError("range.weighting: 'uniform' or 'prior-truncated'");
    }
  }
}

void parse_true_cure(const json& spec, const TrialDesign& design,
                     std::map<int, double>& cure) {
  require_keys(spec, "scenario.true_cure", {"all", "strategy", "group"});
  if (spec.contains("all")) {
    const double v = as_number(spec["all"], "true_cure.all");
    for (int g = 0; g < TrialDesign::kNumGroups; ++g) cure[g] = v;
  }
  if (spec.contains("strategy")) {
    for (const auto& [label, v] : spec["strategy"].items()) {
      bool found = false;
      for (std::size_t s = 0; s < design.strategies.size(); ++s) {
        if (design.strategies[s].label != label) continue;
        found = true;
        for (int g : design.groups_of_strategy(static_cast<int>(s))) {
          cure[g] = as_number(v, "true_cure.strategy");
        }
      }
      if (!found) {
        throw ConfigError("true_cure.strategy: unknown strategy '" + label + "'");
      }
    }
  }
  if (spec.contains("group")) {
    for (const auto& [label, v] : spec["group"].items()) {
      bool found = false;
      for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
        if (design.group_label(g) == label) {
          cure[g] = as_number(v, "true_cure.group");
          found = true;
        }
      }
      if (!found) {
        throw ConfigError("true_cure.group: unknown group '" + label + "'");
      }
    }
  }
}

}  // namespace

RunConfig default_run_config() {
  RunConfig config;
  config.design = default_design();
  config.schedule = default_schedule();
  config.rule = default_stopping_rule();
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) config.true_cure[g] = 0.8;
  return config;
}

RunConfig parse_run_config(const std::string& json_text) {
  RunConfig config = default_run_config();
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require_keys(root, "config",
               {"design", "schedule", "rule", "range", "timing", "scenario",
                "power", "boundary", "output"});

  if (root.contains("design")) parse_design(root["design"], config.design);
  if (root.contains("schedule")) parse_schedule(root["schedule"], config.schedule);
  if (root.contains("rule")) parse_rule(root["rule"], config.rule);
  if (root.contains("range")) parse_range(root["range"], config.range);

  if (root.contains("timing")) {
    const auto& obj = root["timing"];
    require_keys(obj, "timing", {"thresholds", "min_early_n"});
    if (obj.contains("thresholds")) {
      config.thresholds.clear();
      for (const auto& t : obj["thresholds"]) {
        config.thresholds.push_back(as_number(t, "timing.thresholds"));
      }
    }
    if (obj.contains("min_early_n")) {
      config.min_early_n = as_int(obj["min_early_n"], "timing.min_early_n");
    }
  }

  if (root.contains("boundary")) {
    const auto& obj = root["boundary"];
    require_keys(obj, "boundary", {"max_n", "cure_rates"});
    if (obj.contains("max_n")) {
      config.boundary_max_n = as_int(obj["max_n"], "boundary.max_n");
    }
    if (obj.contains("cure_rates")) {
      config.boundary_cure_rates.clear();
      for (const auto& c : obj["cure_rates"]) {
        config.boundary_cure_rates.push_back(as_number(c, "boundary.cure_rates"));
      }
    }
  }

  if (root.contains("scenario")) {
    const auto& obj = root["scenario"];
    require_keys(obj, "scenario",
                 {"analysis_months", "true_cure", "replicates", "seed", "threads"});
    if (obj.contains("analysis_months")) {
      config.analysis_months.clear();
      for (const auto& m : obj["analysis_months"]) {
        config.analysis_months.push_back(as_int(m, "scenario.analysis_months"));
      }
    }
    if (obj.contains("true_cure")) {
      parse_true_cure(obj["true_cure"], config.design, config.true_cure);
    }
    if (obj.contains("replicates")) {
      config.replicates = as_int(obj["replicates"], "scenario.replicates");
    }
    if (obj.contains("seed")) {
      config.seed = static_cast<std::uint64_t>(
          obj["seed"].get<std::int64_t>());
    }
    if (obj.contains("threads")) {
      config.threads = as_int(obj["threads"], "scenario.threads");
    }
  }

  if (root.contains("power")) {
    const auto& obj = root["power"];
    require_keys(obj, "power", {"scenario", "replicates", "ltfu"});
    if (obj.contains("scenario")) {
      config.power_scenario = obj["scenario"].get<std::string>();
    }
    if (obj.contains("replicates")) {
      config.power_replicates = as_int(obj["replicates"], "power.replicates");
    }
    if (obj.contains("ltfu")) {
      config.power_ltfu = as_number(obj["ltfu"], "power.ltfu");
    }
  }

  if (root.contains("output")) {
    const auto& obj = root["output"];
    require_keys(obj, "output", {"dir", "full_precision"});
    if (obj.contains("dir")) config.out_dir = obj["dir"].get<std::string>();
    if (obj.contains("full_precision")) {
      config.full_precision = obj["full_precision"].get<bool>();
    }
  }

  validate(config);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

void validate(const RunConfig& config) {
  try {
    validate(config.design);
    validate(config.schedule);
    validate(config.rule);
    validate(config.range);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!std::is_sorted(config.thresholds.begin(), config.thresholds.end())) {
    throw ConfigError("config: timing thresholds must be ascending");
  }
  if (config.min_early_n < 1) {
    throw ConfigError("config: min_early_n must be >= 1");
  }
  if (config.boundary_max_n < 1) {
    throw ConfigError("config: boundary.max_n must be >= 1");
  }
  if (config.replicates < 1 || config.power_replicates < 1) {
    throw ConfigError("config: replicates must be >= 1");
  }
  if (!std::is_sorted(config.analysis_months.begin(),
                      config.analysis_months.end())) {
    throw ConfigError("config: analysis months must be ascending");
  }
  for (const auto& [g, v] : config.true_cure) {
    if (g < 0 || g >= TrialDesign::kNumGroups || v < 0.0 || v > 1.0) {
      throw ConfigError("config: bad true cure entry");
    }
  }
  if (config.power_ltfu < 0.0 || config.power_ltfu >= 1.0) {
    throw ConfigError("config: power.ltfu must lie in [0, 1)");
  }
  if (config.power_scenario != "all") {
    bool known = false;
    for (const auto& s : reference_power_scenarios()) {
      known = known || s.name == config.power_scenario;
    }
    if (!known) throw ConfigError("config: unknown power scenario");
  }
}

}  // namespace multiarm
