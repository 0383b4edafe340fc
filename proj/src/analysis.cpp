#include "multiarm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

#include "multiarm/errors.hpp"
#include "multiarm/numeric.hpp"
#include "multiarm/rng.hpp"

namespace multiarm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// aggregated design cell
struct Cell {
  int regimen{0};
  int strategy{0};
  int ribavirin{-1};
  int stratum{0};
  long trials{0};
  long successes{0};
};

struct TermSet {
  bool regimen{false};
  std::vector<int> strategy_levels;  // non-control levels with data
  bool ribavirin{false};
  bool stratum{false};
  bool control_present{false};
  InteractionSet interactions{InteractionSet::kNone};
};

std::vector<Cell> aggregate(const std::vector<PatientRecord>& data) {
  std::map<std::tuple<int, int, int, int>, Cell> cells;
  for (const auto& r : data) {
    validate(r);
    auto& c = cells[{r.regimen, r.strategy, r.ribavirin, r.stratum}];
    c.regimen = r.regimen;
    c.strategy = r.strategy;
    c.ribavirin = r.ribavirin;
    c.stratum = r.stratum;
    ++c.trials;
    c.successes += r.outcome;
  }
  std::vector<Cell> out;
  out.reserve(cells.size());
  for (auto& [key, c] : cells) out.push_back(c);
  return out;
}

TermSet detect_terms(const std::vector<Cell>& cells, InteractionSet interactions) {
  TermSet t;
  t.interactions = interactions;
  std::set<int> regimens, strategies, rbv, strata;
  for (const auto& c : cells) {
    regimens.insert(c.regimen);
    strategies.insert(c.strategy);
    if (c.strategy != 0) rbv.insert(c.ribavirin);
    strata.insert(c.stratum);
  }
  t.regimen = regimens.size() > 1;
  t.control_present = strategies.count(0) > 0;
  for (int s : strategies) {
    if (s != 0) t.strategy_levels.push_back(s);
  }
  if (t.control_present == false && t.strategy_levels.size() > 1) {
    // no control arm: first shortening level becomes the reference
    t.strategy_levels.erase(t.strategy_levels.begin());
  } else if (!t.control_present && t.strategy_levels.size() == 1) {
    t.strategy_levels.clear();
  }
  t.ribavirin = rbv.size() > 1;
  t.stratum = strata.size() > 1;
  return t;
}

std::vector<std::string> term_names(const TermSet& t) {
  std::vector<std::string> names{"intercept"};
  if (t.regimen) names.push_back("regimen");
  for (int s : t.strategy_levels) names.push_back("strategy" + std::to_string(s));
  if (t.ribavirin) names.push_back("ribavirin");
  if (t.stratum) names.push_back("stratum");
  if (t.interactions == InteractionSet::kRandomisedPairs) {
    if (t.regimen) {
      for (int s : t.strategy_levels) {
        names.push_back("regimen:strategy" + std::to_string(s));
      }
    }
    if (t.ribavirin) {
      // ribavirin varies within shortening arms only; the first shortening
      // level is the interaction reference
      for (std::size_t i = 1; i < t.strategy_levels.size(); ++i) {
        names.push_back("ribavirin:strategy" +
                        std::to_string(t.strategy_levels[i]));
      }
    }
  }
  return names;
}

// design row for a (possibly counterfactual) profile under the term set
Eigen::RowVectorXd profile_row(const TermSet& t, int regimen, int strategy,
                               double ribavirin, int stratum) {
  std::vector<double> x;
  x.push_back(1.0);
  if (t.regimen) x.push_back(regimen);
  for (int s : t.strategy_levels) x.push_back(strategy == s ? 1.0 : 0.0);
  const double rbv_coded = strategy == 0 ? 0.0 : ribavirin;
  if (t.ribavirin) x.push_back(rbv_coded);
  if (t.stratum) x.push_back(stratum);
  if (t.interactions == InteractionSet::kRandomisedPairs) {
    if (t.regimen) {
      for (int s : t.strategy_levels) {
        x.push_back(strategy == s ? static_cast<double>(regimen) : 0.0);
      }
    }
    if (t.ribavirin) {
      for (std::size_t i = 1; i < t.strategy_levels.size(); ++i) {
        x.push_back(strategy == t.strategy_levels[i] ? rbv_coded : 0.0);
      }
    }
  }
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    row(static_cast<Eigen::Index>(i)) = x[i];
  }
  return row;
}

struct Fitted {
  TermSet terms;
  std::vector<std::string> names;
  Eigen::MatrixXd x;           // cell design matrix
  Eigen::VectorXd trials;
  Eigen::VectorXd successes;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  std::vector<Cell> cells;
  int iterations{0};
};

Eigen::MatrixXd saturated_design(const std::vector<Cell>& cells) {
  const Eigen::Index n = static_cast<Eigen::Index>(cells.size());
  return Eigen::MatrixXd::Identity(n, n);
}

Fitted newton_fit(const std::vector<Cell>& cells, InteractionSet interactions) {
  if (cells.empty()) throw ValidationError("fit_logistic: no data");
  long total_success = 0;
  long total_trials = 0;
  for (const auto& c : cells) {
    total_success += c.successes;
    total_trials += c.trials;
  }
  if (total_success == 0 || total_success == total_trials) {
    throw ValidationError("fit_logistic: outcomes are all identical");
  }

  Fitted fit;
  fit.cells = cells;
  fit.terms = detect_terms(cells, interactions);

  const Eigen::Index n = static_cast<Eigen::Index>(cells.size());
  if (interactions == InteractionSet::kSaturated) {
    fit.x = saturated_design(cells);
    fit.names.clear();
    for (const auto& c : cells) {
      fit.names.push_back("cell(" + std::to_string(c.regimen) + "," +
                          std::to_string(c.strategy) + "," +
                          std::to_string(c.ribavirin) + "," +
                          std::to_string(c.stratum) + ")");
    }
  } else {
    fit.names = term_names(fit.terms);
    fit.x.resize(n, static_cast<Eigen::Index>(fit.names.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = cells[static_cast<std::size_t>(i)];
      fit.x.row(i) = profile_row(fit.terms, c.regimen, c.strategy,
                                 c.ribavirin < 0 ? 0.0 : c.ribavirin, c.stratum);
    }
  }

  const Eigen::Index p = fit.x.cols();
  fit.trials.resize(n);
  fit.successes.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.trials(i) = static_cast<double>(cells[static_cast<std::size_t>(i)].trials);
    fit.successes(i) =
        static_cast<double>(cells[static_cast<std::size_t>(i)].successes);
  }

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fit.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      throw RankError("fit_logistic: design matrix is rank deficient");
    }
  }

  auto loglik = [&](const Eigen::VectorXd& beta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = fit.x.row(i).dot(beta);
      // y*eta - m*log(1+exp(eta)), stable in both tails
      const double log1pexp =
          eta > 30.0 ? eta : std::log1p(std::exp(std::min(eta, 30.0)));
      ll += fit.successes(i) * eta - fit.trials(i) * log1pexp;
    }
    return ll;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = loglik(beta);
  Eigen::MatrixXd hessian(p, p);

  constexpr int kMaxIter = 200;
  int iter = 0;
  for (; iter < kMaxIter; ++iter) {
    Eigen::VectorXd mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = sigmoid(fit.x.row(i).dot(beta));
      mu(i) = fit.trials(i) * pr;
      w(i) = fit.trials(i) * pr * (1.0 - pr);
    }
    const Eigen::VectorXd grad = fit.x.transpose() * (fit.successes - mu);
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-8) break;

    hessian = fit.x.transpose() * w.asDiagonal() * fit.x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().array() < 1e-12).any()) {
      throw RankError("fit_logistic: information matrix is singular");
    }
    Eigen::VectorXd step = ldlt.solve(grad);

    // halve only on a material decrease; noise-level dips near the optimum
    // must not block the full Newton step
    const double slack = 1e-9 * (std::fabs(ll) + 1.0);
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double ll_new = loglik(candidate);
    int halvings = 0;
    while (ll_new < ll - slack && halvings < 40) {
      scale *= 0.5;
      candidate = beta + scale * step;
      ll_new = loglik(candidate);
      ++halvings;
    }
    beta = candidate;
    ll = ll_new;

    if (beta.lpNorm<Eigen::Infinity>() > 15.0) {
      Eigen::Index worst = 0;
      beta.cwiseAbs().maxCoeff(&worst);
      throw SeparationError(
          "fit_logistic: separation detected for " +
              fit.names[static_cast<std::size_t>(worst)],
          fit.names[static_cast<std::size_t>(worst)]);
    }
  }
  if (iter == kMaxIter) {
    throw SeparationError("fit_logistic: Newton iterations did not converge",
                          "unknown");
  }

  fit.beta = beta;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pr = sigmoid(fit.x.row(i).dot(beta));
    w(i) = fit.trials(i) * pr * (1.0 - pr);
  }
  hessian = fit.x.transpose() * w.asDiagonal() * fit.x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
  if (ldlt.info() != Eigen::Success) {
    throw RankError("fit_logistic: information matrix is singular at optimum");
  }
  fit.cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.iterations = iter;
  return fit;
}

// profile used for counterfactual prediction: saturated fits look the cell up
// directly, model fits go through the term row
struct ProfilePredictor {
  const Fitted& fit;

  std::pair<double, Eigen::VectorXd> prob_and_grad(int /*cell_index*/,
                                                   int regimen, int strategy,
                                                   double ribavirin,
                                                   int stratum) const {
    Eigen::RowVectorXd row;
    if (fit.terms.interactions == InteractionSet::kSaturated) {
      // find the observed cell with the requested profile
      int found = -1;
      for (std::size_t i = 0; i < fit.cells.size(); ++i) {
        const auto& c = fit.cells[i];
        const double rbv_coded = c.strategy == 0 ? 0.0
                                 : static_cast<double>(c.ribavirin);
        if (c.regimen == regimen && c.strategy == strategy &&
            c.stratum == stratum &&
            (strategy == 0 || rbv_coded == ribavirin)) {
          found = static_cast<int>(i);
          break;
        }
      }
      if (found < 0) {
        throw ValidationError(
            "fit_logistic: counterfactual profile has no observed cell in the "
            "saturated model");
      }
      row = Eigen::RowVectorXd::Zero(fit.x.cols());
      row(found) = 1.0;
    } else {
      row = profile_row(fit.terms, regimen, strategy, ribavirin, stratum);
    }
    const double pr = sigmoid((row * fit.beta)(0));
    Eigen::VectorXd grad = pr * (1.0 - pr) * row.transpose();
    return {pr, grad};
  }
};

}  // namespace

void validate(const ComparisonSpec& spec) {
  if (!(spec.alpha > 0.0 && spec.alpha <= 0.5)) {
    throw std::domain_error("comparison: alpha must lie in (0, 0.5]");
  }
  if (spec.kind == ComparisonKind::kNonInferiority &&
      spec.sidedness != Sidedness::kOne) {
    throw std::domain_error("comparison: non-inferiority uses a one-sided alpha");
  }
}

NormalPrior flat_prior() { return NormalPrior{0.0, 10000.0}; }

NormalPrior sceptical_prior(ComparisonTarget target) {
  // centred on the null for each comparison, with 90% of the mass within the
  // margin (sd rounded to two decimals)
  switch (target) {
    case ComparisonTarget::kRegimen:
      return NormalPrior{-0.05, 0.0009};
    case ComparisonTarget::kStrategy:
      return NormalPrior{-0.10, 0.0036};
    case ComparisonTarget::kRibavirin:
      return NormalPrior{0.0, 0.0009};
  }
  throw std::logic_error("sceptical_prior: bad target");
}

NormalPrior enthusiastic_prior(ComparisonTarget target) {
  switch (target) {
    case ComparisonTarget::kRegimen:
      return NormalPrior{0.0, 0.0009};
    case ComparisonTarget::kStrategy:
      return NormalPrior{0.0, 0.0036};
    case ComparisonTarget::kRibavirin:
      return NormalPrior{0.05, 0.0009};
  }
  throw std::logic_error("enthusiastic_prior: bad target");
}

std::vector<ComparisonSpec> default_comparisons() {
  ComparisonSpec regimen;
  regimen.target = ComparisonTarget::kRegimen;
  regimen.kind = ComparisonKind::kNonInferiority;
  regimen.margin_or_delta = -0.05;
  regimen.alpha = 0.05;
  regimen.sidedness = Sidedness::kOne;
  regimen.analysis_prior = flat_prior();

  ComparisonSpec strategy = regimen;
  strategy.target = ComparisonTarget::kStrategy;
  strategy.margin_or_delta = -0.10;

  ComparisonSpec ribavirin;
  ribavirin.target = ComparisonTarget::kRibavirin;
  ribavirin.kind = ComparisonKind::kSuperiority;
  ribavirin.margin_or_delta = 0.05;
  ribavirin.alpha = 0.05;
  ribavirin.sidedness = Sidedness::kTwo;
  ribavirin.analysis_prior = flat_prior();

  return {regimen, strategy, ribavirin};
}

void validate(const PatientRecord& r) {
  const bool shape_ok = (r.regimen == 0 || r.regimen == 1) &&
                        (r.strategy >= 0 && r.strategy <= 3) &&
                        (r.stratum == 0 || r.stratum == 1) &&
                        (r.outcome == 0 || r.outcome == 1);
  if (!shape_ok) throw ValidationError("patient record: field out of range");
  if (r.strategy == 0 && r.ribavirin != -1) {
    throw ValidationError("patient record: control arm must have ribavirin n/a");
  }
  if (r.strategy != 0 && r.ribavirin != 0 && r.ribavirin != 1) {
    throw ValidationError("patient record: shortening arm needs ribavirin 0/1");
  }
}

FitResult fit_logistic(const std::vector<PatientRecord>& data,
                       InteractionSet interactions, double interaction_alpha) {
  const auto cells = aggregate(data);
  Fitted fit = newton_fit(cells, interactions);
  ProfilePredictor predictor{fit};

  FitResult out;
  out.terms = fit.names;
  out.beta = fit.beta;
  out.cov = fit.cov;
  out.iterations = fit.iterations;

  double total = 0.0;
  double shortened_total = 0.0;
  for (const auto& c : fit.cells) {
    total += static_cast<double>(c.trials);
    if (c.strategy != 0) shortened_total += static_cast<double>(c.trials);
  }

  const Eigen::Index p = fit.beta.size();
  auto rd_from = [&](auto&& profile_a, auto&& profile_b,
                     auto&& in_population) -> std::optional<RiskDifference> {
    double diff = 0.0;
    double weight = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i < fit.cells.size(); ++i) {
      const auto& c = fit.cells[i];
      if (!in_population(c)) continue;
      const double w = static_cast<double>(c.trials);
      auto [pa, ga] = profile_a(static_cast<int>(i), c);
      auto [pb, gb] = profile_b(static_cast<int>(i), c);
      diff += w * (pa - pb);
      grad += w * (ga - gb);
      weight += w;
    }
    if (weight <= 0.0) return std::nullopt;
    diff /= weight;
    grad /= weight;
    const double var = grad.dot(fit.cov * grad);
    return RiskDifference{diff, std::sqrt(std::max(var, 0.0))};
  };

  auto observed_rbv = [](const Cell& c) {
    return c.strategy == 0 ? 0.0 : static_cast<double>(c.ribavirin);
  };

  // regimen: flip the regimen, standardise over everyone
  if (fit.terms.regimen || interactions == InteractionSet::kSaturated) {
    auto set_regimen = [&](int value) {
      return [&, value](int idx, const Cell& c) {
        (void)idx;
        return predictor.prob_and_grad(idx, value, c.strategy, observed_rbv(c),
                                       c.stratum);
      };
    };
    try {
      out.regimen = rd_from(set_regimen(1), set_regimen(0),
                            [](const Cell&) { return true; });
    } catch (const ValidationError&) {
      out.regimen = std::nullopt;  // saturated fit without both regimen cells
    }
  }

  // strategy: each shortening level (ribavirin averaged over its 1:1 split)
  // against control, standardised over everyone; pooled = equal mix of the
  // shortening levels
  const bool have_control = fit.terms.control_present;
  std::vector<int> strategy_levels = fit.terms.strategy_levels;
  if (interactions == InteractionSet::kSaturated) {
    std::set<int> levels;
    bool control = false;
    for (const auto& c : fit.cells) {
      if (c.strategy == 0) {
        control = true;
      } else {
        levels.insert(c.strategy);
      }
    }
    strategy_levels.assign(levels.begin(), levels.end());
    if (!control) strategy_levels.clear();
  }
  if (have_control || interactions == InteractionSet::kSaturated) {
    auto control_profile = [&](int idx, const Cell& c) {
      return predictor.prob_and_grad(idx, c.regimen, 0, 0.0, c.stratum);
    };
    auto strategy_profile = [&](int level) {
      return [&, level](int idx, const Cell& c) {
        auto [p0, g0] = predictor.prob_and_grad(idx, c.regimen, level, 0.0,
                                                c.stratum);
        auto [p1, g1] = predictor.prob_and_grad(idx, c.regimen, level, 1.0,
                                                c.stratum);
        return std::pair<double, Eigen::VectorXd>{0.5 * (p0 + p1),
                                                  0.5 * (g0 + g1)};
      };
    };
    try {
      for (int level : strategy_levels) {
        out.per_strategy[static_cast<std::size_t>(level - 1)] = rd_from(
            strategy_profile(level), control_profile,
            [](const Cell&) { return true; });
      }
      if (!strategy_levels.empty()) {
        auto pooled_profile = [&](int idx, const Cell& c) {
          double pr = 0.0;
          Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
          for (int level : strategy_levels) {
            auto [pl, gl] = strategy_profile(level)(idx, c);
            pr += pl;
            grad += gl;
          }
          const double k = static_cast<double>(strategy_levels.size());
          return std::pair<double, Eigen::VectorXd>{pr / k, grad / k};
        };
        out.strategy_pooled = rd_from(pooled_profile, control_profile,
                                      [](const Cell&) { return true; });
      }
    } catch (const ValidationError&) {
      // saturated fit lacking some counterfactual cell
    }
  }

  // ribavirin: flip the indicator, standardise over shortening arms only
  if ((fit.terms.ribavirin || interactions == InteractionSet::kSaturated) &&
      shortened_total > 0.0) {
    auto set_rbv = [&](double value) {
      return [&, value](int idx, const Cell& c) {
        return predictor.prob_and_grad(idx, c.regimen, c.strategy, value,
                                       c.stratum);
      };
    };
    try {
      out.ribavirin = rd_from(set_rbv(1.0), set_rbv(0.0),
                              [](const Cell& c) { return c.strategy != 0; });
    } catch (const ValidationError&) {
      out.ribavirin = std::nullopt;
    }
  }

  // interaction report with (1 - alpha) Wald intervals
  if (interactions == InteractionSet::kRandomisedPairs) {
    const double z = normal_quantile(1.0 - interaction_alpha / 2.0);
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
      if (fit.names[j].find(':') == std::string::npos) continue;
      const double est = fit.beta(static_cast<Eigen::Index>(j));
      const double se =
          std::sqrt(fit.cov(static_cast<Eigen::Index>(j),
                            static_cast<Eigen::Index>(j)));
      InteractionTerm term;
      term.name = fit.names[j];
      term.estimate = est;
      term.lower = est - z * se;
      term.upper = est + z * se;
      term.retained = term.lower > 0.0 || term.upper < 0.0;
      out.interactions.push_back(term);
    }
  }
  return out;
}

TestOutcome test_comparison(const RiskDifference& rd,
                            const ComparisonSpec& spec) {
  validate(spec);
  TestOutcome out;
  if (spec.kind == ComparisonKind::kNonInferiority) {
    const double z = normal_quantile(1.0 - spec.alpha);
    out.lower = rd.estimate - z * rd.se;
    out.upper = kInf;
    out.pass = out.lower > spec.margin_or_delta;
  } else {
    const double z = spec.sidedness == Sidedness::kTwo
                         ? normal_quantile(1.0 - spec.alpha / 2.0)
                         : normal_quantile(1.0 - spec.alpha);
    out.lower = rd.estimate - z * rd.se;
    out.upper = rd.estimate + z * rd.se;
    out.pass = out.lower > 0.0 || out.upper < 0.0;
  }
  return out;
}

TestOutcome test_comparison(const FitResult& fit, const ComparisonSpec& spec) {
  std::optional<RiskDifference> rd;
  switch (spec.target) {
    case ComparisonTarget::kRegimen:
      rd = fit.regimen;
      break;
    case ComparisonTarget::kStrategy:
      rd = fit.strategy_pooled;
      break;
    case ComparisonTarget::kRibavirin:
      rd = fit.ribavirin;
      break;
  }
  if (!rd) {
    throw ValidationError("test_comparison: fit lacks the requested contrast");
  }
  return test_comparison(*rd, spec);
}

PosteriorSummary bayes_risk_difference(const RiskDifference& rd,
                                       const ComparisonSpec& spec) {
  if (!spec.analysis_prior) {
    throw std::domain_error("bayes_risk_difference: spec carries no prior");
  }
  if (!(rd.se > 0.0)) {
    throw std::domain_error("bayes_risk_difference: positive SE required");
  }
  const NormalPrior& prior = *spec.analysis_prior;
  if (!(prior.variance > 0.0)) {
    throw std::domain_error("bayes_risk_difference: prior variance must be > 0");
  }
  const double like_var = rd.se * rd.se;
  const double precision = 1.0 / prior.variance + 1.0 / like_var;
  PosteriorSummary out;
  out.variance = 1.0 / precision;
  out.mean = out.variance * (prior.mean / prior.variance + rd.estimate / like_var);
  const double z90 = normal_quantile(0.95);
  const double z95 = normal_quantile(0.975);
  const double sd = std::sqrt(out.variance);
  out.ci90 = {out.mean - z90 * sd, out.mean + z90 * sd};
  out.ci95 = {out.mean - z95 * sd, out.mean + z95 * sd};
  return out;
}

std::map<int, double> PowerScenario::cure_by_group(
    const TrialDesign& design) const {
  std::map<int, double> out;
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    const auto group = design.group(g);
    if (group.strategy == 0) {
      out[g] = standard;
    } else {
      out[g] = group.ribavirin == 1 ? shortened_rbv : shortened_norbv;
    }
  }
  return out;
}

std::vector<PowerScenario> reference_power_scenarios() {
  return {
      PowerScenario{"rbv-5pct-higher", 0.933, 0.983, 0.933},
      PowerScenario{"rbv-2.5pct-higher", 0.950, 0.975, 0.925},
      PowerScenario{"rbv-equal", 0.967, 0.967, 0.917},
  };
}

PowerTable power_study(const TrialDesign& design,
                       const std::map<int, double>& cure_by_group,
                       const std::vector<ComparisonSpec>& specs, int replicates,
                       std::uint64_t seed, int threads, double ltfu) {
  validate(design);
  if (replicates < 1) throw ValidationError("power_study: replicates >= 1");
  if (ltfu < 0.0 || ltfu >= 1.0) {
    throw ValidationError("power_study: ltfu must lie in [0, 1)");
  }
  for (const auto& spec : specs) validate(spec);
  std::vector<double> cure(TrialDesign::kNumGroups, 0.0);
  for (int g = 0; g < TrialDesign::kNumGroups; ++g) {
    const auto it = cure_by_group.find(g);
    if (it == cure_by_group.end()) {
      throw ValidationError("power_study: missing cure rate for a group");
    }
    cure[static_cast<std::size_t>(g)] = it->second;
  }

  // row layout: per spec, its variant list
  struct Slot {
    ComparisonTarget target;
    std::string variant;
    const ComparisonSpec* spec;
  };
  std::vector<Slot> slots;
  for (const auto& spec : specs) {
    switch (spec.target) {
      case ComparisonTarget::kRegimen:
        slots.push_back({spec.target, "regimen", &spec});
        break;
      case ComparisonTarget::kStrategy:
        slots.push_back({spec.target, "pooled", &spec});
        for (std::size_t s = 1; s < design.strategies.size(); ++s) {
          slots.push_back({spec.target, design.strategies[s].label, &spec});
        }
        slots.push_back({spec.target, "all-strategies", &spec});
        break;
      case ComparisonTarget::kRibavirin:
        slots.push_back({spec.target, "ribavirin", &spec});
        break;
    }
  }

  struct Accum {
    std::vector<long> pass;
    std::vector<long> evaluable;
    long fit_errors{0};
    void init(std::size_t k) {
      pass.assign(k, 0);
      evaluable.assign(k, 0);
    }
    void merge(const Accum& o) {
      for (std::size_t i = 0; i < pass.size(); ++i) {
        pass[i] += o.pass[i];
        evaluable[i] += o.evaluable[i];
      }
      fit_errors += o.fit_errors;
    }
  };

  constexpr std::uint64_t kPowerSalt = 0x706f7765;
  const int total_n = design.total_n();

  auto run_replicate = [&](std::uint64_t rep, Accum& acc) {
    RngStream stream(seed, kPowerSalt + rep);
    std::vector<PatientRecord> records;
    records.reserve(static_cast<std::size_t>(total_n));
    for (int j = 0; j < total_n; ++j) {
      const int stratum = stream.bernoulli(0.5) ? 1 : 0;
      const auto assign = randomize(design, stratum, stream);
      const int outcome =
          stream.bernoulli(cure[static_cast<std::size_t>(assign.group)]) ? 1 : 0;
      if (ltfu > 0.0 && stream.bernoulli(ltfu)) continue;  // complete-case
      records.push_back(PatientRecord{assign.regimen, assign.strategy,
                                      assign.ribavirin, stratum, outcome});
    }
    FitResult fit;
    try {
      fit = fit_logistic(records, InteractionSet::kNone);
    } catch (const SeparationError&) {
      ++acc.fit_errors;
      return;
    } catch (const RankError&) {
      ++acc.fit_errors;
      return;
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& slot = slots[i];
      std::optional<bool> pass;
      if (slot.variant == "regimen" && fit.regimen) {
        pass = test_comparison(*fit.regimen, *slot.spec).pass;
      } else if (slot.variant == "pooled" && fit.strategy_pooled) {
        pass = test_comparison(*fit.strategy_pooled, *slot.spec).pass;
      } else if (slot.variant == "ribavirin" && fit.ribavirin) {
        pass = test_comparison(*fit.ribavirin, *slot.spec).pass;
      } else if (slot.variant == "all-strategies") {
        bool all = true;
        bool any = false;
        for (const auto& rd : fit.per_strategy) {
          if (rd) {
            any = true;
            all = all && test_comparison(*rd, *slot.spec).pass;
          }
        }
        if (any) pass = all;
      } else {
        for (std::size_t s = 1; s < design.strategies.size(); ++s) {
          if (slot.variant == design.strategies[s].label &&
              fit.per_strategy[s - 1]) {
            pass = test_comparison(*fit.per_strategy[s - 1], *slot.spec).pass;
          }
        }
      }
      if (pass) {
        ++acc.evaluable[i];
        if (*pass) ++acc.pass[i];
      }
    }
  };

  int n_threads = threads > 0 ? threads
                              : static_cast<int>(std::max(
                                    1u, std::thread::hardware_concurrency()));
  n_threads = std::min(n_threads, replicates);
  std::vector<Accum> partial(static_cast<std::size_t>(n_threads));
  for (auto& a : partial) a.init(slots.size());
  if (n_threads == 1) {
    for (int rep = 0; rep < replicates; ++rep) {
      run_replicate(static_cast<std::uint64_t>(rep), partial[0]);
    }
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int rep = t; rep < replicates; rep += n_threads) {
          run_replicate(static_cast<std::uint64_t>(rep),
                        partial[static_cast<std::size_t>(t)]);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  Accum acc;
  acc.init(slots.size());
  for (const auto& p : partial) acc.merge(p);

  PowerTable table;
  table.replicates = replicates;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    PowerRow row;
    row.target = slots[i].target;
    row.variant = slots[i].variant;
    const long denom = acc.evaluable[i];
    row.power = denom > 0 ? static_cast<double>(acc.pass[i]) / denom : 0.0;
    row.mc_se =
        denom > 0 ? std::sqrt(row.power * (1.0 - row.power) / denom) : 0.0;
    row.fit_errors = static_cast<int>(acc.fit_errors);
    table.rows.push_back(row);
  }
  return table;
}

SampleSizeResult single_group_sample_size(double target, double unacceptable,
                                          double power, double alpha,
                                          double ltfu) {
  if (!(unacceptable < target)) {
    throw std::domain_error("sample size: unacceptable rate must be below target");
  }
  if (!(target > 0.0 && target < 1.0 && unacceptable > 0.0 &&
        unacceptable < 1.0)) {
    throw std::domain_error("sample size: rates must lie in (0, 1)");
  }
  if (!(power > 0.0 && power < 1.0) || !(alpha > 0.0 && alpha < 0.5)) {
    throw std::domain_error("sample size: bad power or alpha");
  }
  if (ltfu < 0.0 || ltfu >= 1.0) {
    throw std::domain_error("sample size: ltfu must lie in [0, 1)");
  }

  const double q0 = 1.0 - target;        // failure rate under H0
  const double q1 = 1.0 - unacceptable;  // failure rate to detect

  auto inflate = [&](int n) {
    return static_cast<int>(std::ceil(n / (1.0 - ltfu) - 1e-12));
  };

  SampleSizeResult out;

  // exact single-stage design: reject when failures >= k
  constexpr int kMaxN = 2000;
  for (int n = 1; n <= kMaxN; ++n) {
    int k = -1;
    for (int cand = 0; cand <= n; ++cand) {
      if (binom_tail_geq(n, q0, cand) <= alpha) {
        k = cand;
        break;
      }
    }
    if (k < 0 || k > n) continue;
    const double achieved = binom_tail_geq(n, q1, k);
    if (achieved >= power) {
      out.evaluable_exact = n;
      out.critical_failures = k;
      break;
    }
  }
  if (out.evaluable_exact == 0) {
    throw std::runtime_error("sample size: exact search exhausted");
  }
  out.total_exact = inflate(out.evaluable_exact);

  // normal approximation on the failure scale
  const double za = normal_quantile(1.0 - alpha);
  const double zb = normal_quantile(power);
  const double delta = q1 - q0;
  const double n_raw = std::pow(
      (za * std::sqrt(q0 * (1.0 - q0)) + zb * std::sqrt(q1 * (1.0 - q1))) /
          delta,
      2.0);
  out.evaluable_approx = static_cast<int>(std::ceil(n_raw - 1e-9));
  out.total_approx = inflate(out.evaluable_approx);

  const double n_cc =
      n_raw / 4.0 * std::pow(1.0 + std::sqrt(1.0 + 4.0 / (n_raw * delta)), 2.0);
  out.evaluable_approx_cc = static_cast<int>(std::ceil(n_cc - 1e-9));
  out.total_approx_cc = inflate(out.evaluable_approx_cc);
  return out;
}

std::vector<InteractionTerm> interaction_screen(
    const std::vector<PatientRecord>& data, double alpha) {
  const FitResult fit =
      fit_logistic(data, InteractionSet::kRandomisedPairs, alpha);
  return fit.interactions;
}

void write_patient_csv(std::ostream& out,
                       const std::vector<PatientRecord>& records) {
  out << "regimen,strategy,ribavirin,stratum,outcome\n";
  for (const auto& r : records) {
    validate(r);
    out << r.regimen << ',' << r.strategy << ',';
    if (r.ribavirin >= 0) out << r.ribavirin;
    out << ',' << r.stratum << ',' << r.outcome << '\n';
  }
}

std::vector<PatientRecord> read_patient_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError("patient csv: empty input");
  }
  if (line.back() == '\r') line.pop_back();
  if (line != "regimen,strategy,ribavirin,stratum,outcome") {
    throw ValidationError("patient csv: unexpected header '" + line + "'");
  }
  std::vector<PatientRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<std::string, 5> fields;
    std::size_t field = 0;
    std::string current;
    for (char ch : line) {
      if (ch == ',') {
        if (field >= 4) {
          throw ValidationError("patient csv: too many fields on line " +
                                std::to_string(line_no));
        }
        fields[field++] = current;
        current.clear();
      } else {
        current += ch;
      }
    }
    if (field != 4) {
      throw ValidationError("patient csv: expected 5 fields on line " +
                            std::to_string(line_no));
    }
    fields[4] = current;
    auto to_int = [&](const std::string& s) {
      try {
        return std::stoi(s);
      } catch (const std::exception&) {
        throw ValidationError("patient csv: bad number on line " +
                              std::to_string(line_no));
      }
    };
    PatientRecord r;
    r.regimen = to_int(fields[0]);
    r.strategy = to_int(fields[1]);
    r.ribavirin = fields[2].empty() ? -1 : to_int(fields[2]);
    r.stratum = to_int(fields[3]);
    r.outcome = to_int(fields[4]);
    validate(r);
    records.push_back(r);
  }
  return records;
}

}  // namespace multiarm
