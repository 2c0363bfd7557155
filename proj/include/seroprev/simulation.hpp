#pragma once

// Monte Carlo engine for the four data-generating processes (and the two
// misspecified variants) used to study bias and interval coverage.
//
// Every replicate draws from its own generator seeded from
// (master seed, DGP, scenario id, replicate id), and replicate outcomes are
// reduced in replicate order, so results do not depend on the thread count.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "seroprev/analysis.hpp"
#include "seroprev/error.hpp"
#include "seroprev/glm.hpp"
#include "seroprev/model.hpp"

namespace seroprev::sim {

enum class Dgp { dgp1, dgp2, dgp3, dgp4, dgp3_mis, dgp4_mis };

inline const char* to_string(Dgp d) {
  switch (d) {
    case Dgp::dgp1: return "DGP1";
    case Dgp::dgp2: return "DGP2";
    case Dgp::dgp3: return "DGP3";
    case Dgp::dgp4: return "DGP4";
    case Dgp::dgp3_mis: return "DGP3_MIS";
    case Dgp::dgp4_mis: return "DGP4_MIS";
  }
  return "?";
}

inline std::optional<Dgp> parse_dgp(std::string_view s) {
  for (auto d : {Dgp::dgp1, Dgp::dgp2, Dgp::dgp3, Dgp::dgp4, Dgp::dgp3_mis, Dgp::dgp4_mis})
    if (s == to_string(d)) return d;
  return std::nullopt;
}

/// Whether the stratum model describes the test result X directly or the
/// true status Y (with X then drawn through the assay).
enum class ModelScale { test_result, true_status };

inline ModelScale scale_of(Dgp d) {
  return d == Dgp::dgp3 || d == Dgp::dgp4 ? ModelScale::test_result : ModelScale::true_status;
}

inline bool uses_table_file(Dgp d) { return d != Dgp::dgp1 && d != Dgp::dgp2; }

/// Stratum proportions together with main-study sampling probabilities.
struct SamplingTable {
  StratumTable table;
  std::vector<double> sampling;

  static SamplingTable create(StratumTable table, std::vector<double> sampling) {
    if (sampling.size() != table.size())
      fail(ErrorKind::input, "sampling vector length differs from the stratum count");
    double total = 0.0;
    for (double s : sampling) {
      if (!(s >= 0.0)) fail(ErrorKind::input, "sampling probabilities must be non-negative");
      total += s;
    }
    if (std::abs(total - 1.0) > 1e-10)
      fail(ErrorKind::input, "sampling probabilities sum to " + std::to_string(total));
    return {std::move(table), std::move(sampling)};
  }
};

/// Indicator of one covariate level; labels are '|'-joined covariate levels.
struct IndicatorTerm {
  std::size_t component;
  std::string level;
  double coefficient;
};

inline std::vector<std::string> split_label(std::string_view label) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto bar = label.find('|', start);
    parts.emplace_back(label.substr(start, bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return parts;
}

inline const std::vector<IndicatorTerm>& dgp_terms(Dgp d) {
  static const std::vector<IndicatorTerm> dgp3 = {
      {0, "z11", -1.0}, {1, "z20", -0.6}, {1, "z21", 0.8}, {2, "z30", 0.6}, {2, "z31", 0.4}};
  static const std::vector<IndicatorTerm> dgp4 = {{0, "z11", -1.0}, {1, "z20", 3.25},
                                                  {1, "z21", 0.8},  {2, "z30", 0.6},
                                                  {2, "z31", 0.4},  {3, "z41", 0.1}};
  static const std::vector<IndicatorTerm> none;
  switch (d) {
    case Dgp::dgp3:
    case Dgp::dgp3_mis: return dgp3;
    case Dgp::dgp4:
    case Dgp::dgp4_mis: return dgp4;
    default: return none;
  }
}

/// Intercept plus one indicator per term.
inline RegressionSpec indicator_spec(std::vector<IndicatorTerm> terms, Link link = Link::logit) {
  const std::size_t p = terms.size() + 1;
  auto design = [terms = std::move(terms)](const std::string& label) {
    const auto parts = split_label(label);
    std::vector<double> h{1.0};
    for (const auto& t : terms)
      h.push_back(t.component < parts.size() && parts[t.component] == t.level ? 1.0 : 0.0);
    return h;
  };
  return {link, std::move(design), p};
}

/// Everything needed to generate data for one DGP.
struct DgpModel {
  Dgp dgp;
  SamplingTable strata;
  std::vector<double> offsets;  // linear predictor without intercept (DGPs 3-4)
  RegressionSpec spec;          // correctly specified model for SRGM
};

inline DgpModel make_model(Dgp d, const std::optional<SamplingTable>& table = std::nullopt) {
  switch (d) {
    case Dgp::dgp1:
      return {d, SamplingTable::create(StratumTable::create({{"all", 1.0}}), {1.0}), {0.0},
              RegressionSpec::intercept_only()};
    case Dgp::dgp2:
      return {d,
              SamplingTable::create(StratumTable::create({{"z1", 0.5}, {"z2", 0.5}}), {0.2, 0.8}),
              {0.0, 0.0},
              {Link::logit,
               [](const std::string& l) { return std::vector<double>{1.0, l == "z2" ? 1.0 : 0.0}; },
               2}};
    default: break;
  }
  if (!table) fail(ErrorKind::input, std::string(to_string(d)) + " needs a stratum sampling table");
  DgpModel m{d, *table, {}, indicator_spec(dgp_terms(d))};
  for (const auto& s : table->table.strata()) {
    const auto h = m.spec.row(s.label);
    double eta = 0.0;
    for (std::size_t t = 0; t < dgp_terms(d).size(); ++t) eta += dgp_terms(d)[t].coefficient * h[t + 1];
    m.offsets.push_back(eta);
  }
  return m;
}

/// Prevalence implied by intercept `b0`: on the true-status scale it is
/// sum_j gamma_j expit(b0 + offset_j); on the test-result scale that sum is
/// the apparent prevalence and is mapped through the Rogan-Gladen identity.
inline double implied_prevalence(double b0, std::span<const double> offsets,
                                 std::span<const double> gammas, double sensitivity,
                                 double specificity, ModelScale scale) {
  double mean = 0.0;
  for (std::size_t j = 0; j < offsets.size(); ++j) mean += gammas[j] * glm::expit(b0 + offsets[j]);
  if (scale == ModelScale::true_status) return mean;
  return (mean + specificity - 1.0) / (sensitivity + specificity - 1.0);
}

/// Intercept that makes the implied prevalence equal `target`, by bisection
/// on [-20, 20].
inline double balance_intercept(std::span<const double> offsets, std::span<const double> gammas,
                                double target, double sensitivity, double specificity,
                                ModelScale scale) {
  if (scale == ModelScale::test_result && !(sensitivity + specificity > 1.0))
    fail(ErrorKind::degenerate_assay, "balancing requires sensitivity + specificity > 1");
  auto f = [&](double b0) {
    return implied_prevalence(b0, offsets, gammas, sensitivity, specificity, scale) - target;
  };
  double lo = -20.0, hi = 20.0;
  if (f(lo) > 0.0 || f(hi) < 0.0)
    fail(ErrorKind::input, "target prevalence " + std::to_string(target) +
                               " is unreachable with an intercept in [-20, 20]");
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct ScenarioParams {
  double pi;
  double sensitivity;
  double specificity;
  Count n1 = 40;
  Count n2 = 250;
  Count n3 = 2500;
};

/// Per-stratum probabilities of a positive *true status* (true-status scale)
/// or positive *test* (test-result scale) for one scenario, plus the true pi.
struct StratumProbabilities {
  std::vector<double> prob;
  ModelScale scale;
  double true_pi;
};

inline StratumProbabilities stratum_probabilities(const DgpModel& m, const ScenarioParams& s) {
  StratumProbabilities out{{}, ModelScale::true_status, s.pi};
  if (!(s.pi >= 0.0 && s.pi <= 1.0)) fail(ErrorKind::input, "pi must lie in [0, 1]");
  switch (m.dgp) {
    case Dgp::dgp1: out.prob = {s.pi}; return out;
    case Dgp::dgp2:
      if (1.5 * s.pi > 1.0) fail(ErrorKind::input, "DGP2 requires 1.5 * pi <= 1");
      out.prob = {1.5 * s.pi, 0.5 * s.pi};
      return out;
    default: break;
  }
  out.scale = scale_of(m.dgp);
  std::vector<double> gammas;
  for (const auto& st : m.strata.table.strata()) gammas.push_back(st.gamma);
  const double b0 =
      balance_intercept(m.offsets, gammas, s.pi, s.sensitivity, s.specificity, out.scale);
  for (double off : m.offsets) out.prob.push_back(glm::expit(b0 + off));
  out.true_pi = implied_prevalence(b0, m.offsets, gammas, s.sensitivity, s.specificity, out.scale);
  return out;
}

struct Dataset {
  ValidationStudy validation;
  MainStudy main;
  double true_pi;
};

template <class Rng>
Count draw_binomial(Rng& rng, Count n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<Count>(n, p)(rng);
}

/// Positives among `n` records whose true-status probability is `prob`.
template <class Rng>
Count draw_tests_from_status(Rng& rng, Count n, double prob, double se, double sp) {
  const Count y = draw_binomial(rng, n, prob);
  return draw_binomial(rng, y, se) + draw_binomial(rng, n - y, 1.0 - sp);
}

template <class Rng>
Dataset generate(const DgpModel& m, const ScenarioParams& s, const StratumProbabilities& probs,
                 Rng& rng) {
  const Count sens_pos = draw_binomial(rng, s.n1, s.sensitivity);
  const Count false_pos = draw_binomial(rng, s.n2, 1.0 - s.specificity);
  auto validation = ValidationStudy::from_counts(s.n1, sens_pos, s.n2, s.n2 - false_pos);

  const auto& strata = m.strata.table.strata();
  std::vector<StratumTally> tallies;
  Count remaining = s.n3;
  double mass = 1.0;
  for (std::size_t j = 0; j < strata.size() && remaining > 0; ++j) {
    const double sj = m.strata.sampling[j];
    const double q = sj <= 0.0 ? 0.0 : j + 1 == strata.size() ? 1.0 : std::clamp(sj / mass, 0.0, 1.0);
    const Count nj = draw_binomial(rng, remaining, q);
    remaining -= nj;
    mass -= sj;
    if (nj == 0) continue;
    const Count pos = probs.scale == ModelScale::test_result
                          ? draw_binomial(rng, nj, probs.prob[j])
                          : draw_tests_from_status(rng, nj, probs.prob[j], s.sensitivity,
                                                   s.specificity);
    tallies.push_back({strata[j].label, nj, pos});
  }
  return {validation, MainStudy::from_tallies(tallies), probs.true_pi};
}

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t replicate_seed(std::uint64_t master, Dgp dgp, std::uint64_t scenario,
                                    std::uint64_t replicate) {
  std::uint64_t h = mix64(master);
  h = mix64(h ^ static_cast<std::uint64_t>(dgp));
  h = mix64(h ^ scenario);
  return mix64(h ^ replicate);
}

struct SimulationConfig {
  Dgp dgp = Dgp::dgp1;
  std::vector<double> pi_grid;
  std::vector<double> sigma_e_grid;
  std::vector<double> sigma_p_grid;
  Count n1 = 40;
  Count n2 = 250;
  Count n3 = 2500;
  int replicates = 1000;
  std::uint64_t master_seed = 20210101;
  std::vector<Method> estimators = {Method::rg};
  std::optional<SamplingTable> table;  // required for DGPs 3 and 4
  unsigned threads = 1;
  double level = 0.95;
  PluginPi plugin = PluginPi::truncated;
  bool known_assay = false;  // RG with the true sensitivity/specificity

  void validate() const {
    if (pi_grid.empty() || sigma_e_grid.empty() || sigma_p_grid.empty())
      fail(ErrorKind::input, "simulation grids must be non-empty");
    if (replicates < 1) fail(ErrorKind::input, "replicates must be >= 1");
    if (n1 < 1 || n2 < 1 || n3 < 1) fail(ErrorKind::input, "sample sizes must be >= 1");
    if (estimators.empty()) fail(ErrorKind::input, "no estimators requested");
    for (auto e : estimators)
      if (e == Method::naive) fail(ErrorKind::input, "simulation estimators are RG, SRG and SRGM");
  }
};

struct EstimatorSummary {
  Method method = Method::rg;
  int successes = 0;          // replicates where the estimator was defined
  int failures = 0;
  double mean_bias = 0.0;     // mean of (truncated point - true pi)
  double coverage = 0.0;      // covered / coverage_denominator
  int covered = 0;
  int coverage_denominator = 0;  // successes minus Heywood cases
  int heywood_count = 0;
  int truncation_count = 0;   // truncated point estimates
  double mean_variance = 0.0;      // mean estimated variance of the point
  double empirical_variance = 0.0; // Monte Carlo variance of the point
  std::vector<std::string> failure_reasons;  // distinct messages
};

struct ScenarioResult {
  std::uint64_t scenario_id = 0;
  Dgp dgp = Dgp::dgp1;
  double pi = 0.0;
  double sigma_e = 0.0;
  double sigma_p = 0.0;
  double true_pi = 0.0;
  int replicates = 0;
  double nonpositivity_fraction = 0.0;
  std::optional<std::string> skipped;  // reason, when the scenario is infeasible
  std::vector<EstimatorSummary> estimators;
};

namespace detail {

struct Outcome {
  bool ok = false;
  double point = 0.0;
  double variance = 0.0;
  bool heywood = false;
  bool covered = false;
  bool truncated = false;
  std::string error;
};

struct ReplicateOutcome {
  bool positivity = false;
  std::vector<Outcome> per_estimator;
};

inline Outcome evaluate(Method method, const Dataset& d, const DgpModel& m,
                        const SimulationConfig& cfg, const ScenarioParams& s) {
  Outcome o;
  try {
    AnalysisOptions opt{cfg.level, cfg.plugin, {}};
    PrevalenceEstimate e;
    switch (method) {
      case Method::rg:
        if (cfg.known_assay) {
          e = rogan_gladen(d.main.mean(), s.sensitivity, s.specificity);
          const double V = var_rg(plugin_pi(e, cfg.plugin), s.sensitivity, s.specificity,
                                  d.main.mean(), SampleFractions::of(d.validation, d.main));
          e = with_variance(e, V, total_n(d.validation, d.main), cfg.level);
        } else {
          e = estimate_rg(d.validation, d.main, opt);
        }
        break;
      case Method::srg: e = estimate_srg(d.validation, d.main, m.strata.table, opt); break;
      case Method::srgm:
        e = estimate_srgm(d.validation, d.main, m.strata.table, m.spec, opt);
        break;
      case Method::naive: break;
    }
    o.ok = true;
    o.point = e.point;
    o.variance = e.variance.value_or(0.0);
    o.heywood = e.flags.heywood;
    o.truncated = e.flags.truncated_point;
    o.covered = e.ci && e.ci->low <= d.true_pi && d.true_pi <= e.ci->high;
  } catch (const Error& err) {
    o.error = err.what();
  }
  return o;
}

}  // namespace detail

inline ScenarioResult run_scenario(const SimulationConfig& cfg, const DgpModel& model,
                                   const ScenarioParams& params, std::uint64_t scenario_id) {
  ScenarioResult r;
  r.scenario_id = scenario_id;
  r.dgp = cfg.dgp;
  r.pi = params.pi;
  r.sigma_e = params.sensitivity;
  r.sigma_p = params.specificity;
  for (auto m : cfg.estimators) {
    EstimatorSummary e;
    e.method = m;
    r.estimators.push_back(std::move(e));
  }

  StratumProbabilities probs;
  try {
    probs = stratum_probabilities(model, params);
  } catch (const Error& e) {
    r.skipped = e.what();
    return r;
  }
  r.true_pi = probs.true_pi;
  r.replicates = cfg.replicates;

  std::vector<detail::ReplicateOutcome> outcomes(static_cast<std::size_t>(cfg.replicates));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < cfg.replicates; i = next++) {
      std::mt19937_64 rng(replicate_seed(cfg.master_seed, cfg.dgp, scenario_id,
                                         static_cast<std::uint64_t>(i)));
      const auto data = generate(model, params, probs, rng);
      auto& out = outcomes[static_cast<std::size_t>(i)];
      out.positivity = data.main.tallies().size() == model.strata.table.size();
      for (auto m : cfg.estimators) out.per_estimator.push_back(detail::evaluate(m, data, model, cfg, params));
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.replicates)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  int nonpositive = 0;
  for (const auto& o : outcomes) nonpositive += o.positivity ? 0 : 1;
  r.nonpositivity_fraction = static_cast<double>(nonpositive) / cfg.replicates;

  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    auto& sum = r.estimators[e];
    double bias = 0.0, var = 0.0, mean_point = 0.0;
    for (const auto& o : outcomes) {
      const auto& x = o.per_estimator[e];
      if (!x.ok) {
        ++sum.failures;
        if (std::find(sum.failure_reasons.begin(), sum.failure_reasons.end(), x.error) ==
            sum.failure_reasons.end())
          sum.failure_reasons.push_back(x.error);
        continue;
      }
      ++sum.successes;
      bias += x.point - r.true_pi;
      mean_point += x.point;
      var += x.variance;
      sum.truncation_count += x.truncated ? 1 : 0;
      if (x.heywood) {
        ++sum.heywood_count;
        continue;
      }
      ++sum.coverage_denominator;
      sum.covered += x.covered ? 1 : 0;
    }
    if (sum.successes > 0) {
      sum.mean_bias = bias / sum.successes;
      sum.mean_variance = var / sum.successes;
      mean_point /= sum.successes;
      double ss = 0.0;
      for (const auto& o : outcomes)
        if (o.per_estimator[e].ok) ss += std::pow(o.per_estimator[e].point - mean_point, 2);
      sum.empirical_variance = sum.successes > 1 ? ss / (sum.successes - 1) : 0.0;
    }
    sum.coverage = sum.coverage_denominator > 0
                       ? static_cast<double>(sum.covered) / sum.coverage_denominator
                       : 0.0;
  }
  return r;
}

/// Runs the full factorial grid (sensitivity x specificity x prevalence).
inline std::vector<ScenarioResult> run(const SimulationConfig& cfg) {
  cfg.validate();
  const auto model = make_model(cfg.dgp, cfg.table);
  std::vector<ScenarioResult> results;
  std::uint64_t id = 0;
  for (double se : cfg.sigma_e_grid)
    for (double sp : cfg.sigma_p_grid)
      for (double pi : cfg.pi_grid)
        results.push_back(run_scenario(cfg, model, {pi, se, sp, cfg.n1, cfg.n2, cfg.n3}, id++));
  return results;
}

}  // namespace seroprev::sim
