#pragma once

// End-to-end estimation: point estimate, plug-in or sandwich variance and a
// truncated Wald interval for each estimator.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "seroprev/estimators.hpp"
#include "seroprev/intervals.hpp"
#include "seroprev/model.hpp"
#include "seroprev/variance.hpp"

namespace seroprev {

struct AnalysisOptions {
  double level = 0.95;
  PluginPi plugin = PluginPi::truncated;
  glm::FitOptions fit = {};
};

/// Attaches variance (asymptotic / n) and a Wald interval. A negative
/// variance is a Heywood case: it is kept, flagged, and no interval is formed.
inline PrevalenceEstimate with_variance(PrevalenceEstimate e, double asymptotic, double n,
                                        double level) {
  e.variance = asymptotic / n;
  e.flags.heywood = *e.variance < 0.0;
  if (*e.variance >= 0.0) {
    const auto w = wald_ci(e.point_raw, *e.variance, level);
    e.ci = w.ci;
    e.flags.truncated_ci = w.truncated;
  }
  return e;
}

inline double total_n(const ValidationStudy& v, const MainStudy& m) {
  return static_cast<double>(v.n_sens() + v.n_spec() + m.n());
}

inline PrevalenceEstimate estimate_rg(const ValidationStudy& v, const MainStudy& m,
                                      const AnalysisOptions& opt = {}) {
  const auto a = estimate_assay(v);
  const double rho = m.mean();
  auto e = rogan_gladen(rho, a.sensitivity, a.specificity);
  const double V = var_rg(plugin_pi(e, opt.plugin), a.sensitivity, a.specificity, rho,
                          SampleFractions::of(v, m));
  return with_variance(std::move(e), V, total_n(v, m), opt.level);
}

inline PrevalenceEstimate estimate_srg(const ValidationStudy& v, const MainStudy& m,
                                       const StratumTable& t, const AnalysisOptions& opt = {}) {
  const auto a = estimate_assay(v);
  auto r = srg(m, t, a.sensitivity, a.specificity);
  const double V = var_srg(r, a, SampleFractions::of(v, m), opt.plugin);
  return with_variance(std::move(r.estimate), V, total_n(v, m), opt.level);
}

inline PrevalenceEstimate estimate_srgm(const ValidationStudy& v, const MainStudy& m,
                                        const StratumTable& t, const RegressionSpec& spec,
                                        const AnalysisOptions& opt = {}) {
  const auto a = estimate_assay(v);
  auto r = srgm(m, t, spec, a.sensitivity, a.specificity, opt.fit);
  const double V = var_srgm(r, m, t, spec, v, opt.plugin);
  return with_variance(std::move(r.estimate), V, total_n(v, m), opt.level);
}

struct AnalysisReport {
  AssayEstimate assay{};
  PrevalenceEstimate naive;
  PrevalenceEstimate rg;
  std::optional<PrevalenceEstimate> srg;
  std::optional<PrevalenceEstimate> srgm;
  std::vector<std::string> warnings;
};

inline AnalysisReport analyze(const ValidationStudy& v, const MainStudy& m,
                              const StratumTable* table, const RegressionSpec* spec,
                              const AnalysisOptions& opt = {}) {
  AnalysisReport r;
  r.assay = estimate_assay(v);
  r.naive = naive_prevalence(m, opt.level);
  r.rg = estimate_rg(v, m, opt);
  if (r.rg.flags.assay_below_chance)
    r.warnings.push_back("estimated sensitivity + specificity < 1: the assay does worse than chance");
  if (table) {
    r.srg = estimate_srg(v, m, *table, opt);
    if (r.srg->flags.restricted) {
      std::string list;
      for (const auto& s : r.srg->flags.nonpositivity_strata) list += (list.empty() ? "" : ", ") + s;
      r.warnings.push_back("SRG restricted to sampled strata; dropped " +
                           std::to_string(r.srg->flags.nonpositivity_strata.size()) + ": " + list);
    }
    if (spec) r.srgm = estimate_srgm(v, m, *table, *spec, opt);
  }
  return r;
}

}  // namespace seroprev
