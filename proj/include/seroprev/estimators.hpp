#pragma once

// Point estimators: naive sample prevalence, Rogan-Gladen, and the
// nonparametric (SRG) and model-based (SRGM) standardized Rogan-Gladen
// estimators.

#include <cmath>
#include <string>
#include <vector>

#include "seroprev/error.hpp"
#include "seroprev/glm.hpp"
#include "seroprev/intervals.hpp"
#include "seroprev/model.hpp"

namespace seroprev {

struct AssayEstimate {
  double sensitivity;
  double specificity;
};

inline AssayEstimate estimate_assay(const ValidationStudy& v) {
  return {static_cast<double>(v.x_sens_pos()) / static_cast<double>(v.n_sens()),
          static_cast<double>(v.x_spec_neg()) / static_cast<double>(v.n_spec())};
}

/// Sample proportion of positive tests with an exact binomial interval.
inline PrevalenceEstimate naive_prevalence(const MainStudy& m, double level = 0.95) {
  const double rho = m.mean();
  auto e = PrevalenceEstimate::point_only(Method::naive, rho);
  e.variance = rho * (1.0 - rho) / static_cast<double>(m.n());
  e.ci = clopper_pearson(m.positives(), m.n(), level);
  return e;
}

inline constexpr double kDegenerateAssayTolerance = 1e-12;

/// sigma_e + sigma_p - 1, rejecting an uninformative assay.
inline double assay_denominator(double sensitivity, double specificity) {
  const double den = sensitivity + specificity - 1.0;
  if (std::abs(den) < kDegenerateAssayTolerance)
    fail(ErrorKind::degenerate_assay,
         "sensitivity + specificity = 1: the assay carries no information about prevalence");
  return den;
}

/// (rho + sigma_p - 1) / (sigma_e + sigma_p - 1), truncated into [0, 1].
inline PrevalenceEstimate rogan_gladen(double rho, double sensitivity, double specificity,
                                       Method method = Method::rg) {
  const double den = assay_denominator(sensitivity, specificity);
  auto e = PrevalenceEstimate::point_only(method, (rho + specificity - 1.0) / den);
  e.flags.assay_below_chance = den < 0.0;
  return e;
}

struct Restriction {
  StratumTable table;                // retained strata, gamma renormalized
  std::vector<std::string> dropped;  // labels with no main-study records
};

/// Drops unsampled strata and renormalizes the remaining proportions.
inline Restriction restrict_to_sampled(const MainStudy& m, const StratumTable& t) {
  std::vector<Stratum> kept;
  std::vector<std::string> dropped;
  double mass = 0.0;
  for (const auto& s : t.strata()) {
    const auto* tally = m.find(s.label);
    if (tally && tally->trials > 0) {
      kept.push_back(s);
      mass += s.gamma;
    } else {
      dropped.push_back(s.label);
    }
  }
  if (kept.empty()) fail(ErrorKind::no_data, "no stratum of the target table was sampled");
  if (dropped.empty()) return {t, {}};
  for (auto& s : kept) s.gamma /= mass;
  // Renormalized weights can miss 1 by a few ulps; fold the residue into the
  // largest stratum so the table invariant holds exactly.
  double total = 0.0;
  std::size_t largest = 0;
  for (std::size_t j = 0; j < kept.size(); ++j) {
    total += kept[j].gamma;
    if (kept[j].gamma > kept[largest].gamma) largest = j;
  }
  kept[largest].gamma += 1.0 - total;
  return {StratumTable::create(std::move(kept)), std::move(dropped)};
}

/// Rejects main-study records without a stratum or with a label the table
/// does not know.
inline void check_standardizable(const MainStudy& m, const StratumTable& t) {
  if (m.has_missing_strata())
    fail(ErrorKind::input, "standardized estimators need a stratum label on every record (" +
                               std::to_string(m.unlabeled().trials) + " missing)");
  for (const auto& tally : m.tallies())
    if (!t.find(tally.label))
      fail(ErrorKind::input, "main-study stratum '" + tally.label + "' is not in the stratum table");
}

struct SrgResult {
  PrevalenceEstimate estimate;
  Restriction restriction;
  std::vector<double> stratum_means;      // rho_j over retained strata
  std::vector<double> stratum_fractions;  // n_{z_j} / n_3 over retained strata
  double rho = 0.0;                       // standardized apparent prevalence
};

inline SrgResult srg(const MainStudy& m, const StratumTable& t, double sensitivity,
                     double specificity) {
  check_standardizable(m, t);
  SrgResult r{{}, restrict_to_sampled(m, t), {}, {}, 0.0};
  const auto n3 = static_cast<double>(m.n());
  for (const auto& s : r.restriction.table.strata()) {
    const auto* tally = m.find(s.label);
    r.stratum_means.push_back(tally->mean());
    r.stratum_fractions.push_back(static_cast<double>(tally->trials) / n3);
    r.rho += tally->mean() * s.gamma;
  }
  r.estimate = rogan_gladen(r.rho, sensitivity, specificity, Method::srg);
  r.estimate.flags.restricted = !r.restriction.dropped.empty();
  r.estimate.flags.nonpositivity_strata = r.restriction.dropped;
  return r;
}

struct SrgmResult {
  PrevalenceEstimate estimate;
  glm::FitResult fit;
  std::vector<double> stratum_fitted;  // g^{-1}(beta h(z_j)) over every table stratum
  double rho = 0.0;
};

/// Standardizes fitted stratum probabilities over the full table, including
/// strata absent from the main study.
inline SrgmResult srgm(const MainStudy& m, const StratumTable& t, const RegressionSpec& spec,
                       double sensitivity, double specificity,
                       const glm::FitOptions& options = {}) {
  check_standardizable(m, t);
  SrgmResult r;
  r.fit = glm::fit(m, spec, options);
  for (const auto& s : t.strata()) {
    const double mu = glm::predict(r.fit, spec, s.label);
    r.stratum_fitted.push_back(mu);
    r.rho += mu * s.gamma;
  }
  r.estimate = rogan_gladen(r.rho, sensitivity, specificity, Method::srgm);
  for (const auto& s : t.strata())
    if (!m.find(s.label)) r.estimate.flags.nonpositivity_strata.push_back(s.label);
  return r;
}

}  // namespace seroprev
