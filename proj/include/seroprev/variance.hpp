#pragma once

// Asymptotic variance estimators for the Rogan-Gladen family.
//
// Every function here returns the asymptotic variance V of sqrt(n)(pi_hat - pi);
// divide by n = n1 + n2 + n3 for the variance of the estimate itself.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>

#include "seroprev/error.hpp"
#include "seroprev/estimators.hpp"
#include "seroprev/glm.hpp"
#include "seroprev/model.hpp"

namespace seroprev {

/// Which value of pi is plugged into the variance formulas: the estimate
/// truncated into [0, 1] (default) or the raw root of the estimating equations.
enum class PluginPi { truncated, raw };

inline double plugin_pi(const PrevalenceEstimate& e, PluginPi mode) {
  return mode == PluginPi::truncated ? e.point : e.point_raw;
}

/// Plug-in variance of the Rogan-Gladen estimator.
inline double var_rg(double pi, double sensitivity, double specificity, double rho,
                     const SampleFractions& c) {
  const double den = assay_denominator(sensitivity, specificity);
  const double num = pi * pi * sensitivity * (1.0 - sensitivity) / c.c1 +
                     (1.0 - pi) * (1.0 - pi) * specificity * (1.0 - specificity) / c.c2 +
                     rho * (1.0 - rho) / c.c3;
  return num / (den * den);
}

/// Plug-in variance of the nonparametric standardized estimator.
/// `stratum_fractions` are the sampling fractions n_{z_j} / n_3.
inline double var_srg(double pi, double sensitivity, double specificity,
                      std::span<const double> stratum_means,
                      std::span<const double> stratum_fractions,
                      std::span<const double> gammas, const SampleFractions& c) {
  if (stratum_means.size() != gammas.size() || stratum_fractions.size() != gammas.size())
    fail(ErrorKind::input, "var_srg: stratum vectors differ in length");
  const double den = assay_denominator(sensitivity, specificity);
  double strata = 0.0;
  for (std::size_t j = 0; j < gammas.size(); ++j) {
    if (!(stratum_fractions[j] > 0.0))
      fail(ErrorKind::no_data, "var_srg: retained stratum " + std::to_string(j) + " is empty");
    const double r = stratum_means[j];
    strata += gammas[j] * gammas[j] * r * (1.0 - r) / (c.c3 * stratum_fractions[j]);
  }
  const double num = pi * pi * sensitivity * (1.0 - sensitivity) / c.c1 +
                     (1.0 - pi) * (1.0 - pi) * specificity * (1.0 - specificity) / c.c2 +
                     strata;
  return num / (den * den);
}

inline double var_srg(const SrgResult& r, const AssayEstimate& a, const SampleFractions& c,
                      PluginPi mode = PluginPi::truncated) {
  std::vector<double> gammas;
  for (const auto& s : r.restriction.table.strata()) gammas.push_back(s.gamma);
  return var_srg(plugin_pi(r.estimate, mode), a.sensitivity, a.specificity, r.stratum_means,
                 r.stratum_fractions, gammas, c);
}

/// Bread, meat and covariance of an M-estimator.
struct SandwichParts {
  Eigen::MatrixXd bread;  // A: minus the mean Jacobian of psi
  Eigen::MatrixXd meat;   // B: mean outer product of psi
  Eigen::MatrixXd cov;    // A^{-1} B A^{-T} / n
  double n = 0.0;

  /// Asymptotic variance of the last parameter (the prevalence).
  double asymptotic_last() const {
    const auto d = cov.rows() - 1;
    return cov(d, d) * n;
  }
};

inline SandwichParts assemble_sandwich(Eigen::MatrixXd bread, Eigen::MatrixXd meat, double n) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(bread);
  if (!lu.isInvertible()) fail(ErrorKind::singular, "sandwich bread matrix is singular");
  const Eigen::MatrixXd inv = lu.inverse();
  Eigen::MatrixXd cov = inv * meat * inv.transpose() / n;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {std::move(bread), std::move(meat), std::move(cov), n};
}

/// Empirical sandwich for the model-based standardized estimator. Parameter
/// order is (sigma_e, sigma_p, beta_1..beta_p, rho, pi).
inline SandwichParts srgm_sandwich(const SrgmResult& r, const MainStudy& m, const StratumTable& t,
                                   const RegressionSpec& spec, const ValidationStudy& v,
                                   PluginPi mode = PluginPi::truncated) {
  const auto assay = estimate_assay(v);
  const double se = assay.sensitivity;
  const double sp = assay.specificity;
  const double den = assay_denominator(se, sp);
  const double pi = plugin_pi(r.estimate, mode);

  const auto data = glm::group(m, spec);
  const auto p = data.p();
  const auto dim = p + 4;
  const auto i_rho = p + 2;
  const auto i_pi = p + 3;
  const double n = static_cast<double>(v.n_sens() + v.n_spec() + m.n());

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim, dim);
  A(0, 0) = static_cast<double>(v.n_sens()) / n;
  A(1, 1) = static_cast<double>(v.n_spec()) / n;
  B(0, 0) = A(0, 0) * se * (1.0 - se);
  B(1, 1) = A(1, 1) * sp * (1.0 - sp);

  const Eigen::VectorXd eta = data.design * r.fit.beta;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < data.groups(); ++j) {
    const auto lv = glm::inverse_link(spec.link, eta(j));
    const double var = lv.mu * (1.0 - lv.mu);
    const double w = lv.dmu / var;
    const double y = data.successes(j);
    const double f = data.trials(j) - y;
    const auto h = data.design.row(j).transpose();
    info.noalias() += data.trials(j) * w * lv.dmu * h * h.transpose();
    // sum over the group's records of w^2 (X - mu)^2
    const double sq = w * w * (y * (1.0 - lv.mu) * (1.0 - lv.mu) + f * lv.mu * lv.mu);
    outer.noalias() += sq * h * h.transpose();
  }
  Eigen::LLT<Eigen::MatrixXd> info_check(info);
  if (!info.allFinite() || info_check.info() != Eigen::Success)
    fail(ErrorKind::singular, "SRGM sandwich: information block B' is singular");
  A.block(2, 2, p, p) = info / n;
  B.block(2, 2, p, p) = outer / n;

  // Standardization row: -d/d beta of sum_j g^{-1}(beta h(z_j)) gamma_j.
  for (const auto& s : t.strata()) {
    const auto h = spec.row(s.label);
    double e = 0.0;
    for (Eigen::Index l = 0; l < p; ++l) e += r.fit.beta(l) * h[static_cast<std::size_t>(l)];
    const double dmu = glm::inverse_link(spec.link, e).dmu;
    for (Eigen::Index l = 0; l < p; ++l)
      A(i_rho, 2 + l) -= h[static_cast<std::size_t>(l)] * dmu * s.gamma;
  }
  A(i_rho, i_rho) = 1.0;
  A(i_pi, 0) = pi;
  A(i_pi, 1) = pi - 1.0;
  A(i_pi, i_rho) = -1.0;
  A(i_pi, i_pi) = den;

  return assemble_sandwich(std::move(A), std::move(B), n);
}

/// Asymptotic variance of the model-based standardized estimator. May be
/// negative only through rounding; callers flag that as a Heywood case.
inline double var_srgm(const SrgmResult& r, const MainStudy& m, const StratumTable& t,
                       const RegressionSpec& spec, const ValidationStudy& v,
                       PluginPi mode = PluginPi::truncated) {
  return srgm_sandwich(r, m, t, spec, v, mode).asymptotic_last();
}

}  // namespace seroprev
