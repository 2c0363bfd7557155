#pragma once

// Maximum-likelihood binary regression on stratum-grouped binomial data.
//
// The log-likelihood of grouped data (t_j trials, y_j successes, design row
// h_j) is  sum_j y_j log mu_j + (t_j - y_j) log(1 - mu_j),  mu_j = g^{-1}(beta . h_j).
// Fitting uses Newton-Raphson with the expected information (Fisher
// scoring; identical to Newton for the canonical logit link) and step
// halving whenever a step lowers the likelihood.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "seroprev/error.hpp"
#include "seroprev/model.hpp"

namespace seroprev::glm {

/// Inverse link and its first two derivatives with respect to eta.
struct LinkValues {
  double mu;
  double dmu;
  double d2mu;
};

inline double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline LinkValues inverse_link(Link link, double eta) {
  if (link == Link::logit) {
    const double mu = expit(eta);
    const double d = mu * (1.0 - mu);
    return {mu, d, d * (1.0 - 2.0 * mu)};
  }
  const double phi = normal_pdf(eta);
  return {normal_cdf(eta), phi, -eta * phi};
}

// log(mu) and log(1 - mu) without cancellation in the tails.
inline std::pair<double, double> log_mu_pair(Link link, double eta) {
  if (link == Link::logit) {
    const double lp = -std::log1p(std::exp(-std::abs(eta)));
    return eta >= 0.0 ? std::pair{lp, lp - eta} : std::pair{lp + eta, lp};
  }
  const double r = 1.0 / std::numbers::sqrt2;
  return {std::log(0.5 * std::erfc(-eta * r)), std::log(0.5 * std::erfc(eta * r))};
}

struct GroupedData {
  std::vector<std::string> labels;
  Eigen::MatrixXd design;   // one row per group
  Eigen::VectorXd trials;
  Eigen::VectorXd successes;

  Eigen::Index groups() const { return design.rows(); }
  Eigen::Index p() const { return design.cols(); }
};

/// Groups the main study by stratum label; only sampled strata appear.
inline GroupedData group(const MainStudy& m, const RegressionSpec& spec) {
  if (m.has_missing_strata())
    fail(ErrorKind::input, "regression requires a stratum label on every main-study record");
  const auto& tallies = m.tallies();
  GroupedData g;
  const auto rows = static_cast<Eigen::Index>(tallies.size());
  const auto p = static_cast<Eigen::Index>(spec.p);
  g.design.resize(rows, p);
  g.trials.resize(rows);
  g.successes.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& t = tallies[static_cast<std::size_t>(r)];
    const auto h = spec.row(t.label);
    for (Eigen::Index c = 0; c < p; ++c) g.design(r, c) = h[static_cast<std::size_t>(c)];
    g.trials(r) = static_cast<double>(t.trials);
    g.successes(r) = static_cast<double>(t.positives);
    g.labels.push_back(t.label);
  }
  return g;
}

inline double log_likelihood(const Eigen::VectorXd& beta, const GroupedData& d, Link link) {
  const Eigen::VectorXd eta = d.design * beta;
  double ll = 0.0;
  for (Eigen::Index j = 0; j < d.groups(); ++j) {
    const auto [lmu, l1mu] = log_mu_pair(link, eta(j));
    const double y = d.successes(j);
    const double f = d.trials(j) - y;
    if (y > 0.0) ll += y * lmu;
    if (f > 0.0) ll += f * l1mu;
  }
  return ll;
}

/// Gradient of the log-likelihood.
inline Eigen::VectorXd score(const Eigen::VectorXd& beta, const GroupedData& d, Link link) {
  const Eigen::VectorXd eta = d.design * beta;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(d.p());
  for (Eigen::Index j = 0; j < d.groups(); ++j) {
    const auto lv = inverse_link(link, eta(j));
    const double w = link == Link::logit ? 1.0 : lv.dmu / (lv.mu * (1.0 - lv.mu));
    s += w * (d.successes(j) - d.trials(j) * lv.mu) * d.design.row(j).transpose();
  }
  return s;
}

/// Expected (Fisher) information, sum_j t_j mu'^2 / (mu (1 - mu)) h_j h_j^T.
inline Eigen::MatrixXd information(const Eigen::VectorXd& beta, const GroupedData& d, Link link) {
  const Eigen::VectorXd eta = d.design * beta;
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d.p(), d.p());
  for (Eigen::Index j = 0; j < d.groups(); ++j) {
    const auto lv = inverse_link(link, eta(j));
    const double w = d.trials(j) * lv.dmu * lv.dmu / (lv.mu * (1.0 - lv.mu));
    info.noalias() += w * d.design.row(j).transpose() * d.design.row(j);
  }
  return info;
}

/// Exact Hessian of the log-likelihood. Equals minus the expected
/// information for the logit link.
inline Eigen::MatrixXd hessian(const Eigen::VectorXd& beta, const GroupedData& d, Link link) {
  if (link == Link::logit) return -information(beta, d, link);
  const Eigen::VectorXd eta = d.design * beta;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d.p(), d.p());
  for (Eigen::Index j = 0; j < d.groups(); ++j) {
    const auto lv = inverse_link(link, eta(j));
    const double v = lv.mu * (1.0 - lv.mu);
    const double w = lv.dmu / v;
    const double dw = (lv.d2mu * v - lv.dmu * lv.dmu * (1.0 - 2.0 * lv.mu)) / (v * v);
    const double resid = d.successes(j) - d.trials(j) * lv.mu;
    const double c = dw * resid - d.trials(j) * w * lv.dmu;
    h.noalias() += c * d.design.row(j).transpose() * d.design.row(j);
  }
  return h;
}

// Normal quantile by bisection; only used for the probit starting value.
inline double probit_start(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct FitOptions {
  double score_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  int max_iterations = 100;
  int max_halvings = 20;
  double separation_eta = 30.0;
  // A converged fit with |eta| beyond this sits on the boundary of the
  // parameter space: the score fell under tolerance only because some
  // fitted probability underflowed toward 0 or 1.
  double boundary_eta = 20.0;
};

struct FitResult {
  Link link = Link::logit;
  Eigen::VectorXd beta;
  std::vector<std::string> labels;  // sampled strata, in group order
  Eigen::VectorXd fitted;           // g^{-1}(beta . h) per sampled stratum
  double score_norm = 0.0;          // max-norm of the score at beta
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // log-likelihood after every accepted step
};

inline FitResult fit(const GroupedData& d, Link link, const FitOptions& opt = {}) {
  const auto p = d.p();
  if (p < 1) fail(ErrorKind::design, "regression needs at least one coefficient");
  if (d.groups() < p)
    fail(ErrorKind::design, "p = " + std::to_string(p) + " exceeds the " +
                                std::to_string(d.groups()) + " sampled strata");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.design);
  if (qr.rank() < p)
    fail(ErrorKind::design, "design matrix over sampled strata has rank " +
                                std::to_string(qr.rank()) + " < p = " + std::to_string(p));

  const double total = d.trials.sum();
  const double ybar = d.successes.sum() / total;
  if (ybar <= 0.0 || ybar >= 1.0)
    fail(ErrorKind::separation, "all main-study outcomes are identical; the fit diverges");

  FitResult r;
  r.link = link;
  r.beta = Eigen::VectorXd::Zero(p);
  // Start from the intercept-only solution (exact for the logit link).
  r.beta(0) = link == Link::logit ? logit(ybar) : probit_start(ybar);

  double ll = log_likelihood(r.beta, d, link);
  r.loglik_trace.push_back(ll);
  Eigen::VectorXd s = score(r.beta, d, link);
  for (int it = 0; it < opt.max_iterations; ++it) {
    r.score_norm = s.cwiseAbs().maxCoeff();
    Eigen::LLT<Eigen::MatrixXd> llt(information(r.beta, d, link));
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::singular, "information matrix is not positive definite");
    Eigen::VectorXd step = llt.solve(s);
    if (r.score_norm < opt.score_tolerance) {
      // One more Newton step: quadratic convergence takes beta to machine precision.
      const Eigen::VectorXd polished = r.beta + step;
      const double ll_polished = log_likelihood(polished, d, link);
      if (ll_polished >= ll - 1e-12 * std::abs(ll)) {
        r.beta = polished;
        r.loglik_trace.push_back(ll_polished);
        r.score_norm = score(r.beta, d, link).cwiseAbs().maxCoeff();
      }
      r.converged = true;
      break;
    }

    Eigen::VectorXd next = r.beta + step;
    double ll_next = log_likelihood(next, d, link);
    for (int h = 0; h < opt.max_halvings && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++h) {
      step *= 0.5;
      next = r.beta + step;
      ll_next = log_likelihood(next, d, link);
    }
    r.beta = next;
    ll = ll_next;
    r.loglik_trace.push_back(ll);
    r.iterations = it + 1;
    s = score(r.beta, d, link);

    const double max_beta = std::max(1.0, r.beta.cwiseAbs().maxCoeff());
    if (step.cwiseAbs().maxCoeff() < opt.step_tolerance * max_beta) {
      r.score_norm = s.cwiseAbs().maxCoeff();
      r.converged = true;
      break;
    }
    const double max_eta = (d.design * r.beta).cwiseAbs().maxCoeff();
    if (max_eta > opt.separation_eta && s.cwiseAbs().maxCoeff() >= opt.score_tolerance)
      fail(ErrorKind::separation,
           "linear predictor exceeded " + std::to_string(opt.separation_eta) +
               " before convergence (quasi-complete separation)");
  }
  if (!r.converged)
    fail(ErrorKind::nonconvergence,
         "regression did not converge in " + std::to_string(opt.max_iterations) + " iterations");

  r.labels = d.labels;
  const Eigen::VectorXd eta = d.design * r.beta;
  if (eta.cwiseAbs().maxCoeff() > opt.boundary_eta)
    fail(ErrorKind::separation, "fitted linear predictor reached " +
                                    std::to_string(eta.cwiseAbs().maxCoeff()) +
                                    " (quasi-complete separation)");
  r.fitted.resize(d.groups());
  for (Eigen::Index j = 0; j < d.groups(); ++j) r.fitted(j) = inverse_link(link, eta(j)).mu;
  return r;
}

inline FitResult fit(const MainStudy& m, const RegressionSpec& spec, const FitOptions& opt = {}) {
  return fit(group(m, spec), spec.link, opt);
}

/// g^{-1}(beta . h(label)) for any stratum, sampled or not.
inline double predict(const FitResult& f, const RegressionSpec& spec, const std::string& label) {
  const auto h = spec.row(label);
  double eta = 0.0;
  for (std::size_t l = 0; l < h.size(); ++l) eta += f.beta(static_cast<Eigen::Index>(l)) * h[l];
  return inverse_link(f.link, eta).mu;
}

}  // namespace seroprev::glm
