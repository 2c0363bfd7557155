#pragma once

// Generic numeric sandwich: bread by central finite differences of the
// summed estimating functions, meat by the empirical mean of psi psi^T.
// Used as an independent check on the closed-form variance estimators.
//
// A stack describes the data as groups of identical observations. Global
// equations (standardization and Rogan-Gladen rows) are spread evenly over
// the n observations, so each contributes g(theta) / n; at the root they
// vanish and add nothing to the meat.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <vector>

#include "seroprev/estimators.hpp"
#include "seroprev/glm.hpp"
#include "seroprev/model.hpp"
#include "seroprev/variance.hpp"

namespace seroprev {

template <class S>
concept EstimatingStack = requires(const S& s, const Eigen::VectorXd& theta) {
  { s.dimension() } -> std::convertible_to<Eigen::Index>;
  { s.weights() } -> std::convertible_to<Eigen::VectorXd>;
  // groups x dimension matrix of per-observation psi values
  { s.evaluate(theta) } -> std::convertible_to<Eigen::MatrixXd>;
};

template <EstimatingStack S>
SandwichParts numeric_sandwich(const S& stack, const Eigen::VectorXd& theta_hat) {
  const Eigen::Index dim = stack.dimension();
  const Eigen::VectorXd w = stack.weights();
  const double n = w.sum();

  Eigen::MatrixXd bread(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta_hat(j)));
    Eigen::VectorXd up = theta_hat, down = theta_hat;
    up(j) += h;
    down(j) -= h;
    const Eigen::VectorXd sum_up = stack.evaluate(up).transpose() * w;
    const Eigen::VectorXd sum_down = stack.evaluate(down).transpose() * w;
    bread.col(j) = -(sum_up - sum_down) / ((up(j) - down(j)) * n);
  }
  const Eigen::MatrixXd psi = stack.evaluate(theta_hat);
  const Eigen::MatrixXd meat = psi.transpose() * w.asDiagonal() * psi / n;
  return assemble_sandwich(std::move(bread), meat, n);
}

namespace detail {

// Rows for the two validation studies: (sens, X=1), (sens, X=0),
// (spec, X=0), (spec, X=1).
inline void validation_rows(const ValidationStudy& v, std::vector<double>& weights) {
  weights.push_back(static_cast<double>(v.x_sens_pos()));
  weights.push_back(static_cast<double>(v.n_sens() - v.x_sens_pos()));
  weights.push_back(static_cast<double>(v.x_spec_neg()));
  weights.push_back(static_cast<double>(v.n_spec() - v.x_spec_neg()));
}

inline void fill_validation_psi(Eigen::MatrixXd& psi, double se, double sp) {
  psi(0, 0) = 1.0 - se;
  psi(1, 0) = -se;
  psi(2, 1) = 1.0 - sp;
  psi(3, 1) = -sp;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

/// theta = (sigma_e, sigma_p, rho, pi).
class RgStack {
 public:
  RgStack(const ValidationStudy& v, const MainStudy& m) : v_(v), m_(m) {
    std::vector<double> w;
    detail::validation_rows(v, w);
    w.push_back(static_cast<double>(m.positives()));
    w.push_back(static_cast<double>(m.n() - m.positives()));
    weights_ = detail::to_vector(w);
    n_ = weights_.sum();
  }

  Eigen::Index dimension() const { return 4; }
  const Eigen::VectorXd& weights() const { return weights_; }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& th) const {
    const double se = th(0), sp = th(1), rho = th(2), pi = th(3);
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(6, 4);
    detail::fill_validation_psi(psi, se, sp);
    psi(4, 2) = 1.0 - rho;
    psi(5, 2) = -rho;
    psi.col(3).setConstant(((rho + sp - 1.0) - pi * (se + sp - 1.0)) / n_);
    return psi;
  }

  /// Root of the stack (untruncated estimate).
  Eigen::VectorXd theta_hat() const {
    const auto a = estimate_assay(v_);
    const double rho = m_.mean();
    return Eigen::Vector4d(a.sensitivity, a.specificity, rho,
                           rogan_gladen(rho, a.sensitivity, a.specificity).point_raw);
  }

 private:
  ValidationStudy v_;
  MainStudy m_;
  Eigen::VectorXd weights_;
  double n_;
};

/// theta = (sigma_e, sigma_p, rho_1..rho_k, rho, pi) over the strata of
/// `table`, all of which must be sampled (restrict first).
class SrgStack {
 public:
  SrgStack(const ValidationStudy& v, const MainStudy& m, const StratumTable& table)
      : v_(v), table_(table) {
    std::vector<double> w;
    detail::validation_rows(v, w);
    for (const auto& s : table.strata()) {
      const auto* t = m.find(s.label);
      if (!t || t->trials == 0) fail(ErrorKind::no_data, "SrgStack: stratum '" + s.label + "' unsampled");
      w.push_back(static_cast<double>(t->positives));
      w.push_back(static_cast<double>(t->trials - t->positives));
      means_.push_back(t->mean());
    }
    weights_ = detail::to_vector(w);
    n_ = weights_.sum();
  }

  Eigen::Index dimension() const { return static_cast<Eigen::Index>(table_.size()) + 4; }
  const Eigen::VectorXd& weights() const { return weights_; }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& th) const {
    const auto k = static_cast<Eigen::Index>(table_.size());
    const double se = th(0), sp = th(1), rho = th(k + 2), pi = th(k + 3);
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(weights_.size(), k + 4);
    detail::fill_validation_psi(psi, se, sp);
    double standardized = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      psi(4 + 2 * j, 2 + j) = 1.0 - th(2 + j);
      psi(5 + 2 * j, 2 + j) = -th(2 + j);
      standardized += th(2 + j) * table_[static_cast<std::size_t>(j)].gamma;
    }
    psi.col(k + 2).setConstant((standardized - rho) / n_);
    psi.col(k + 3).setConstant(((rho + sp - 1.0) - pi * (se + sp - 1.0)) / n_);
    return psi;
  }

  Eigen::VectorXd theta_hat() const {
    const auto k = static_cast<Eigen::Index>(table_.size());
    const auto a = estimate_assay(v_);
    Eigen::VectorXd th(k + 4);
    th(0) = a.sensitivity;
    th(1) = a.specificity;
    double rho = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      th(2 + j) = means_[static_cast<std::size_t>(j)];
      rho += means_[static_cast<std::size_t>(j)] * table_[static_cast<std::size_t>(j)].gamma;
    }
    th(k + 2) = rho;
    th(k + 3) = rogan_gladen(rho, a.sensitivity, a.specificity).point_raw;
    return th;
  }

 private:
  ValidationStudy v_;
  StratumTable table_;
  std::vector<double> means_;
  Eigen::VectorXd weights_;
  double n_;
};

/// theta = (sigma_e, sigma_p, beta_1..beta_p, rho, pi); the standardization
/// row runs over every stratum of `table`, sampled or not.
class SrgmStack {
 public:
  SrgmStack(const ValidationStudy& v, const MainStudy& m, const StratumTable& table,
            const RegressionSpec& spec)
      : v_(v), m_(m), table_(table), spec_(spec), data_(glm::group(m, spec)) {
    std::vector<double> w;
    detail::validation_rows(v, w);
    for (Eigen::Index j = 0; j < data_.groups(); ++j) {
      w.push_back(data_.successes(j));
      w.push_back(data_.trials(j) - data_.successes(j));
    }
    weights_ = detail::to_vector(w);
    n_ = weights_.sum();
    table_design_.resize(static_cast<Eigen::Index>(table.size()), data_.p());
    for (std::size_t j = 0; j < table.size(); ++j) {
      const auto h = spec.row(table[j].label);
      for (Eigen::Index l = 0; l < data_.p(); ++l)
        table_design_(static_cast<Eigen::Index>(j), l) = h[static_cast<std::size_t>(l)];
    }
  }

  Eigen::Index dimension() const { return data_.p() + 4; }
  const Eigen::VectorXd& weights() const { return weights_; }

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& th) const {
    const auto p = data_.p();
    const double se = th(0), sp = th(1), rho = th(p + 2), pi = th(p + 3);
    const Eigen::VectorXd beta = th.segment(2, p);
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(weights_.size(), p + 4);
    detail::fill_validation_psi(psi, se, sp);
    const Eigen::VectorXd eta = data_.design * beta;
    for (Eigen::Index j = 0; j < data_.groups(); ++j) {
      const auto lv = glm::inverse_link(spec_.link, eta(j));
      const double w = lv.dmu / (lv.mu * (1.0 - lv.mu));
      psi.block(4 + 2 * j, 2, 1, p) = (w * (1.0 - lv.mu)) * data_.design.row(j);
      psi.block(5 + 2 * j, 2, 1, p) = (-w * lv.mu) * data_.design.row(j);
    }
    const Eigen::VectorXd table_eta = table_design_ * beta;
    double standardized = 0.0;
    for (std::size_t j = 0; j < table_.size(); ++j)
      standardized +=
          glm::inverse_link(spec_.link, table_eta(static_cast<Eigen::Index>(j))).mu * table_[j].gamma;
    psi.col(p + 2).setConstant((standardized - rho) / n_);
    psi.col(p + 3).setConstant(((rho + sp - 1.0) - pi * (se + sp - 1.0)) / n_);
    return psi;
  }

  Eigen::VectorXd theta_hat(const SrgmResult& r) const {
    const auto p = data_.p();
    const auto a = estimate_assay(v_);
    Eigen::VectorXd th(p + 4);
    th(0) = a.sensitivity;
    th(1) = a.specificity;
    th.segment(2, p) = r.fit.beta;
    th(p + 2) = r.rho;
    th(p + 3) = r.estimate.point_raw;
    return th;
  }

 private:
  ValidationStudy v_;
  MainStudy m_;
  StratumTable table_;
  RegressionSpec spec_;
  glm::GroupedData data_;
  Eigen::MatrixXd table_design_;
  Eigen::VectorXd weights_;
  double n_;
};

}  // namespace seroprev
