#pragma once

// Domain types shared by the estimators, the variance code and the simulator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seroprev/error.hpp"

namespace seroprev {

using Count = std::int64_t;

/// Gold-standard validation tallies. Sensitivity is estimated from `n_sens`
/// known positives, specificity from `n_spec` known negatives.
class ValidationStudy {
 public:
  static ValidationStudy from_counts(Count n_sens, Count x_sens_pos,
                                     Count n_spec, Count x_spec_neg) {
    if (n_sens < 1) fail(ErrorKind::input, "n_sens must be >= 1");
    if (n_spec < 1) fail(ErrorKind::input, "n_spec must be >= 1");
    if (x_sens_pos < 0 || x_sens_pos > n_sens)
      fail(ErrorKind::input, "x_sens_pos must lie in [0, n_sens]");
    if (x_spec_neg < 0 || x_spec_neg > n_spec)
      fail(ErrorKind::input, "x_spec_neg must lie in [0, n_spec]");
    return ValidationStudy(n_sens, x_sens_pos, n_spec, x_spec_neg);
  }

  Count n_sens() const noexcept { return n_sens_; }
  Count x_sens_pos() const noexcept { return x_sens_pos_; }
  Count n_spec() const noexcept { return n_spec_; }
  Count x_spec_neg() const noexcept { return x_spec_neg_; }

  friend bool operator==(const ValidationStudy&, const ValidationStudy&) = default;

 private:
  ValidationStudy(Count a, Count b, Count c, Count d)
      : n_sens_(a), x_sens_pos_(b), n_spec_(c), x_spec_neg_(d) {}

  Count n_sens_;
  Count x_sens_pos_;
  Count n_spec_;
  Count x_spec_neg_;
};

struct Stratum {
  std::string label;
  double gamma;

  friend bool operator==(const Stratum&, const Stratum&) = default;
};

/// Target-population stratum proportions. Labels are opaque strings; by
/// convention covariate levels are joined with '|'.
class StratumTable {
 public:
  static constexpr double kSumTolerance = 1e-10;

  static StratumTable create(std::vector<Stratum> strata) {
    if (strata.empty()) fail(ErrorKind::input, "stratum table is empty");
    double total = 0.0;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < strata.size(); ++j) {
      const auto& s = strata[j];
      if (!(s.gamma > 0.0) || !std::isfinite(s.gamma))
        fail(ErrorKind::input, "stratum '" + s.label + "' has non-positive proportion");
      if (!index.emplace(s.label, j).second)
        fail(ErrorKind::input, "duplicate stratum label '" + s.label + "'");
      total += s.gamma;
    }
    if (std::abs(total - 1.0) > kSumTolerance)
      fail(ErrorKind::input, "stratum proportions sum to " + std::to_string(total) +
                                 ", expected 1");
    return StratumTable(std::move(strata), std::move(index));
  }

  std::size_t size() const noexcept { return strata_.size(); }
  const std::vector<Stratum>& strata() const noexcept { return strata_; }
  const Stratum& operator[](std::size_t j) const { return strata_[j]; }

  std::optional<std::size_t> find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const StratumTable& a, const StratumTable& b) {
    return a.strata_ == b.strata_;
  }

 private:
  StratumTable(std::vector<Stratum> strata,
               std::unordered_map<std::string, std::size_t> index)
      : strata_(std::move(strata)), index_(std::move(index)) {}

  std::vector<Stratum> strata_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct MainRecord {
  bool positive;
  std::optional<std::string> stratum;

  friend bool operator==(const MainRecord&, const MainRecord&) = default;
};

struct StratumTally {
  std::string label;
  Count trials = 0;
  Count positives = 0;

  double mean() const { return static_cast<double>(positives) / static_cast<double>(trials); }

  friend bool operator==(const StratumTally&, const StratumTally&) = default;
};

/// Main-study test results. Every estimator depends on the records only
/// through per-stratum tallies, so that is what is stored; tallies keep the
/// order in which labels were first seen.
class MainStudy {
 public:
  static MainStudy from_records(std::span<const MainRecord> records) {
    MainStudy m;
    for (const auto& r : records) {
      if (r.stratum && !r.stratum->empty())
        m.add_tally(*r.stratum, 1, r.positive ? 1 : 0);
      else {
        m.unlabeled_.trials += 1;
        m.unlabeled_.positives += r.positive ? 1 : 0;
      }
    }
    m.validate();
    return m;
  }

  /// Duplicate labels are merged. `unlabeled` holds records with no stratum.
  static MainStudy from_tallies(std::span<const StratumTally> tallies,
                                StratumTally unlabeled = {}) {
    MainStudy m;
    for (const auto& t : tallies) {
      if (t.trials < 0 || t.positives < 0 || t.positives > t.trials)
        fail(ErrorKind::input, "invalid tally for stratum '" + t.label + "'");
      if (t.label.empty())
        fail(ErrorKind::input, "stratum tallies require a non-empty label");
      if (t.trials > 0) m.add_tally(t.label, t.trials, t.positives);
    }
    if (unlabeled.trials < 0 || unlabeled.positives < 0 || unlabeled.positives > unlabeled.trials)
      fail(ErrorKind::input, "invalid unlabeled tally");
    m.unlabeled_ = {"", unlabeled.trials, unlabeled.positives};
    m.validate();
    return m;
  }

  static MainStudy pooled(Count trials, Count positives) {
    return from_tallies({}, StratumTally{"", trials, positives});
  }

  Count n() const noexcept { return n_ + unlabeled_.trials; }
  Count positives() const noexcept { return positives_ + unlabeled_.positives; }
  double mean() const { return static_cast<double>(positives()) / static_cast<double>(n()); }

  const std::vector<StratumTally>& tallies() const noexcept { return tallies_; }
  const StratumTally& unlabeled() const noexcept { return unlabeled_; }
  bool has_missing_strata() const noexcept { return unlabeled_.trials > 0; }

  const StratumTally* find(std::string_view label) const {
    auto it = index_.find(std::string(label));
    return it == index_.end() ? nullptr : &tallies_[it->second];
  }

  std::vector<MainRecord> to_records() const {
    std::vector<MainRecord> out;
    out.reserve(static_cast<std::size_t>(n()));
    auto expand = [&](const StratumTally& t, std::optional<std::string> label) {
      for (Count i = 0; i < t.trials; ++i) out.push_back({i < t.positives, label});
    };
    for (const auto& t : tallies_) expand(t, t.label);
    expand(unlabeled_, std::nullopt);
    return out;
  }

  friend bool operator==(const MainStudy& a, const MainStudy& b) {
    return a.tallies_ == b.tallies_ && a.unlabeled_ == b.unlabeled_;
  }

 private:
  void add_tally(const std::string& label, Count trials, Count positives) {
    auto [it, inserted] = index_.emplace(label, tallies_.size());
    if (inserted) tallies_.push_back({label, 0, 0});
    auto& t = tallies_[it->second];
    t.trials += trials;
    t.positives += positives;
    n_ += trials;
    positives_ += positives;
  }

  void validate() const {
    if (n() < 1) fail(ErrorKind::input, "main study has no records");
  }

  std::vector<StratumTally> tallies_;
  std::unordered_map<std::string, std::size_t> index_;
  StratumTally unlabeled_;
  Count n_ = 0;
  Count positives_ = 0;
};

/// Sample fractions n_j / n of the sensitivity, specificity and main studies.
struct SampleFractions {
  double c1;
  double c2;
  double c3;

  static SampleFractions from_counts(Count n1, Count n2, Count n3) {
    if (n1 < 1 || n2 < 1 || n3 < 1)
      fail(ErrorKind::input, "sample fractions need every study size >= 1");
    const double n = static_cast<double>(n1 + n2 + n3);
    return {static_cast<double>(n1) / n, static_cast<double>(n2) / n,
            static_cast<double>(n3) / n};
  }

  static SampleFractions of(const ValidationStudy& v, const MainStudy& m) {
    return from_counts(v.n_sens(), v.n_spec(), m.n());
  }
};

enum class Method { naive, rg, srg, srgm };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::naive: return "naive";
    case Method::rg: return "RG";
    case Method::srg: return "SRG";
    case Method::srgm: return "SRGM";
  }
  return "?";
}

struct ConfidenceInterval {
  double low;
  double high;

  friend bool operator==(const ConfidenceInterval&, const ConfidenceInterval&) = default;
};

struct EstimateFlags {
  bool truncated_point = false;
  bool truncated_ci = false;
  bool heywood = false;
  bool restricted = false;
  bool assay_below_chance = false;  // sensitivity + specificity < 1
  std::vector<std::string> nonpositivity_strata;

  friend bool operator==(const EstimateFlags&, const EstimateFlags&) = default;
};

/// A prevalence estimate. `variance` is the estimated variance of the point
/// estimate itself (asymptotic variance already divided by n).
struct PrevalenceEstimate {
  Method method = Method::naive;
  double point_raw = 0.0;
  double point = 0.0;
  std::optional<double> variance;
  std::optional<ConfidenceInterval> ci;
  EstimateFlags flags;

  static PrevalenceEstimate point_only(Method method, double point_raw) {
    PrevalenceEstimate e;
    e.method = method;
    e.point_raw = point_raw;
    e.point = std::isnan(point_raw) ? point_raw : std::clamp(point_raw, 0.0, 1.0);
    e.flags.truncated_point = e.point != point_raw && !std::isnan(point_raw);
    return e;
  }

  friend bool operator==(const PrevalenceEstimate&, const PrevalenceEstimate&) = default;
};

enum class Link { logit, probit };

inline const char* to_string(Link l) { return l == Link::logit ? "logit" : "probit"; }

/// Binary regression g(rho_j) = beta . h(z_j). `design` maps a stratum label
/// to h(z_j); its first element must be 1 (intercept).
struct RegressionSpec {
  Link link = Link::logit;
  std::function<std::vector<double>(const std::string&)> design;
  std::size_t p = 1;

  static RegressionSpec intercept_only(Link link = Link::logit) {
    return {link, [](const std::string&) { return std::vector<double>{1.0}; }, 1};
  }

  std::vector<double> row(const std::string& label) const {
    auto h = design(label);
    if (h.size() != p)
      fail(ErrorKind::design, "design function returned " + std::to_string(h.size()) +
                                  " terms for '" + label + "', expected " + std::to_string(p));
    if (h.front() != 1.0)
      fail(ErrorKind::design, "first design term must be the intercept (1) for '" + label + "'");
    return h;
  }
};

}  // namespace seroprev
