#pragma once

// Closed-form versus numeric sandwich variances on synthetic data.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "seroprev/estimators.hpp"
#include "seroprev/io.hpp"
#include "seroprev/sandwich.hpp"
#include "seroprev/simulation.hpp"
#include "seroprev/variance.hpp"

namespace seroprev::oracle {

enum class Stack { rg, srg, srgm };

/// Regression design used by the srgm stack. `model` is the correctly
/// specified DGP 4 model; `singular` duplicates a column on purpose.
enum class Design { model, intercept, saturated, singular };

inline std::optional<Stack> parse_stack(std::string_view s) {
  if (s == "rg") return Stack::rg;
  if (s == "srg") return Stack::srg;
  if (s == "srgm") return Stack::srgm;
  return std::nullopt;
}

inline std::optional<Design> parse_design(std::string_view s) {
  if (s == "model") return Design::model;
  if (s == "intercept") return Design::intercept;
  if (s == "saturated") return Design::saturated;
  if (s == "singular") return Design::singular;
  return std::nullopt;
}

struct Case {
  sim::ScenarioParams params;
  ValidationStudy validation;
  MainStudy main;
  StratumTable table;
  RegressionSpec spec;
};

/// Indicator for every stratum but the first.
inline RegressionSpec saturated_spec(const StratumTable& t, Link link = Link::logit) {
  std::vector<std::string> labels;
  for (const auto& s : t.strata()) labels.push_back(s.label);
  const std::size_t p = labels.size();
  auto design = [labels](const std::string& label) {
    std::vector<double> h(labels.size(), 0.0);
    h[0] = 1.0;
    for (std::size_t j = 1; j < labels.size(); ++j) h[j] = label == labels[j] ? 1.0 : 0.0;
    return h;
  };
  return {link, std::move(design), p};
}

/// Synthetic data of total size about `n`, split like (40, 250, 2500), with
/// prevalence and assay accuracy drawn from `seed`.
inline Case make_case(Stack stack, std::uint64_t seed, Count n, Design design,
                      const std::filesystem::path& table_dir) {
  if (n < 100) fail(ErrorKind::input, "oracle needs n >= 100");
  std::mt19937_64 rng(sim::mix64(seed));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  sim::ScenarioParams s{0.05 + 0.25 * u01(rng), 0.85 + 0.14 * u01(rng), 0.85 + 0.14 * u01(rng)};
  s.n1 = std::max<Count>(1, std::llround(static_cast<double>(n) * 40.0 / 2790.0));
  s.n2 = std::max<Count>(1, std::llround(static_cast<double>(n) * 250.0 / 2790.0));
  s.n3 = n - s.n1 - s.n2;

  std::optional<sim::SamplingTable> table;
  sim::Dgp dgp = sim::Dgp::dgp1;
  if (stack == Stack::srg) dgp = sim::Dgp::dgp2;
  if (stack == Stack::srgm) {
    dgp = design == Design::saturated ? sim::Dgp::dgp3 : sim::Dgp::dgp4;
    table = io::load_sampling_table(table_dir / (dgp == sim::Dgp::dgp3 ? "dgp3_strata.csv"
                                                                     : "dgp4_strata.csv"));
  }
  const auto model = sim::make_model(dgp, table);
  const auto probs = sim::stratum_probabilities(model, s);
  auto data = sim::generate(model, s, probs, rng);

  RegressionSpec spec = model.spec;
  if (stack == Stack::srgm) {
    switch (design) {
      case Design::model: break;
      case Design::intercept: spec = RegressionSpec::intercept_only(); break;
      case Design::saturated: spec = saturated_spec(model.strata.table); break;
      case Design::singular: {
        auto base = model.spec;
        spec = {base.link,
                [base](const std::string& l) {
                  auto h = base.row(l);
                  h.push_back(h[1]);
                  return h;
                },
                base.p + 1};
        break;
      }
    }
  }
  return {s, data.validation, data.main, model.strata.table, std::move(spec)};
}

struct Comparison {
  double analytic = 0.0;             // closed-form asymptotic variance
  double numeric = 0.0;              // numeric sandwich, bottom-right element times n
  std::optional<double> reference;   // RG or SRG closed form when the design reduces to it
  double point_raw = 0.0;
  Eigen::Index dimension = 0;

  double relative_discrepancy() const { return std::abs(analytic - numeric) / std::abs(numeric); }
  std::optional<double> reference_discrepancy() const {
    if (!reference) return std::nullopt;
    return std::abs(analytic - *reference) / std::abs(*reference);
  }
};

/// Both sides use the untruncated prevalence, which is the root of the stack.
inline Comparison compare(Stack stack, const Case& c) {
  const auto a = estimate_assay(c.validation);
  const auto fractions = SampleFractions::of(c.validation, c.main);
  Comparison out;
  switch (stack) {
    case Stack::rg: {
      const auto e = rogan_gladen(c.main.mean(), a.sensitivity, a.specificity);
      out.analytic = var_rg(e.point_raw, a.sensitivity, a.specificity, c.main.mean(), fractions);
      RgStack st(c.validation, c.main);
      out.numeric = numeric_sandwich(st, st.theta_hat()).asymptotic_last();
      out.point_raw = e.point_raw;
      out.dimension = st.dimension();
      break;
    }
    case Stack::srg: {
      const auto r = srg(c.main, c.table, a.sensitivity, a.specificity);
      out.analytic = var_srg(r, a, fractions, PluginPi::raw);
      SrgStack st(c.validation, c.main, r.restriction.table);
      out.numeric = numeric_sandwich(st, st.theta_hat()).asymptotic_last();
      out.point_raw = r.estimate.point_raw;
      out.dimension = st.dimension();
      break;
    }
    case Stack::srgm: {
      const auto r = srgm(c.main, c.table, c.spec, a.sensitivity, a.specificity);
      out.analytic = var_srgm(r, c.main, c.table, c.spec, c.validation, PluginPi::raw);
      SrgmStack st(c.validation, c.main, c.table, c.spec);
      out.numeric = numeric_sandwich(st, st.theta_hat(r)).asymptotic_last();
      out.point_raw = r.estimate.point_raw;
      out.dimension = st.dimension();
      if (c.spec.p == 1) {
        out.reference = var_rg(r.estimate.point_raw, a.sensitivity, a.specificity, c.main.mean(),
                               fractions);
      } else if (c.spec.p == c.table.size()) {
        const auto nonparametric = srg(c.main, c.table, a.sensitivity, a.specificity);
        if (!nonparametric.estimate.flags.restricted)
          out.reference = var_srg(nonparametric, a, fractions, PluginPi::raw);
      }
      break;
    }
  }
  return out;
}

}  // namespace seroprev::oracle
