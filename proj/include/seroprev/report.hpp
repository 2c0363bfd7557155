#pragma once

// Report output: JSON (full precision), fixed-width tables (6 significant
// digits) and the long-format simulation CSV.

#include <json.hpp>

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "seroprev/analysis.hpp"
#include "seroprev/io.hpp"
#include "seroprev/model.hpp"
#include "seroprev/simulation.hpp"

namespace seroprev {

inline std::optional<Method> method_from_string(std::string_view s) {
  for (auto m : {Method::naive, Method::rg, Method::srg, Method::srgm})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline void to_json(nlohmann::json& j, const ConfidenceInterval& ci) {
  j = {{"low", ci.low}, {"high", ci.high}};
}

inline void from_json(const nlohmann::json& j, ConfidenceInterval& ci) {
  ci.low = j.at("low").get<double>();
  ci.high = j.at("high").get<double>();
}

inline void to_json(nlohmann::json& j, const EstimateFlags& f) {
  j = {{"truncated_point", f.truncated_point},
       {"truncated_ci", f.truncated_ci},
       {"heywood", f.heywood},
       {"restricted", f.restricted},
       {"assay_below_chance", f.assay_below_chance},
       {"nonpositivity_strata", f.nonpositivity_strata}};
}

inline void from_json(const nlohmann::json& j, EstimateFlags& f) {
  j.at("truncated_point").get_to(f.truncated_point);
  j.at("truncated_ci").get_to(f.truncated_ci);
  j.at("heywood").get_to(f.heywood);
  j.at("restricted").get_to(f.restricted);
  j.at("assay_below_chance").get_to(f.assay_below_chance);
  j.at("nonpositivity_strata").get_to(f.nonpositivity_strata);
}

inline void to_json(nlohmann::json& j, const PrevalenceEstimate& e) {
  j = {{"method", to_string(e.method)},
       {"point_raw", e.point_raw},
       {"point", e.point},
       {"variance", e.variance ? nlohmann::json(*e.variance) : nlohmann::json(nullptr)},
       {"ci", e.ci ? nlohmann::json(*e.ci) : nlohmann::json(nullptr)},
       {"flags", e.flags}};
}

inline void from_json(const nlohmann::json& j, PrevalenceEstimate& e) {
  const auto m = method_from_string(j.at("method").get<std::string>());
  if (!m) fail(ErrorKind::input, "unknown method in JSON report");
  e.method = *m;
  j.at("point_raw").get_to(e.point_raw);
  j.at("point").get_to(e.point);
  e.variance = j.at("variance").is_null() ? std::nullopt
                                          : std::optional<double>(j.at("variance").get<double>());
  e.ci = j.at("ci").is_null() ? std::nullopt
                              : std::optional<ConfidenceInterval>(j.at("ci").get<ConfidenceInterval>());
  j.at("flags").get_to(e.flags);
}

inline nlohmann::json to_json(const AnalysisReport& r) {
  nlohmann::json estimates = nlohmann::json::array({r.naive, r.rg});
  if (r.srg) estimates.push_back(*r.srg);
  if (r.srgm) estimates.push_back(*r.srgm);
  return {{"sensitivity", r.assay.sensitivity},
          {"specificity", r.assay.specificity},
          {"estimates", estimates},
          {"warnings", r.warnings}};
}

inline AnalysisReport report_from_json(const nlohmann::json& j) {
  AnalysisReport r;
  j.at("sensitivity").get_to(r.assay.sensitivity);
  j.at("specificity").get_to(r.assay.specificity);
  j.at("warnings").get_to(r.warnings);
  for (const auto& e : j.at("estimates")) {
    auto est = e.get<PrevalenceEstimate>();
    switch (est.method) {
      case Method::naive: r.naive = std::move(est); break;
      case Method::rg: r.rg = std::move(est); break;
      case Method::srg: r.srg = std::move(est); break;
      case Method::srgm: r.srgm = std::move(est); break;
    }
  }
  return r;
}

/// Six significant digits.
inline std::string sig6(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

inline void write_table(std::ostream& out, const AnalysisReport& r) {
  out << "sensitivity " << sig6(r.assay.sensitivity) << "   specificity "
      << sig6(r.assay.specificity) << "\n\n";
  out << std::left << std::setw(7) << "method" << std::right << std::setw(14) << "point"
      << std::setw(14) << "point_raw" << std::setw(14) << "variance" << std::setw(14) << "ci_low"
      << std::setw(14) << "ci_high" << "  flags\n";
  auto row = [&](const PrevalenceEstimate& e) {
    std::string flags;
    auto add = [&](bool on, const char* name) {
      if (on) flags += (flags.empty() ? "" : ",") + std::string(name);
    };
    add(e.flags.truncated_point, "truncated_point");
    add(e.flags.truncated_ci, "truncated_ci");
    add(e.flags.heywood, "heywood");
    add(e.flags.restricted, "restricted");
    add(e.flags.assay_below_chance, "assay_below_chance");
    if (!e.flags.nonpositivity_strata.empty())
      flags += (flags.empty() ? "" : ",") + std::string("nonpositivity=") +
               std::to_string(e.flags.nonpositivity_strata.size());
    out << std::left << std::setw(7) << to_string(e.method) << std::right << std::setw(14)
        << sig6(e.point) << std::setw(14) << sig6(e.point_raw) << std::setw(14)
        << (e.variance ? sig6(*e.variance) : "-") << std::setw(14)
        << (e.ci ? sig6(e.ci->low) : "-") << std::setw(14) << (e.ci ? sig6(e.ci->high) : "-")
        << "  " << (flags.empty() ? "-" : flags) << '\n';
  };
  row(r.naive);
  row(r.rg);
  if (r.srg) row(*r.srg);
  if (r.srgm) row(*r.srgm);
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
}

/// One row per estimate, full precision.
inline void write_estimates_csv(std::ostream& out, const AnalysisReport& r) {
  out << "method,point,point_raw,variance,ci_low,ci_high,truncated_point,truncated_ci,heywood,"
         "restricted\n";
  auto row = [&](const PrevalenceEstimate& e) {
    out << to_string(e.method) << ',' << io::format_double(e.point) << ','
        << io::format_double(e.point_raw) << ','
        << (e.variance ? io::format_double(*e.variance) : "") << ','
        << (e.ci ? io::format_double(e.ci->low) : "") << ','
        << (e.ci ? io::format_double(e.ci->high) : "") << ',' << e.flags.truncated_point << ','
        << e.flags.truncated_ci << ',' << e.flags.heywood << ',' << e.flags.restricted << '\n';
  };
  row(r.naive);
  row(r.rg);
  if (r.srg) row(*r.srg);
  if (r.srgm) row(*r.srgm);
}

// simulation ---------------------------------------------------------------

inline void write_results_csv(std::ostream& out, const std::vector<sim::ScenarioResult>& results) {
  out << "dgp,pi,sigma_e,sigma_p,estimator,mean_bias,coverage,heywood_count,"
         "nonpositivity_fraction,true_pi,replicates,successes,failures,truncation_count,"
         "mean_variance,empirical_variance,skipped\n";
  for (const auto& r : results) {
    const auto head = std::string(sim::to_string(r.dgp)) + ',' + io::format_double(r.pi) + ',' +
                      io::format_double(r.sigma_e) + ',' + io::format_double(r.sigma_p) + ',';
    for (const auto& e : r.estimators) {
      out << head << to_string(e.method) << ',';
      if (r.skipped) {
        out << ",,,,,,,,,,,\"" << *r.skipped << "\"\n";
        continue;
      }
      out << io::format_double(e.mean_bias) << ',' << io::format_double(e.coverage) << ','
          << e.heywood_count << ',' << io::format_double(r.nonpositivity_fraction) << ','
          << io::format_double(r.true_pi) << ',' << r.replicates << ',' << e.successes << ','
          << e.failures << ',' << e.truncation_count << ',' << io::format_double(e.mean_variance)
          << ',' << io::format_double(e.empirical_variance) << ",\n";
    }
  }
}

inline void write_results_table(std::ostream& out, const std::vector<sim::ScenarioResult>& results) {
  out << std::left << std::setw(9) << "dgp" << std::right << std::setw(8) << "pi" << std::setw(8)
      << "se" << std::setw(8) << "sp" << std::setw(6) << "est" << std::setw(13) << "mean_bias"
      << std::setw(10) << "coverage" << std::setw(9) << "heywood" << std::setw(11) << "nonpos"
      << std::setw(9) << "failed\n";
  for (const auto& r : results)
    for (const auto& e : r.estimators) {
      out << std::left << std::setw(9) << sim::to_string(r.dgp) << std::right << std::setw(8)
          << sig6(r.pi) << std::setw(8) << sig6(r.sigma_e) << std::setw(8) << sig6(r.sigma_p)
          << std::setw(6) << to_string(e.method);
      if (r.skipped) {
        out << "  skipped: " << *r.skipped << '\n';
        continue;
      }
      out << std::setw(13) << sig6(e.mean_bias) << std::setw(10) << sig6(e.coverage)
          << std::setw(9) << e.heywood_count << std::setw(11) << sig6(r.nonpositivity_fraction)
          << std::setw(8) << e.failures << '\n';
    }
}

inline nlohmann::json to_json(const std::vector<sim::ScenarioResult>& results) {
  auto arr = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json s = {{"scenario_id", r.scenario_id},
                        {"dgp", sim::to_string(r.dgp)},
                        {"pi", r.pi},
                        {"sigma_e", r.sigma_e},
                        {"sigma_p", r.sigma_p},
                        {"true_pi", r.true_pi},
                        {"replicates", r.replicates},
                        {"nonpositivity_fraction", r.nonpositivity_fraction}};
    if (r.skipped) s["skipped"] = *r.skipped;
    auto ests = nlohmann::json::array();
    for (const auto& e : r.estimators)
      ests.push_back({{"method", to_string(e.method)},
                      {"successes", e.successes},
                      {"failures", e.failures},
                      {"mean_bias", e.mean_bias},
                      {"coverage", e.coverage},
                      {"covered", e.covered},
                      {"coverage_denominator", e.coverage_denominator},
                      {"heywood_count", e.heywood_count},
                      {"truncation_count", e.truncation_count},
                      {"mean_variance", e.mean_variance},
                      {"empirical_variance", e.empirical_variance},
                      {"failure_reasons", e.failure_reasons}});
    s["estimators"] = std::move(ests);
    arr.push_back(std::move(s));
  }
  return arr;
}

}  // namespace seroprev
