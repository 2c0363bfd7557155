// seroprev: prevalence estimation under misclassification and selection bias.
//
//   seroprev estimate --validation v.csv --main m.csv [--strata s.csv] [--model model.cfg]
//   seroprev simulate <config>
//   seroprev oracle --stack rg|srg|srgm [--design ...] [--seed S] [--n N]
//
// Exit codes: 0 success, 2 input error, 3 numeric failure, 4 degenerate assay.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "seroprev.hpp"
#include "seroprev/oracle.hpp"

namespace fs = std::filesystem;
using namespace seroprev;

namespace {

enum class Format { table, json, csv };

struct Common {
  double level = 0.95;
  bool no_truncate_plugin = false;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir;
  Format format = Format::table;
};

int exit_code(const Error& e) {
  if (e.kind() == ErrorKind::degenerate_assay) return 4;
  if (e.is_numeric()) return 3;
  return 2;
}

// Writes `body` to <out>/<name> when --out is given, otherwise to stdout.
template <class F>
void emit(const Common& c, const std::string& name, F&& body) {
  if (c.out_dir.empty()) {
    body(std::cout);
    return;
  }
  fs::create_directories(c.out_dir);
  const auto path = fs::path(c.out_dir) / name;
  std::ofstream out(path);
  if (!out) fail(ErrorKind::input, "cannot write '" + path.string() + "'");
  body(out);
  std::cerr << "wrote " << path.string() << '\n';
}

template <class T, class Reader>
T read_file(const std::string& path, Reader reader) {
  auto in = io::open_input(path);
  return reader(in, path);
}

int cmd_estimate(const Common& c, const std::string& validation, const std::string& main_csv,
                 const std::string& strata, const std::string& model) {
  const auto v = read_file<ValidationStudy>(validation, io::read_validation);
  const auto m = read_file<MainStudy>(main_csv, io::read_main);
  std::optional<StratumTable> table;
  std::optional<RegressionSpec> spec;
  if (!strata.empty()) table = read_file<StratumTable>(strata, io::read_strata);
  if (!model.empty()) {
    if (!table) fail(ErrorKind::input, "--model needs --strata");
    auto in = io::open_input(model);
    spec = io::make_spec(io::read_model(in, *table, model));
  }
  AnalysisOptions opt{c.level, c.no_truncate_plugin ? PluginPi::raw : PluginPi::truncated, {}};
  const auto report = analyze(v, m, table ? &*table : nullptr, spec ? &*spec : nullptr, opt);
  if (c.format != Format::table || !c.out_dir.empty())
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  switch (c.format) {
    case Format::table: emit(c, "estimates.txt", [&](std::ostream& o) { write_table(o, report); }); break;
    case Format::json:
      emit(c, "estimates.json", [&](std::ostream& o) { o << to_json(report).dump(2) << '\n'; });
      break;
    case Format::csv:
      emit(c, "estimates.csv", [&](std::ostream& o) { write_estimates_csv(o, report); });
      break;
  }
  return 0;
}

int cmd_simulate(const Common& c, const std::string& config) {
  const fs::path path(config);
  auto in = io::open_input(path);
  auto cfg = io::read_simulation_config(in, config, path.parent_path(), SEROPREV_DATA_DIR);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.threads > 0) cfg.threads = c.threads;
  cfg.level = c.level;
  if (c.no_truncate_plugin) cfg.plugin = PluginPi::raw;

  const auto start = std::chrono::steady_clock::now();
  const auto results = sim::run(cfg);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  int skipped = 0;
  for (const auto& r : results) skipped += r.skipped ? 1 : 0;
  switch (c.format) {
    case Format::table:
      emit(c, "results.txt", [&](std::ostream& o) { write_results_table(o, results); });
      break;
    case Format::json:
      emit(c, "results.json", [&](std::ostream& o) { o << to_json(results).dump(2) << '\n'; });
      break;
    case Format::csv:
      emit(c, "results.csv", [&](std::ostream& o) { write_results_csv(o, results); });
      break;
  }
  if (!c.out_dir.empty() && c.format != Format::csv)
    emit(c, "results.csv", [&](std::ostream& o) { write_results_csv(o, results); });
  std::cerr << results.size() << " scenarios, " << cfg.replicates << " replicates each, "
            << sig6(elapsed.count()) << " s\n";
  if (skipped > 0) {
    for (const auto& r : results)
      if (r.skipped)
        std::cerr << "skipped " << sim::to_string(r.dgp) << " pi=" << r.pi << ": " << *r.skipped << '\n';
    return 2;
  }
  return 0;
}

int cmd_oracle(const Common& c, const std::string& stack_name, const std::string& design_name,
               Count n) {
  const auto stack = oracle::parse_stack(stack_name);
  if (!stack) fail(ErrorKind::input, "--stack must be rg, srg or srgm");
  const auto design = oracle::parse_design(design_name);
  if (!design) fail(ErrorKind::input, "--design must be model, intercept, saturated or singular");
  const auto seed = c.seed.value_or(1);
  const auto cs = oracle::make_case(*stack, seed, n, *design, SEROPREV_DATA_DIR);
  const auto cmp = oracle::compare(*stack, cs);

  nlohmann::json j = {{"stack", stack_name},
                      {"design", design_name},
                      {"seed", seed},
                      {"n", cs.validation.n_sens() + cs.validation.n_spec() + cs.main.n()},
                      {"pi", cs.params.pi},
                      {"sigma_e", cs.params.sensitivity},
                      {"sigma_p", cs.params.specificity},
                      {"point_raw", cmp.point_raw},
                      {"dimension", cmp.dimension},
                      {"analytic", cmp.analytic},
                      {"numeric", cmp.numeric},
                      {"relative_discrepancy", cmp.relative_discrepancy()}};
  if (cmp.reference) {
    j["closed_form_reference"] = *cmp.reference;
    j["reference_discrepancy"] = *cmp.reference_discrepancy();
  }
  if (c.format == Format::json) {
    emit(c, "oracle.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  } else {
    emit(c, "oracle.txt", [&](std::ostream& o) {
      o << "stack " << stack_name << " (" << design_name << "), seed " << seed << ", dim "
        << cmp.dimension << '\n'
        << "  analytic V   " << sig6(cmp.analytic) << '\n'
        << "  numeric V    " << sig6(cmp.numeric) << '\n'
        << "  rel. diff    " << sig6(cmp.relative_discrepancy()) << '\n';
      if (cmp.reference)
        o << "  closed form  " << sig6(*cmp.reference) << "  (rel. diff "
          << sig6(*cmp.reference_discrepancy()) << ")\n";
    });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prevalence estimation corrected for assay error and selection bias"};
  app.require_subcommand(1);

  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--level", c.level, "Confidence level")->check(CLI::Range(0.5, 0.999999));
    sub->add_flag("--no-truncate-plugin", c.no_truncate_plugin,
                  "Plug the untruncated prevalence into the variance formulas");
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--threads", c.threads, "Worker threads (simulate)");
    sub->add_option("--out", c.out_dir, "Write output files into this directory");
    sub->add_option("--format", c.format, "Output format")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, Format>{{"table", Format::table}, {"json", Format::json},
                                          {"csv", Format::csv}}));
  };

  std::string validation, main_csv, strata, model;
  auto* est = app.add_subcommand("estimate", "Estimate prevalence from CSV inputs");
  est->add_option("--validation", validation, "validation.csv")->required();
  est->add_option("--main", main_csv, "main.csv")->required();
  est->add_option("--strata", strata, "strata.csv");
  est->add_option("--model", model, "model.cfg");
  add_common(est);

  std::string config;
  auto* simc = app.add_subcommand("simulate", "Run a simulation config");
  simc->add_option("config", config, "Simulation config file")->required();
  add_common(simc);

  std::string stack = "rg", design = "model";
  Count n = 100000;
  auto* orc = app.add_subcommand("oracle", "Compare closed-form and numeric sandwich variances");
  orc->add_option("--stack", stack, "rg, srg or srgm");
  orc->add_option("--design", design, "srgm design: model, intercept, saturated, singular");
  orc->add_option("--n", n, "Total sample size");
  add_common(orc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*est) return cmd_estimate(c, validation, main_csv, strata, model);
    if (*simc) return cmd_simulate(c, config);
    if (*orc) return cmd_oracle(c, stack, design, n);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
