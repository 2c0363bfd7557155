#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "seroprev/io.hpp"
#include "seroprev/report.hpp"

using namespace seroprev;

namespace {

const std::filesystem::path kData = SEROPREV_DATA_DIR;

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

StratumTable three_component_table() {
  std::istringstream in(
      "stratum,gamma\nF|young|A,0.2\nF|old|A,0.2\nM|young|A,0.2\nM|old|B,0.2\nF|young|B,0.2\n");
  return io::read_strata(in);
}

}  // namespace

TEST(Csv, CrlfAndBom) {
  std::istringstream in("\xEF\xBB\xBFrole,n,correct\r\nsensitivity,40,40\r\n\r\nspecificity,277,274\r\n");
  const auto v = io::read_validation(in);
  EXPECT_EQ(v.n_sens(), 40);
  EXPECT_EQ(v.x_spec_neg(), 274);
}

TEST(Csv, ErrorsCarryLineNumbers) {
  std::istringstream in("role,n,correct\nsensitivity,40,40\nspecificity,277\n");
  EXPECT_NE(error_of([&] { io::read_validation(in, "v.csv"); }).find("v.csv:3:"), std::string::npos);
  std::istringstream bad("role,n,correct\nsensitivity,40,4x\nspecificity,10,9\n");
  const auto msg = error_of([&] { io::read_validation(bad, "v.csv"); });
  EXPECT_NE(msg.find("v.csv:2:"), std::string::npos);
  EXPECT_NE(msg.find("4x"), std::string::npos);
}

TEST(Validation, Errors) {
  std::istringstream role("role,n,correct\nsensitivity,40,40\nspecifity,10,9\n");
  EXPECT_NE(error_of([&] { io::read_validation(role); }).find("unknown role 'specifity'"),
            std::string::npos);
  std::istringstream missing("role,n,correct\nsensitivity,40,40\n");
  EXPECT_NE(error_of([&] { io::read_validation(missing); }).find("specificity"), std::string::npos);
  std::istringstream range("role,n,correct\nsensitivity,40,41\nspecificity,10,9\n");
  EXPECT_THROW(io::read_validation(range), Error);
  std::istringstream dup("role,n,correct\nsensitivity,40,40\nsensitivity,40,40\nspecificity,10,9\n");
  EXPECT_THROW(io::read_validation(dup), Error);
  std::istringstream column("role,n,right\nsensitivity,40,40\n");
  EXPECT_NE(error_of([&] { io::read_validation(column); }).find("correct"), std::string::npos);
}

TEST(Validation, RoundTrip) {
  const auto v = ValidationStudy::from_counts(181, 154, 326, 322);
  std::stringstream s;
  io::write_validation(s, v);
  const auto back = io::read_validation(s);
  EXPECT_EQ(back.n_sens(), 181);
  EXPECT_EQ(back.x_sens_pos(), 154);
  EXPECT_EQ(back.n_spec(), 326);
  EXPECT_EQ(back.x_spec_neg(), 322);
}

TEST(Main, MissingStratumColumnAndEmptyLabels) {
  std::istringstream pooled("x\n1\n0\n0\n");
  const auto m = io::read_main(pooled);
  EXPECT_EQ(m.n(), 3);
  EXPECT_EQ(m.positives(), 1);
  EXPECT_TRUE(m.tallies().empty());

  std::istringstream mixed("x,stratum\n1,a\n0,\n0,a\n");
  const auto mm = io::read_main(mixed);
  EXPECT_EQ(mm.unlabeled().trials, 1);
  ASSERT_NE(mm.find("a"), nullptr);
  EXPECT_EQ(mm.find("a")->trials, 2);
}

TEST(Main, Errors) {
  std::istringstream bad("x,stratum\n1,a\n2,a\n");
  EXPECT_NE(error_of([&] { io::read_main(bad, "m.csv"); }).find("m.csv:3:"), std::string::npos);
  std::istringstream empty("x,stratum\n");
  EXPECT_THROW(io::read_main(empty), Error);
  std::istringstream none("");
  EXPECT_THROW(io::read_main(none), Error);
}

TEST(Main, RoundTrip) {
  auto in = io::open_input(kData / "examples/belgium/main.csv");
  const auto m = io::read_main(in);
  std::stringstream s;
  io::write_main(s, m);
  EXPECT_EQ(io::read_main(s), m);
}

TEST(Strata, RoundTripIsExact) {
  auto in = io::open_input(kData / "examples/belgium/strata.csv");
  const auto t = io::read_strata(in);
  EXPECT_EQ(t.size(), 220u);
  std::stringstream s;
  io::write_strata(s, t);
  const auto back = io::read_strata(s);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    EXPECT_EQ(back.strata()[j].label, t.strata()[j].label);
    EXPECT_EQ(back.strata()[j].gamma, t.strata()[j].gamma);
  }
}

TEST(Strata, Errors) {
  std::istringstream sum("stratum,gamma\na,0.5\nb,0.4\n");
  EXPECT_NE(error_of([&] { io::read_strata(sum, "s.csv"); }).find("s.csv"), std::string::npos);
  std::istringstream dup("stratum,gamma\na,0.5\na,0.5\n");
  EXPECT_THROW(io::read_strata(dup), Error);
  std::istringstream empty_label("stratum,gamma\n,0.5\nb,0.5\n");
  EXPECT_THROW(io::read_strata(empty_label), Error);
}

TEST(SamplingTable, Loads) {
  const auto t = io::load_sampling_table(kData / "dgp3_strata.csv");
  EXPECT_EQ(t.table.size(), 40u);
  std::istringstream bad("stratum,gamma,sampling\na,0.5,0.5\nb,0.5,-1\n");
  EXPECT_THROW(io::read_sampling_table(bad, "t.csv"), Error);
  EXPECT_THROW(io::load_sampling_table(kData / "does_not_exist.csv"), Error);
}

TEST(ModelConfig, FactorExpansion) {
  const auto t = three_component_table();
  std::istringstream in("link = logit\nfactor = 0\nfactor = 1\nfactor = 2\n");
  const auto cfg = io::read_model(in, t);
  ASSERT_EQ(cfg.terms.size(), 3u);
  EXPECT_EQ(cfg.names[0], "0:M");
  EXPECT_EQ(cfg.names[1], "1:old");
  EXPECT_EQ(cfg.names[2], "2:B");
  const auto spec = io::make_spec(cfg);
  EXPECT_EQ(spec.p, 4u);
  EXPECT_EQ(spec.row("M|old|B"), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(spec.row("F|young|A"), (std::vector<double>{1, 0, 0, 0}));
}

TEST(ModelConfig, InteractionAndIndicator) {
  const auto t = three_component_table();
  std::istringstream in("# comment\nlink = probit\ninteraction = 0*1\nindicator = 0:M*2:B\n");
  const auto cfg = io::read_model(in, t);
  EXPECT_EQ(cfg.link, Link::probit);
  ASSERT_EQ(cfg.terms.size(), 2u);
  EXPECT_EQ(cfg.names[0], "0:M*1:old");
  const auto spec = io::make_spec(cfg);
  EXPECT_EQ(spec.row("M|old|B"), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(spec.row("M|young|A"), (std::vector<double>{1, 0, 0}));
}

TEST(ModelConfig, BelgiumExampleDimension) {
  auto st = io::open_input(kData / "examples/belgium/strata.csv");
  const auto t = io::read_strata(st);
  auto in = io::open_input(kData / "examples/belgium/model.cfg");
  const auto cfg = io::read_model(in, t);
  // 1 + sex 1 + age (10 - 1) + province (11 - 1)
  EXPECT_EQ(io::make_spec(cfg).p, 21u);
}

TEST(ModelConfig, Errors) {
  const auto t = three_component_table();
  auto msg = [&](const char* text) {
    std::istringstream in(text);
    return error_of([&] { io::read_model(in, t, "model.cfg"); });
  };
  EXPECT_NE(msg("link = cloglog\n").find("link"), std::string::npos);
  EXPECT_NE(msg("factor = 3\n").find("component 3"), std::string::npos);
  EXPECT_NE(msg("interaction = 0*0\n").find("different"), std::string::npos);
  EXPECT_NE(msg("indicator = 0:X\n").find("'X'"), std::string::npos);
  EXPECT_NE(msg("colour = red\n").find("unknown key 'colour'"), std::string::npos);
  EXPECT_NE(msg("factor 0\n").find("model.cfg:1:"), std::string::npos);
}

TEST(SimulationConfigFile, ParsesExample) {
  auto in = io::open_input(kData / "examples/dgp1_small.cfg");
  const auto c = io::read_simulation_config(in, "dgp1_small.cfg");
  EXPECT_EQ(c.dgp, sim::Dgp::dgp1);
  EXPECT_EQ(c.pi_grid, (std::vector<double>{0.05, 0.10, 0.20}));
  EXPECT_EQ(c.sigma_p_grid, (std::vector<double>{0.95, 0.99}));
  EXPECT_EQ(c.replicates, 200);
  EXPECT_EQ(c.master_seed, 20210101u);
  EXPECT_EQ(c.estimators, (std::vector<Method>{Method::rg}));
}

TEST(SimulationConfigFile, DefaultAndRelativeTables) {
  std::istringstream d("dgp = DGP4\npi = [0.1]\nsigma_e = 0.99\nsigma_p = 0.95\n");
  const auto c = io::read_simulation_config(d, "c.cfg", {}, kData);
  ASSERT_TRUE(c.table.has_value());
  EXPECT_EQ(c.table->table.size(), 80u);

  std::istringstream r("dgp = DGP3\npi = 0.1\nsigma_e = 0.99\nsigma_p = 0.95\ntable = dgp3_strata.csv\n");
  EXPECT_EQ(io::read_simulation_config(r, "c.cfg", kData).table->table.size(), 40u);
}

TEST(SimulationConfigFile, ErrorsNameTheField) {
  auto msg = [](const std::string& text) {
    std::istringstream in(text);
    return error_of([&] { io::read_simulation_config(in, "c.cfg", {}, kData); });
  };
  const std::string base = "pi = 0.1\nsigma_e = 0.99\nsigma_p = 0.95\n";
  EXPECT_NE(msg("dgp = DGP9\n" + base).find("dgp"), std::string::npos);
  EXPECT_NE(msg("dgp = DGP1\n" + base + "foo = 1\n").find("unknown key 'foo'"), std::string::npos);
  EXPECT_NE(msg("dgp = DGP1\n" + base + "plugin = both\n").find("plugin"), std::string::npos);
  EXPECT_NE(msg("dgp = DGP1\n" + base + "estimators = RG, XYZ\n").find("XYZ"), std::string::npos);
  EXPECT_NE(msg("dgp = DGP1\npi = 0.1, x\n").find("pi"), std::string::npos);
  EXPECT_NE(msg(base).find("dgp"), std::string::npos);
  EXPECT_NE(msg("dgp = DGP3\n" + base + "table = nowhere.csv\n").find("nowhere.csv"),
            std::string::npos);
}

TEST(Json, EstimateRoundTrip) {
  PrevalenceEstimate e;
  e.method = Method::srg;
  e.point_raw = -0.0123456789012345;
  e.point = 0.0;
  e.variance = 1.234567890123e-5;
  e.ci = ConfidenceInterval{0.0, 0.0345678901234567};
  e.flags.truncated_point = true;
  e.flags.restricted = true;
  e.flags.nonpositivity_strata = {"a", "b"};
  nlohmann::json j = e;
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<PrevalenceEstimate>(), e);

  auto h = PrevalenceEstimate::point_only(Method::rg, 0.2);
  h.flags.heywood = true;
  nlohmann::json jh = h;
  EXPECT_TRUE(jh["ci"].is_null());
  EXPECT_EQ(jh.get<PrevalenceEstimate>(), h);
}

TEST(Json, ReportRoundTrip) {
  auto v = io::open_input(kData / "examples/screennc/validation.csv");
  auto m = io::open_input(kData / "examples/screennc/main.csv");
  const auto report = analyze(io::read_validation(v), io::read_main(m), nullptr, nullptr);
  const auto back = report_from_json(nlohmann::json::parse(to_json(report).dump()));
  EXPECT_EQ(back.naive, report.naive);
  EXPECT_EQ(back.rg, report.rg);
  EXPECT_EQ(back.assay.specificity, report.assay.specificity);
  EXPECT_EQ(back.warnings, report.warnings);
}

TEST(ResultsCsv, Shape) {
  sim::SimulationConfig c;
  c.dgp = sim::Dgp::dgp1;
  c.pi_grid = {0.05, 0.1};
  c.sigma_e_grid = {0.99};
  c.sigma_p_grid = {0.95};
  c.replicates = 20;
  c.estimators = {Method::rg};
  std::stringstream s;
  write_results_csv(s, sim::run(c));
  const auto t = io::parse_csv(s, "results.csv");
  ASSERT_EQ(t.rows.size(), 2u);
  for (const char* col : {"dgp", "pi", "sigma_e", "sigma_p", "estimator", "mean_bias", "coverage",
                          "heywood_count", "nonpositivity_fraction"})
    EXPECT_TRUE(t.column(col).has_value()) << col;
  EXPECT_EQ(t.rows[1][*t.column("pi")], "0.1");
  EXPECT_EQ(t.rows[0][*t.column("estimator")], "RG");
  const double cov = io::parse_number<double>(t.rows[0][*t.column("coverage")], "");
  EXPECT_GE(cov, 0.0);
  EXPECT_LE(cov, 1.0);
}

TEST(Format, ShortestRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, 1e-17, 0.009956340284})
    EXPECT_EQ(io::parse_number<double>(io::format_double(x), ""), x);
  EXPECT_EQ(sig6(0.0099563402), "0.00995634");
}
