#pragma once

// Readers and writers for the CSV and key = value file formats.
//
//   validation.csv  role,n,correct        roles: sensitivity, specificity
//   main.csv        x,stratum             stratum optional / may be empty
//   strata.csv      stratum,gamma[,sampling]
//   model.cfg       link = logit|probit
//                   factor = <component>          main effect, first level is reference
//                   interaction = <i>*<j>         products of non-reference indicators
//                   indicator = <i>:<level>[*<j>:<level>...]
//   simulation cfg  dgp, pi, sigma_e, sigma_p, n1, n2, n3, replicates, seed,
//                   estimators, table, threads, level, plugin
//
// Stratum label components are the '|'-separated pieces of a label; that
// split happens only here, when a design function is built from model.cfg.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seroprev/error.hpp"
#include "seroprev/model.hpp"
#include "seroprev/simulation.hpp"

namespace seroprev::io {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

template <class T>
T parse_number(std::string_view text, const std::string& context) {
  T value{};
  const auto s = trim(text);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorKind::input, context + "cannot parse '" + s + "' as a number");
  return value;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

/// Comma-separated, UTF-8 (BOM tolerated), LF or CRLF, blank lines skipped.
inline CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size())
      fail(ErrorKind::input, where(source, n) + "expected " + std::to_string(t.header.size()) +
                                 " fields, found " + std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(n);
  }
  if (t.header.empty()) fail(ErrorKind::input, source + ": empty file");
  return t;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::input, "cannot open '" + path.string() + "'");
  return in;
}

inline std::size_t require_column(const CsvTable& t, std::string_view name,
                                  const std::string& source) {
  auto c = t.column(name);
  if (!c) fail(ErrorKind::input, source + ": missing column '" + std::string(name) + "'");
  return *c;
}

// validation.csv ------------------------------------------------------------

inline ValidationStudy read_validation(std::istream& in, const std::string& source = "validation.csv") {
  const auto t = parse_csv(in, source);
  const auto c_role = require_column(t, "role", source);
  const auto c_n = require_column(t, "n", source);
  const auto c_ok = require_column(t, "correct", source);
  std::optional<std::pair<Count, Count>> sens, spec;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto ctx = where(source, t.lines[r]);
    const auto& role = t.rows[r][c_role];
    const auto n = parse_number<Count>(t.rows[r][c_n], ctx);
    const auto ok = parse_number<Count>(t.rows[r][c_ok], ctx);
    auto& slot = role == "sensitivity" ? sens : role == "specificity" ? spec : sens;
    if (role != "sensitivity" && role != "specificity")
      fail(ErrorKind::input, ctx + "unknown role '" + role + "' (expected sensitivity or specificity)");
    if (slot) fail(ErrorKind::input, ctx + "duplicate role '" + role + "'");
    if (n < 1 || ok < 0 || ok > n)
      fail(ErrorKind::input, ctx + "need 0 <= correct <= n and n >= 1 for role '" + role + "'");
    slot = {n, ok};
  }
  if (!sens) fail(ErrorKind::input, source + ": missing 'sensitivity' row");
  if (!spec) fail(ErrorKind::input, source + ": missing 'specificity' row");
  return ValidationStudy::from_counts(sens->first, sens->second, spec->first, spec->second);
}

inline void write_validation(std::ostream& out, const ValidationStudy& v) {
  out << "role,n,correct\n"
      << "sensitivity," << v.n_sens() << ',' << v.x_sens_pos() << '\n'
      << "specificity," << v.n_spec() << ',' << v.x_spec_neg() << '\n';
}

// main.csv ------------------------------------------------------------------

inline MainStudy read_main(std::istream& in, const std::string& source = "main.csv") {
  const auto t = parse_csv(in, source);
  const auto c_x = require_column(t, "x", source);
  const auto c_z = t.column("stratum");
  std::vector<MainRecord> records;
  records.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& x = t.rows[r][c_x];
    if (x != "0" && x != "1")
      fail(ErrorKind::input, where(source, t.lines[r]) + "x must be 0 or 1, found '" + x + "'");
    MainRecord rec{x == "1", std::nullopt};
    if (c_z && !t.rows[r][*c_z].empty()) rec.stratum = t.rows[r][*c_z];
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorKind::input, source + ": no records");
  return MainStudy::from_records(records);
}

inline void write_main(std::ostream& out, const MainStudy& m) {
  out << "x,stratum\n";
  for (const auto& r : m.to_records()) out << (r.positive ? 1 : 0) << ',' << r.stratum.value_or("") << '\n';
}

// strata.csv ----------------------------------------------------------------

inline StratumTable read_strata(std::istream& in, const std::string& source = "strata.csv") {
  const auto t = parse_csv(in, source);
  const auto c_z = require_column(t, "stratum", source);
  const auto c_g = require_column(t, "gamma", source);
  std::vector<Stratum> strata;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto ctx = where(source, t.lines[r]);
    if (t.rows[r][c_z].empty()) fail(ErrorKind::input, ctx + "empty stratum label");
    strata.push_back({t.rows[r][c_z], parse_number<double>(t.rows[r][c_g], ctx)});
  }
  try {
    return StratumTable::create(std::move(strata));
  } catch (const Error& e) {
    fail(e.kind(), source + ": " + e.what());
  }
}

inline void write_strata(std::ostream& out, const StratumTable& t) {
  out << "stratum,gamma\n";
  for (const auto& s : t.strata()) out << s.label << ',' << format_double(s.gamma) << '\n';
}

inline sim::SamplingTable read_sampling_table(std::istream& in, const std::string& source) {
  const auto t = parse_csv(in, source);
  const auto c_z = require_column(t, "stratum", source);
  const auto c_g = require_column(t, "gamma", source);
  const auto c_s = require_column(t, "sampling", source);
  std::vector<Stratum> strata;
  std::vector<double> sampling;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto ctx = where(source, t.lines[r]);
    strata.push_back({t.rows[r][c_z], parse_number<double>(t.rows[r][c_g], ctx)});
    sampling.push_back(parse_number<double>(t.rows[r][c_s], ctx));
  }
  try {
    return sim::SamplingTable::create(StratumTable::create(std::move(strata)), std::move(sampling));
  } catch (const Error& e) {
    fail(e.kind(), source + ": " + e.what());
  }
}

inline sim::SamplingTable load_sampling_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_sampling_table(in, path.string());
}

// key = value files ---------------------------------------------------------

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line;
};

inline std::vector<KeyValue> parse_key_values(std::istream& in, const std::string& source) {
  std::vector<KeyValue> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::input, where(source, n) + "expected 'key = value'");
    out.push_back({trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n});
  }
  return out;
}

/// "0.1, 0.2" or "[0.1, 0.2]".
inline std::vector<std::string> parse_list(std::string value) {
  value = trim(value);
  if (!value.empty() && value.front() == '[' && value.back() == ']')
    value = value.substr(1, value.size() - 2);
  std::vector<std::string> items;
  for (auto& s : split(value, ','))
    if (!s.empty()) items.push_back(s);
  return items;
}

// model.cfg -----------------------------------------------------------------

/// Product of (component, level) indicators; one design column.
using DesignTerm = std::vector<std::pair<std::size_t, std::string>>;

struct ModelConfig {
  Link link = Link::logit;
  std::vector<DesignTerm> terms;  // intercept excluded
  std::vector<std::string> names;
};

namespace detail {

// Levels of every label component, in order of first appearance.
inline std::vector<std::vector<std::string>> component_levels(const StratumTable& t) {
  std::vector<std::vector<std::string>> levels;
  for (const auto& s : t.strata()) {
    const auto parts = sim::split_label(s.label);
    if (levels.size() < parts.size()) levels.resize(parts.size());
    for (std::size_t c = 0; c < parts.size(); ++c)
      if (std::find(levels[c].begin(), levels[c].end(), parts[c]) == levels[c].end())
        levels[c].push_back(parts[c]);
  }
  return levels;
}

inline std::size_t parse_component(const std::string& s, std::size_t count, const std::string& ctx) {
  const auto c = parse_number<std::size_t>(s, ctx);
  if (c >= count)
    fail(ErrorKind::input, ctx + "label component " + s + " does not exist (labels have " +
                               std::to_string(count) + " components)");
  return c;
}

inline std::string term_name(const DesignTerm& t) {
  std::string name;
  for (const auto& [c, level] : t) name += (name.empty() ? "" : "*") + std::to_string(c) + ":" + level;
  return name;
}

}  // namespace detail

/// Expands model.cfg terms against the component levels of `table`.
inline ModelConfig read_model(std::istream& in, const StratumTable& table,
                              const std::string& source = "model.cfg") {
  const auto levels = detail::component_levels(table);
  ModelConfig cfg;
  auto add = [&](DesignTerm t) {
    cfg.names.push_back(detail::term_name(t));
    cfg.terms.push_back(std::move(t));
  };
  for (const auto& kv : parse_key_values(in, source)) {
    const auto ctx = where(source, kv.line);
    if (kv.key == "link") {
      if (kv.value == "logit") cfg.link = Link::logit;
      else if (kv.value == "probit") cfg.link = Link::probit;
      else fail(ErrorKind::input, ctx + "link must be logit or probit");
    } else if (kv.key == "factor") {
      const auto c = detail::parse_component(kv.value, levels.size(), ctx);
      for (std::size_t l = 1; l < levels[c].size(); ++l) add({{c, levels[c][l]}});
    } else if (kv.key == "interaction") {
      const auto parts = split(kv.value, '*');
      if (parts.size() != 2) fail(ErrorKind::input, ctx + "interaction must be '<i>*<j>'");
      const auto a = detail::parse_component(parts[0], levels.size(), ctx);
      const auto b = detail::parse_component(parts[1], levels.size(), ctx);
      if (a == b) fail(ErrorKind::input, ctx + "interaction needs two different components");
      for (std::size_t i = 1; i < levels[a].size(); ++i)
        for (std::size_t j = 1; j < levels[b].size(); ++j)
          add({{a, levels[a][i]}, {b, levels[b][j]}});
    } else if (kv.key == "indicator") {
      DesignTerm term;
      for (const auto& piece : split(kv.value, '*')) {
        const auto colon = piece.find(':');
        if (colon == std::string::npos)
          fail(ErrorKind::input, ctx + "indicator must be '<component>:<level>'");
        const auto c = detail::parse_component(trim(piece.substr(0, colon)), levels.size(), ctx);
        const auto level = trim(piece.substr(colon + 1));
        if (std::find(levels[c].begin(), levels[c].end(), level) == levels[c].end())
          fail(ErrorKind::input, ctx + "level '" + level + "' never appears in component " +
                                     std::to_string(c) + " of the stratum table");
        term.emplace_back(c, level);
      }
      add(std::move(term));
    } else {
      fail(ErrorKind::input, ctx + "unknown key '" + kv.key + "'");
    }
  }
  return cfg;
}

inline RegressionSpec make_spec(const ModelConfig& cfg) {
  auto design = [terms = cfg.terms](const std::string& label) {
    const auto parts = sim::split_label(label);
    std::vector<double> h{1.0};
    for (const auto& term : terms) {
      bool on = true;
      for (const auto& [c, level] : term) on = on && c < parts.size() && parts[c] == level;
      h.push_back(on ? 1.0 : 0.0);
    }
    return h;
  };
  return {cfg.link, std::move(design), cfg.terms.size() + 1};
}

// simulation config ---------------------------------------------------------

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "RG") return Method::rg;
  if (s == "SRG") return Method::srg;
  if (s == "SRGM") return Method::srgm;
  return std::nullopt;
}

/// `table` paths are resolved relative to the config file's directory.
/// When a DGP needs a table and none is given, `default_table_dir` is searched
/// for dgp3_strata.csv / dgp4_strata.csv.
inline sim::SimulationConfig read_simulation_config(
    std::istream& in, const std::string& source,
    const std::filesystem::path& base_dir = {},
    const std::filesystem::path& default_table_dir = {}) {
  sim::SimulationConfig cfg;
  cfg.pi_grid.clear();
  std::optional<std::filesystem::path> table;
  bool have_dgp = false;
  auto doubles = [&](const KeyValue& kv) {
    std::vector<double> v;
    for (const auto& s : parse_list(kv.value)) v.push_back(parse_number<double>(s, where(source, kv.line) + kv.key + ": "));
    if (v.empty()) fail(ErrorKind::input, where(source, kv.line) + kv.key + ": empty list");
    return v;
  };
  for (const auto& kv : parse_key_values(in, source)) {
    const auto ctx = where(source, kv.line) + kv.key + ": ";
    if (kv.key == "dgp") {
      auto d = sim::parse_dgp(kv.value);
      if (!d) fail(ErrorKind::input, ctx + "unknown dgp '" + kv.value +
                                         "' (expected DGP1, DGP2, DGP3, DGP4, DGP3_MIS or DGP4_MIS)");
      cfg.dgp = *d;
      have_dgp = true;
    } else if (kv.key == "pi") cfg.pi_grid = doubles(kv);
    else if (kv.key == "sigma_e") cfg.sigma_e_grid = doubles(kv);
    else if (kv.key == "sigma_p") cfg.sigma_p_grid = doubles(kv);
    else if (kv.key == "n1") cfg.n1 = parse_number<Count>(kv.value, ctx);
    else if (kv.key == "n2") cfg.n2 = parse_number<Count>(kv.value, ctx);
    else if (kv.key == "n3") cfg.n3 = parse_number<Count>(kv.value, ctx);
    else if (kv.key == "replicates") cfg.replicates = parse_number<int>(kv.value, ctx);
    else if (kv.key == "seed") cfg.master_seed = parse_number<std::uint64_t>(kv.value, ctx);
    else if (kv.key == "threads") cfg.threads = parse_number<unsigned>(kv.value, ctx);
    else if (kv.key == "level") cfg.level = parse_number<double>(kv.value, ctx);
    else if (kv.key == "table") table = base_dir / kv.value;
    else if (kv.key == "plugin") {
      if (kv.value == "truncated") cfg.plugin = PluginPi::truncated;
      else if (kv.value == "raw") cfg.plugin = PluginPi::raw;
      else fail(ErrorKind::input, ctx + "expected 'truncated' or 'raw'");
    }
    else if (kv.key == "estimators") {
      cfg.estimators.clear();
      for (const auto& s : parse_list(kv.value)) {
        auto m = parse_method(s);
        if (!m) fail(ErrorKind::input, ctx + "unknown estimator '" + s + "' (expected RG, SRG, SRGM)");
        cfg.estimators.push_back(*m);
      }
    } else {
      fail(ErrorKind::input, where(source, kv.line) + "unknown key '" + kv.key + "'");
    }
  }
  if (!have_dgp) fail(ErrorKind::input, source + ": missing 'dgp'");
  if (sim::uses_table_file(cfg.dgp)) {
    if (!table) {
      const bool four = cfg.dgp == sim::Dgp::dgp4 || cfg.dgp == sim::Dgp::dgp4_mis;
      table = default_table_dir / (four ? "dgp4_strata.csv" : "dgp3_strata.csv");
    }
    cfg.table = load_sampling_table(*table);
  }
  cfg.validate();
  return cfg;
}

}  // namespace seroprev::io
