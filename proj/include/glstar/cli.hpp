#pragma once
// Command-line front end: config parsing, experiment dispatch, report files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiments.hpp"

namespace glstar {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"averaging", "schur",    "lemma32",     "kdecay", "carleson",
                                              "boundratio", "cases", "kernelcheck", "pigood"};
  return names;
}

/// Flat key/value configuration. Sections named after an experiment apply only
/// to that experiment; any other section name is a grouping label.
struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string out_dir = "./out";
  std::map<std::string, std::string> values;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{"n",     "m",      "alpha",  "beta",            "lambda1",
                                            "lambda2", "r",    "levels", "trials",          "points_per_cell",
                                            "t_points_per_octave", "truncation_eps", "kernel", "defect", "cap",
                                            "integrand"};
    return k;
  }

  bool has(const std::string& key) const { return values.count(key) > 0; }

  double number(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    const std::string& s = it->second;
    if (s == "inf") return INFINITY;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || used == 0 || !std::isfinite(v)) throw ConfigError("key '" + key + "' expects a number, got '" + s + "'");
    return v;
  }

  int integer(const std::string& key, int fallback) const {
    double v = number(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError("key '" + key + "' expects an integer");
    return static_cast<int>(v);
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(text(key, ""));
    for (std::string item; std::getline(ss, item, ',');) {
      auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
      if (a == std::string::npos) throw ConfigError("empty list item in '" + key + "'");
      out.push_back(item.substr(a, b - a + 1));
    }
    return out;
  }

  std::vector<int> int_list(const std::string& key, std::vector<int> fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (const auto& s : list(key)) {
      RunConfig one;
      one.values[key] = s;
      out.push_back(one.integer(key, 0));
    }
    return out;
  }

  Params params() const {
    Params d = default_params();
    return Params::make(integer("n", d.n), integer("m", d.m), number("alpha", d.alpha), number("beta", d.beta),
                        number("lambda1", d.lambda1), number("lambda2", d.lambda2), integer("r", d.r));
  }

  QuadratureSpec quadrature() const {
    QuadratureSpec s;
    s.points_per_cell = integer("points_per_cell", s.points_per_cell);
    s.t_points_per_octave = integer("t_points_per_octave", s.t_points_per_octave);
    s.truncation_eps = number("truncation_eps", s.truncation_eps);
    s.validate();
    return s;
  }
};

/// Parses `key = value` lines under optional [section] headers. `#` and `;`
/// start comments. Keys outside the fixed set are rejected.
inline void parse_config(std::istream& in, const std::string& experiment, RunConfig& cfg) {
  std::string line, section;
  int lineno = 0;
  const auto& names = experiment_names();
  std::map<std::string, std::string> general, specific;
  auto trim = [](std::string s) {
    auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::string where = "config line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto& ks = RunConfig::keys();
    if (std::find(ks.begin(), ks.end(), key) == ks.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": missing value for '" + key + "'");
    bool per_experiment = std::find(names.begin(), names.end(), section) != names.end();
    if (!per_experiment)
      general[key] = value;
    else if (section == experiment)
      specific[key] = value;
  }
  for (auto& [k, v] : general) cfg.values[k] = v;
  for (auto& [k, v] : specific) cfg.values[k] = v;
}

namespace detail {

inline Kernel configured_kernel(const RunConfig& c, const Params& p, const std::string& fallback) {
  Kernel k = kernel_by_name(c.text("kernel", fallback), p);
  if (!c.has("defect")) return k;
  std::vector<Defect> ds;
  for (const auto& s : c.list("defect")) ds.push_back(parse_defect(s));
  return make_broken(k, ds);
}

inline void add_run_settings(ExperimentReport& r, const RunConfig& c) {
  json used = json::object();
  for (const auto& [k, v] : c.values) used[k] = v;
  r.params["config"] = used;
}

inline ExperimentReport dispatch(const RunConfig& c) {
  Params p = c.params();
  QuadratureSpec spec = c.quadrature();
  const std::string& name = c.experiment;
  std::uint64_t seed = c.seed;
  if (name == "averaging") {
    AveragingOptions o;
    o.integrand = parse_integrand(c.text("integrand", "band"));
    o.trials = c.integer("trials", o.trials);
    return run_averaging(p, o, seed);
  }
  if (name == "schur") {
    SchurOptions o;
    o.vectors = c.integer("trials", o.vectors);
    int top = c.int_list("levels", {9}).front();
    if (top < 0 || top > 12) throw ConfigError("schur levels must lie in [0, 12]");
    o.sizes.clear();
    for (int e = 0; e <= top; ++e) o.sizes.push_back(1 << e);
    o.max_level = std::max(o.max_level, top);
    return run_schur(p, o, seed);
  }
  if (name == "lemma32") {
    int count = c.integer("trials", 50);
    if (count < 0) throw ConfigError("trials must be >= 0");
    return run_lemma32(p, random_lemma32_configs(count, seed), spec, seed);
  }
  if (name == "kdecay") {
    KDecayOptions o;
    o.k_max = c.int_list("levels", {o.k_max}).front();
    auto found = best_goodness_cube(p, o.k_max, c.integer("trials", 1000), seed);
    auto r = run_kdecay(p, configured_kernel(c, p, "cancellative"), found.cube, found.grid, o, spec, seed);
    r.summary["goodness_margin"] = found.margin;
    r.summary["search_draws"] = found.draws;
    return r;
  }
  if (name == "carleson") {
    CarlesonOptions o;
    o.omegas = c.integer("trials", o.omegas);
    o.levels = c.int_list("levels", {o.levels}).front();
    o.cap = c.number("cap", o.cap);
    std::vector<Kernel> ks;
    std::vector<std::string> names = c.has("kernel") ? c.list("kernel") : std::vector<std::string>{"cancellative", "size_only", "mixed"};
    for (const auto& kn : names) {
      RunConfig one = c;
      one.values["kernel"] = kn;
      ks.push_back(configured_kernel(one, p, kn));
    }
    return run_carleson(p, ks, o, seed, spec);
  }
  if (name == "boundratio") {
    BoundRatioOptions o;
    o.count = c.integer("trials", o.count);
    o.levels = c.int_list("levels", o.levels);
    o.homogeneity_level = *std::min_element(o.levels.begin(), o.levels.end());
    return run_boundratio(p, configured_kernel(c, p, "cancellative"), o, seed, spec);
  }
  if (name == "cases") {
    int L = c.int_list("levels", {3}).front();
    if (L < 1 || L > 6) throw ConfigError("cases levels must lie in [1, 6]");
    return run_cases(p, configured_kernel(c, p, "cancellative"), random_unit_step(L, seed, 0), seed, spec);
  }
  if (name == "kernelcheck") {
    KernelCheckOptions o;
    o.samples = c.integer("trials", o.samples);
    o.kernel = c.text("kernel", o.kernel);
    if (c.has("defect"))
      for (const auto& s : c.list("defect")) o.defects.push_back(parse_defect(s));
    return run_kernelcheck(p, o, seed);
  }
  if (name == "pigood") {
    PiGoodRunOptions o;
    o.trials = c.integer("trials", o.trials);
    o.octaves = c.int_list("levels", {o.octaves}).front();
    return run_pigood(p, o, seed);
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

inline std::string summary_line(const ExperimentReport& r) {
  std::ostringstream s;
  s << r.name << " seed=" << r.seed << (r.pass ? " PASS" : " FAIL") << " rows=" << r.records.size() << " "
    << r.summary.dump();
  return s.str();
}

}  // namespace detail

/// Runs the command line. Exit codes: 0 pass, 1 property violation (report
/// written), 2 configuration error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Numerical experiments for product-space g*-functions", "glstar"};
  std::vector<std::string> positional;
  std::string config_file;
  RunConfig cfg;
  int threads = 0;
  bool quiet = false;
  app.add_option("experiment", positional, "[run] <name>, name one of: averaging schur lemma32 kdecay carleson "
                                           "boundratio cases kernelcheck pigood");
  app.add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  app.add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "suppress the summary line");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }
  if (!positional.empty() && positional.front() == "run") positional.erase(positional.begin());
  const auto& names = experiment_names();
  if (positional.size() != 1 || std::find(names.begin(), names.end(), positional.front()) == names.end()) {
    err << (positional.empty() ? "error: missing experiment name\n" : "error: unknown experiment '" + positional.front() + "'\n")
        << app.help();
    return 2;
  }
  cfg.experiment = positional.front();
  ExperimentReport rep;
  try {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      parse_config(in, cfg.experiment, cfg);
    }
    if (threads > 0) set_threads(threads);
    cfg.params();
    cfg.quadrature();
    try {
      rep = detail::dispatch(cfg);
    } catch (const NumericError& e) {
      // numerical breakdown counts as a violation; the report records it
      rep = ExperimentReport{};
      rep.name = cfg.experiment;
      rep.seed = cfg.seed;
      rep.params = params_json(cfg.params(), cfg.quadrature());
      rep.columns = {"error"};
      rep.summary["error"] = e.what();
      rep.notes.push_back(std::string("numerical failure: ") + e.what());
      rep.pass = false;
    }
    detail::add_run_settings(rep, cfg);
    std::filesystem::create_directories(cfg.out_dir);
    write_report(rep, cfg.out_dir);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  }
  if (!quiet) out << detail::summary_line(rep) << "\n";
  return rep.pass ? 0 : 1;
}

}  // namespace glstar
