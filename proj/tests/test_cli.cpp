#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "glstar/cli.hpp"

using namespace glstar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "glstar");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("glstar-cli-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string without_timestamp(const fs::path& p) {
  auto j = json::parse(slurp(p));
  j.erase("timestamp");
  return j.dump();
}

}  // namespace

TEST(Cli, MissingExperimentIsUsageError) {
  auto r = call({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing experiment name"), std::string::npos);
  EXPECT_NE(r.err.find("--config"), std::string::npos);
  EXPECT_EQ(call({"run", "nonsense"}).code, 2);
  EXPECT_EQ(call({"schur", "--bogus-flag"}).code, 2);
}

TEST(Cli, UnknownConfigKeyRejected) {
  auto d = scratch("unknown");
  auto cfg = write_file(d / "bad.cfg", "[params]\nalpah = 0.5\n");
  auto r = call({"schur", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("alpah"), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "schur-0.csv"));
}

TEST(Cli, InvalidParamsRejectedBeforeRunning) {
  auto d = scratch("invalid");
  auto cfg = write_file(d / "bad.cfg", "lambda1 = 0.5\n");
  EXPECT_EQ(call({"lemma32", "--config", cfg, "--out", d.string()}).code, 2);
  cfg = write_file(d / "bad2.cfg", "r = two\n");
  EXPECT_EQ(call({"lemma32", "--config", cfg, "--out", d.string()}).code, 2);
}

TEST(Cli, SectionsOverrideOnlyTheirExperiment) {
  std::istringstream in("trials = 5\n[schur]\ntrials = 7\n[pigood]\ntrials = 9\n");
  RunConfig c;
  parse_config(in, "schur", c);
  EXPECT_EQ(c.integer("trials", 0), 7);
  std::istringstream in2("trials = 5\n[schur]\ntrials = 7\n");
  RunConfig c2;
  parse_config(in2, "lemma32", c2);
  EXPECT_EQ(c2.integer("trials", 0), 5);
}

TEST(Cli, PassingRunWritesReportsAndIsReproducible) {
  auto d = scratch("repro");
  auto cfg = write_file(d / "l.cfg", "[lemma32]\ntrials = 6\n");
  auto a = call({"run", "lemma32", "--config", cfg, "--seed", "7", "--out", d.string(), "--threads", "1"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("PASS"), std::string::npos);
  auto csv1 = slurp(d / "lemma32-7.csv");
  auto json1 = without_timestamp(d / "lemma32-7.json");
  auto b = call({"lemma32", "--config", cfg, "--seed", "7", "--out", d.string(), "--quiet"});
  EXPECT_EQ(b.code, 0);
  EXPECT_TRUE(b.out.empty());
  EXPECT_EQ(slurp(d / "lemma32-7.csv"), csv1);
  EXPECT_EQ(without_timestamp(d / "lemma32-7.json"), json1);
  auto j = json::parse(slurp(d / "lemma32-7.json"));
  EXPECT_EQ(j["schema"]["csv_columns"].size(), 10u);
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(std::count(csv1.begin(), csv1.end(), '\n'), 7);
}

TEST(Cli, ViolationExitsOneWithCompleteReport) {
  auto d = scratch("violation");
  auto cfg = write_file(d / "c.cfg", "[carleson]\nkernel = size_only\ntrials = 3\nlevels = 2\n");
  auto r = call({"carleson", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(r.code, 1) << r.err;
  auto csv = slurp(d / "carleson-0.csv");
  EXPECT_NE(csv.find("size_only"), std::string::npos);
  auto j = json::parse(slurp(d / "carleson-0.json"));
  EXPECT_FALSE(j["pass"].get<bool>());
  EXPECT_GT(j["summary"]["kernels"]["size_only"]["max_ratio"].get<double>(), 16.0);
}

TEST(Cli, DefectFlagsReachTheKernel) {
  auto d = scratch("defect");
  auto cfg = write_file(d / "b.cfg", "[boundratio]\ndefect = holder_break\ntrials = 4\nlevels = 2, 3\n");
  auto r = call({"boundratio", "--config", cfg, "--out", d.string()});
  EXPECT_EQ(r.code, 1);
  auto j = json::parse(slurp(d / "boundratio-0.json"));
  EXPECT_TRUE(j["summary"].contains("aborted"));
}

TEST(Cli, ShippedConfigParses) {
  std::ifstream in(GLSTAR_SOURCE_DIR "/configs/default.cfg");
  ASSERT_TRUE(in.good());
  for (const auto& name : experiment_names()) {
    in.clear();
    in.seekg(0);
    RunConfig c;
    parse_config(in, name, c);
    EXPECT_EQ(c.params().r, 8);
  }
}
