#include <gtest/gtest.h>

#include "glstar/experiments.hpp"

using namespace glstar;

namespace {

StepFunction unit_normals(int L, std::uint64_t seed) { return detail::random_unit_step(L, seed, 0); }

double summary_number(const ExperimentReport& r, const std::string& key) { return r.summary.at(key).get<double>(); }

}  // namespace

TEST(Report, CsvAndJsonAreDeterministic) {
  ExperimentReport r;
  r.name = "demo";
  r.seed = 7;
  r.columns = {"a", "b", "c"};
  r.add({1, 0.1, "x,y"});
  r.add({2, INFINITY, "plain"});
  EXPECT_EQ(to_csv(r), "a,b,c\n1,0.10000000000000001,\"x,y\"\n2,inf,plain\n");
  EXPECT_THROW(r.add({1, 2}), ConfigError);
  auto j = to_json(r);
  EXPECT_TRUE(j.contains("timestamp"));
  EXPECT_EQ(j["schema"]["csv_columns"].size(), 3u);
  EXPECT_EQ(to_json(r, false).dump(), to_json(r, false).dump());
  EXPECT_FALSE(to_json(r, false).contains("timestamp"));
}

TEST(Report, KernelNames) {
  Params p = default_params();
  EXPECT_EQ(kernel_by_name("cancellative", p).label, make_cancellative(1, 1, 0.5, 0.5).label);
  EXPECT_THROW(kernel_by_name("gaussian", p), ConfigError);
}

TEST(Averaging, PartitionHoldsForEveryDraw) {
  AveragingOptions o;
  o.trials = 200;
  auto rep = run_averaging(default_params(), o, 3);
  EXPECT_TRUE(rep.summary["partition_pass"].get<bool>());
  EXPECT_LE(summary_number(rep, "partition_max_error"), 1e-10);
  EXPECT_EQ(rep.records.size(), 200u);
}

TEST(Averaging, ZeroIntegrandPassesWhateverPiGood) {
  AveragingOptions o;
  o.trials = 100;
  o.integrand = Integrand::zero;
  auto rep = run_averaging(default_params(), o, 1);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(summary_number(rep, "estimate"), 0.0);
}

TEST(Averaging, SmallRadiusRecoversTotal) {
  // r = 10 against a ten-level tower: one ancestor scale is tested and
  // roughly a third of the draws are good
  Params p = Params::make(1, 1, 0.5, 0.5, 3, 3, 10);
  AveragingOptions o;
  o.trials = 2000;
  o.octaves = 10;
  auto rep = run_averaging(p, o, 5);
  ASSERT_FALSE(rep.summary.contains("aborted")) << rep.summary.dump();
  EXPECT_NEAR(summary_number(rep, "estimate"), std::log(2.0), 0.05 * std::log(2.0));
}

TEST(Averaging, DefaultRadiusIsGoodnessStarved) {
  AveragingOptions o;
  o.trials = 100;
  auto rep = run_averaging(default_params(), o, 2);
  if (summary_number(rep, "pi_good") == 0.0) {
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.summary["aborted"], "goodness-starved configuration");
  }
}

TEST(Schur, SingletonExactAndBilinearBound) {
  SchurOptions o;
  o.sizes = {1, 2, 4, 8, 16, 32, 64};
  o.vectors = 200;
  auto rep = run_schur(default_params(), o, 4);
  EXPECT_NEAR(summary_number(rep, "singleton_norm"), std::pow(2.0, -1.5), 1e-15);
  EXPECT_EQ(rep.summary["vector_violations"].get<int>(), 0);
  EXPECT_LE(summary_number(rep, "worst_vector_ratio"), 1.0 + 1e-12);
  double prev = 0.0;
  for (const auto& row : rep.records) {
    EXPECT_GE(row[1].get<double>(), prev * (1 - 1e-12));  // norms of nested collections increase
    prev = row[1].get<double>();
  }
}

TEST(Schur, PowerIterationMatchesEigenSolver) {
  Eigen::MatrixXd A(3, 3);
  A << 2, 1, 0, 1, 2, 1, 0, 1, 2;
  EXPECT_NEAR(power_norm(A, 100000, 1e-14), 2 + std::sqrt(2.0), 1e-10);
  EXPECT_THROW(power_norm(A, 2, 1e-14), NumericError);
}

TEST(Schur, RejectsOversizedCollections) {
  SchurOptions o;
  o.sizes = {1, 64};
  o.max_level = 4;
  EXPECT_THROW(run_schur(default_params(), o, 0), ConfigError);
}

TEST(OffDiagonalDecay, RandomConfigurationsAreStable) {
  auto configs = random_lemma32_configs(8, 9);
  for (const auto& c : configs) {
    EXPECT_TRUE(c.I2.contains_point({c.x1}));
    EXPECT_GT(c.t1, c.I2.side() / 2);
    EXPECT_LE(c.t1, c.I2.side());
  }
  auto rep = run_lemma32(default_params(), configs, {}, 9);
  EXPECT_TRUE(rep.pass) << rep.summary.dump();
  EXPECT_GT(summary_number(rep, "max_ratio"), 0.0);
}

TEST(OffDiagonalDecay, EmptyListPassesAndBadPointRejected) {
  EXPECT_TRUE(run_lemma32(default_params(), {}, {}).pass);
  Lemma32Config bad{standard_cube(0, {0}), standard_cube(0, {0}), 0.5, 0.1};
  EXPECT_THROW(run_lemma32(default_params(), {bad}, {}), ConfigError);
}

TEST(KDecay, ProducesRowsAndRecordsPrecondition) {
  Params p = default_params();
  auto found = best_goodness_cube(p, 14, 200, 1);
  KDecayOptions o;
  auto rep = run_kdecay(p, make_cancellative(1, 1, 0.5, 0.5), found.cube, found.grid, o, {}, 1);
  EXPECT_EQ(rep.records.size(), 14u);
  EXPECT_EQ(rep.summary["cube_good"].get<bool>(), found.good);
  if (!found.good) EXPECT_FALSE(rep.pass);
  for (const auto& row : rep.records) EXPECT_GT(row[1].get<double>(), 0.0);
}

TEST(KDecay, RejectsShortRange) {
  Params p = default_params();
  auto g = ShiftedGrid::standard_grid(1, -20, 2);
  KDecayOptions o;
  o.k_max = p.r + 1;
  EXPECT_THROW(run_kdecay(p, make_cancellative(1, 1, 0.5, 0.5), make_cube(g, 0, {0}), g, o, {}), ConfigError);
}

TEST(Carleson, DesignedDichotomy) {
  Params p = default_params();
  CarlesonOptions o;
  o.omegas = 4;
  o.levels = 2;
  o.unit_levels = 3;
  auto rep = run_carleson(p, {make_cancellative(1, 1, 0.5, 0.5), make_size_only(1, 1, 0.5, 0.5)}, o, 2, {});
  EXPECT_TRUE(rep.summary["pattern_matches_design"].get<bool>());
  EXPECT_FALSE(rep.pass);
  EXPECT_TRUE(rep.summary["kernels"]["cancellative"]["pass"].get<bool>()) << rep.summary.dump();
  EXPECT_LE(rep.summary["kernels"]["size_only"]["unit_square_max_count_deviation"].get<double>(), 1e-12);
  auto only = run_carleson(p, {make_cancellative(1, 1, 0.5, 0.5)}, o, 2, {});
  EXPECT_TRUE(only.pass);
}

TEST(BoundRatio, SaturatesAndScalesLinearly) {
  BoundRatioOptions o;
  o.count = 20;
  o.levels = {3, 4, 5};
  o.homogeneity_level = 3;
  o.check_samples = 1000;
  auto rep = run_boundratio(default_params(), make_cancellative(1, 1, 0.5, 0.5), o, 1, {});
  EXPECT_TRUE(rep.pass) << rep.summary.dump();
  EXPECT_LE(summary_number(rep, "homogeneity_deviation"), 1e-12);
}

TEST(BoundRatio, AgreesWithDirectSquaredNorm) {
  Params p = default_params();
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  auto f = unit_normals(2, 3);
  auto r1 = toeplitz_unit(k.first(), 4, {}), r2 = toeplitz_unit(k.second(), 4, {});
  double c = detail::weight_constant(3.0);
  double via_rows = detail::toeplitz_sq_norm(f, r1, r2, c, c);
  GridPair gp{ShiftedGrid::standard_grid(1, -20, 30), ShiftedGrid::standard_grid(1, -20, 30)};
  EXPECT_NEAR(via_rows, gstar_sq_norm(k, f, p, gp, {}), 1e-3 * via_rows);
}

TEST(BoundRatio, AbortsOnBrokenKernel) {
  BoundRatioOptions o;
  o.check_samples = 1000;
  auto broken = make_broken(make_cancellative(1, 1, 0.5, 0.5), Defect::holder_break);
  auto rep = run_boundratio(default_params(), broken, o, 1, {});
  EXPECT_FALSE(rep.pass);
  EXPECT_TRUE(rep.summary.contains("aborted"));
  EXPECT_TRUE(rep.records.empty());
}

TEST(Cases, InequalityAndTagPartition) {
  Params p = default_params();
  auto rep = run_cases(p, make_cancellative(1, 1, 0.5, 0.5), unit_normals(2, 5), 11, {});
  EXPECT_TRUE(rep.summary["partition_pass"].get<bool>());
  EXPECT_TRUE(rep.pass) << rep.summary.dump();
  EXPECT_LE(summary_number(rep, "G"), summary_number(rep, "four_times_pieces") * (1 + 1e-12));
  EXPECT_TRUE(std::isfinite(summary_number(rep, "piece_constant")));
}

TEST(Cases, SingleTensorHaarFillsOnePiece) {
  StepFunction f(1, {0.0, 0.0}, {2, 2});
  f.values = {0.5, -0.5, -0.5, 0.5};  // unit-norm h_[0,1) x h_[0,1)
  auto rep = run_cases(default_params(), make_cancellative(1, 1, 0.5, 0.5), f, 4, {});
  ASSERT_FALSE(rep.records.empty());
  for (const auto& row : rep.records) {
    int nonzero = 0;
    for (int c = 4; c <= 7; ++c) nonzero += row[c].get<double>() != 0.0;
    EXPECT_EQ(nonzero, 1);
  }
  EXPECT_TRUE(rep.pass);
}

TEST(Cases, RejectsMisplacedFunction) {
  StepFunction f(2, {0.5, 0.0}, {4, 4});
  EXPECT_THROW(run_cases(default_params(), make_cancellative(1, 1, 0.5, 0.5), f, 1, {}), ConfigError);
}

TEST(KernelCheck, FlagsDefectsAndPassesFamilies) {
  KernelCheckOptions o;
  o.samples = 2000;
  auto rep = run_kernelcheck(default_params(), o, 3);
  EXPECT_TRUE(rep.pass) << rep.summary.dump();
  EXPECT_LE(summary_number(rep, "tensor_consistency"), 1e-12);
  EXPECT_EQ(rep.records.size(), 15u);
}

TEST(PiGood, RowsAndMonotonicity) {
  PiGoodRunOptions o;
  o.trials = 200;
  o.octaves = 10;
  auto rep = run_pigood(default_params(), o, 1);
  EXPECT_EQ(rep.records.size(), 11u);
  EXPECT_EQ(summary_number(rep, "exhaustive_at_r_low"), 0.0);
  EXPECT_EQ(rep.summary["monotonicity_violations"].get<long>(), 0);
}
