#include <gtest/gtest.h>

#include "glstar/kernels.hpp"

using namespace glstar;

namespace {

/// Graded Gauss quadrature of a 1D factor over [c0, c1] at x, used as an
/// independent check of the closed forms.
double quad_cell(const KernelFactor& f, double t, double x, double c0, double c1) {
  Rule1D r = graded_rule(c0, c1, {x}, t / 64, 16);
  std::vector<double> terms(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) terms[i] = r.w[i] * f.value1(t, x - r.x[i]);
  return pairwise_sum(terms);
}

std::vector<KernelFactor> all_families() {
  std::vector<KernelFactor> out;
  for (auto fam : {FactorFamily::size_only, FactorFamily::cancellative, FactorFamily::wrong_alpha,
                   FactorFamily::holder_break, FactorFamily::zero})
    for (double a : {0.25, 0.5, 0.9}) out.push_back({fam, 1, a, 1.0});
  return out;
}

}  // namespace

TEST(Factor, SizeOnlyMeanIsFour) {
  auto f = size_factor(1, 0.5);
  EXPECT_NEAR(f.mean(), 4.0, 1e-14);
  EXPECT_NEAR(f.cell_integral(1.0, 0.0, -1e300, 1e300), 4.0, 1e-12);
  // Mean by quadrature over a truncated line plus the closed-form tail
  double R = 1e6;
  double tail = 2 * std::pow(1.0 / (1.0 + R), 0.5) / 0.5;
  EXPECT_NEAR(quad_cell(f, 1.0, 0.0, -R, R) + tail, 4.0, 1e-9);
}

TEST(Factor, CellIntegralsMatchQuadrature) {
  auto rng = rng_stream(1, 0);
  std::uniform_real_distribution<double> U(-3, 3);
  for (const auto& f : all_families()) {
    for (int i = 0; i < 40; ++i) {
      double t = std::exp2(4 * U(rng) / 3);
      double x = U(rng), c0 = U(rng), c1 = c0 + std::exp2(U(rng));
      double exact = f.cell_integral(t, x, c0, c1);
      double q = quad_cell(f, t, x, c0, c1);
      EXPECT_NEAR(exact, q, 1e-10 * (1 + std::abs(q))) << f.name() << " a=" << f.alpha;
    }
  }
}

TEST(Factor, ComplementPlusCellIsMean) {
  auto rng = rng_stream(2, 0);
  std::uniform_real_distribution<double> U(-5, 5);
  for (const auto& f : all_families()) {
    for (int i = 0; i < 40; ++i) {
      double t = std::exp2(U(rng)), x = U(rng), c0 = U(rng), c1 = c0 + std::exp2(U(rng));
      EXPECT_NEAR(f.cell_integral(t, x, c0, c1) + f.complement_integral(t, x, c0, c1), f.mean(),
                  1e-12 * (1 + std::abs(f.mean())));
    }
  }
}

TEST(Factor, ComplementStableFarFromCell) {
  auto f = size_factor(1, 0.5);
  // small complement of a huge cell: 2 * (t / (t + R))^a / a with R = 1e12
  double v = f.complement_integral(1.0, 0.0, -1e12, 1e12);
  EXPECT_NEAR(v, 2 * std::pow(1.0 / (1.0 + 1e12), 0.5) / 0.5, 1e-20);
}

TEST(Factor, CancellativeMeanZeroAndDominated) {
  auto c = cancellative_factor(1, 0.5);
  auto s = size_factor(1, 0.5);
  EXPECT_EQ(c.mean(), 0.0);
  EXPECT_NEAR(c.cell_integral(1.0, 0.0, -1e200, 1e200), 0.0, 1e-12);
  for (double u = -50; u <= 50; u += 0.37) EXPECT_LE(std::abs(c.value1(1.3, u)), 2.0 * s.value1(1.3, u));
}

TEST(Factor, MultiDimensionalMean) {
  for (double a : {0.5, 0.8}) {
    KernelFactor f{FactorFamily::size_only, 2, a, 1.0};
    // the 2D cell integral over a large box approaches d 2^d B(d, a)
    double R = 1e7;
    double inside = f.cell_integral(1.0, {0.0, 0.0}, {-R, -R}, {R, R}, 12);
    double tail = 2 * 4 * std::pow(1.0 / (1.0 + R), a) / a;  // sup-norm shells beyond R
    // tensor Gauss rules straddle the |u1| = |u2| kinks, so agreement is ~1e-4
    EXPECT_NEAR(inside + tail, f.mean(), 1e-3 * f.mean());
    EXPECT_NEAR(f.mean(), 8.0 * std::tgamma(2.0) * std::tgamma(a) / std::tgamma(2.0 + a), 1e-12);
  }
}

TEST(Kernel, DiagonalValue) {
  auto k = make_size_only(1, 1, 0.5, 0.5);
  for (double t1 : {0.01, 1.0, 37.0})
    for (double t2 : {0.2, 5.0}) EXPECT_NEAR(k.evaluate(t1, t2, {1.5, -2}, {1.5, -2}), 1 / (t1 * t2), 1e-12 / (t1 * t2));
}

TEST(Kernel, TranslationInvariance) {
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  auto rng = rng_stream(3, 0);
  std::uniform_real_distribution<double> U(-4, 4);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x{U(rng), U(rng)}, y{U(rng), U(rng)}, h{U(rng), U(rng)};
    std::vector<double> xh{x[0] + h[0], x[1] + h[1]}, yh{y[0] + h[0], y[1] + h[1]};
    double a = k.evaluate(0.7, 1.9, x, y), b = k.evaluate(0.7, 1.9, xh, yh);
    EXPECT_NEAR(a, b, 1e-12 * (1 + std::abs(a)));
  }
}

TEST(Kernel, TensorConsistency) {
  for (auto k : {make_size_only(1, 1, 0.5, 0.5), make_cancellative(1, 2, 0.5, 0.3),
                 make_broken(make_size_only(1, 1, 0.5, 0.5), {Defect::wrong_alpha, Defect::holder_break})})
    EXPECT_LE(tensor_consistency(k, 500, 4), 1e-12);
}

TEST(Kernel, BrokenWithoutDefectsIsUnchanged) {
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  auto b = make_broken(k, std::vector<Defect>{});
  EXPECT_EQ(b.label, k.label);
  EXPECT_EQ(b.evaluate(1, 1, {0.3, 0.1}, {0, 0}), k.evaluate(1, 1, {0.3, 0.1}, {0, 0}));
}

TEST(Kernel, InvalidParametersRejected) {
  EXPECT_THROW(make_size_only(0, 1, 0.5, 0.5), ConfigError);
  EXPECT_THROW(make_cancellative(1, 1, -0.5, 0.5), ConfigError);
  EXPECT_THROW(parse_defect("sideways"), ConfigError);
}

TEST(Checker, SizeOnlyIsExactlyItsMajorant) {
  Params p = default_params();
  auto r = check_size(make_size_only(1, 1, 0.5, 0.5), p, 2000, 5);
  EXPECT_LE(r.estimate, 1 + 1e-9);
  EXPECT_GE(r.estimate, 1 - 1e-9);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.samples, 2000);
}

TEST(Checker, CancellativePassesAllConditions) {
  Params p = default_params();
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  for (auto* check : {&check_size, &check_holder, &check_mixed}) {
    auto r = check(k, p, 4000, 6, {});
    EXPECT_LE(r.estimate, 4.0) << r.condition;
    EXPECT_TRUE(r.pass);
  }
}

TEST(Checker, SizeOnlyPassesHolderAndMixed) {
  Params p = default_params();
  auto k = make_size_only(1, 1, 0.5, 0.5);
  EXPECT_TRUE(check_holder(k, p, 2000, 8).pass);
  EXPECT_TRUE(check_mixed(k, p, 2000, 8).pass);
}

TEST(Checker, WrongAlphaIsFlagged) {
  Params p = default_params();
  auto k = make_broken(make_size_only(1, 1, 0.5, 0.5), Defect::wrong_alpha);
  auto r = check_size(k, p, 2000, 9);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.estimate, 50.0);
}

TEST(Checker, HolderBreakIsFlagged) {
  Params p = default_params();
  auto k = make_broken(make_cancellative(1, 1, 0.5, 0.5), Defect::holder_break);
  EXPECT_FALSE(check_holder(k, p, 2000, 10).pass);
  EXPECT_FALSE(check_mixed(k, p, 2000, 10).pass);
}

TEST(Checker, ScalingMultipliesEstimate) {
  Params p = default_params();
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  double a = check_size(k, p, 1000, 11).estimate;
  double b = check_size(scaled(k, 3.0), p, 1000, 11).estimate;
  EXPECT_NEAR(b, 3 * a, 1e-12 * b);
}

TEST(Checker, TooFewSamplesRejected) {
  EXPECT_THROW(check_size(make_size_only(1, 1, 0.5, 0.5), default_params(), 999, 0), ConfigError);
}

TEST(Checker, Reproducible) {
  Params p = default_params();
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  set_threads(1);
  auto a = check_holder(k, p, 1000, 12);
  set_threads(4);
  auto b = check_holder(k, p, 1000, 12);
  set_threads(0);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.worst_point, b.worst_point);
}

TEST(Checker, NonFiniteValueReported) {
  Kernel k = make_size_only(1, 1, 0.5, 0.5);
  k.evaluate = [](double, double, const std::vector<double>&, const std::vector<double>&) { return NAN; };
  k.tensor_parts.reset();
  EXPECT_THROW(check_size(k, default_params(), 1000, 0), NumericError);
}

TEST(Combo, CancellativeUnitCubeGolden) {
  Params p = default_params();
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  QuadratureSpec s;
  ComboDetail d;
  auto r = check_carleson_combo(k, p, standard_cube(0, {0}), ComboMode::size, s, 1000, 1, Slot::first, {}, &d);
  ComboDetail dr;
  check_carleson_combo(k, p, standard_cube(0, {0}), ComboMode::size, s.refined(), 1000, 1, Slot::first, {}, &dr);
  EXPECT_TRUE(std::isfinite(r.estimate));
  EXPECT_NEAR(d.carleson_factor, dr.carleson_factor, 0.05 * dr.carleson_factor);
  // frozen from an adaptive scipy quadrature of the same double integral
  EXPECT_NEAR(d.carleson_factor, 1.2065773, 1e-5);
  // |psi~| / majorant peaks at 1 on the diagonal
  EXPECT_NEAR(r.estimate, d.carleson_factor, 1e-9);
}

TEST(Combo, ScaleInvariance) {
  Params p = default_params();
  auto k = make_cancellative(1, 1, 0.5, 0.5);
  QuadratureSpec s;
  ComboDetail a, b;
  check_carleson_combo(k, p, standard_cube(0, {0}), ComboMode::holder, s, 1000, 2, Slot::first, {}, &a);
  check_carleson_combo(k, p, standard_cube(3, {5}), ComboMode::holder, s, 1000, 2, Slot::first, {}, &b);
  EXPECT_NEAR(a.carleson_factor, b.carleson_factor, 0.05 * a.carleson_factor);
}

TEST(Combo, ZeroKernelGivesZero) {
  auto r = check_carleson_combo(make_zero(1, 1, 0.5, 0.5), default_params(), standard_cube(0, {0}),
                                ComboMode::size, {}, 1000);
  EXPECT_EQ(r.estimate, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Combo, SizeOnlyDiverges) {
  EXPECT_THROW(check_carleson_combo(make_size_only(1, 1, 0.5, 0.5), default_params(), standard_cube(0, {0}),
                                    ComboMode::size, {}, 1000),
               NumericError);
}

TEST(Combo, NonTensorRejected) {
  Kernel k = make_cancellative(1, 1, 0.5, 0.5);
  k.tensor_parts.reset();
  EXPECT_THROW(check_carleson_combo(k, default_params(), standard_cube(0, {0}), ComboMode::size, {}, 1000),
               ConfigError);
}
