#include <gtest/gtest.h>

#include "glstar/dyadic.hpp"

using namespace glstar;

namespace {

DyadicCube interval(double a, double b) {
  int level = static_cast<int>(std::lround(-std::log2(b - a)));
  return standard_cube(level, {static_cast<std::int64_t>(std::llround(std::ldexp(a, level)))});
}

/// Goodness by scanning every cube in a wide window at every qualifying level.
bool brute_force_good(const DyadicCube& I, const ShiftedGrid& g, int r, double gamma) {
  for (int j = I.level - r; j >= g.j_min; --j) {
    double lJ = std::ldexp(1.0, -j);
    std::vector<double> lo(I.dim), hi(I.dim);
    for (int a = 0; a < I.dim; ++a) {
      lo[a] = I.lo(a) - 3 * lJ;
      hi[a] = I.hi(a) + 3 * lJ;
    }
    double thr = std::pow(I.side(), gamma) * std::pow(lJ, 1 - gamma);
    for (auto& J : cubes_meeting(g, j, lo, hi))
      if (boundary_distance(I, J) <= thr) return false;
  }
  return true;
}

}  // namespace

TEST(Distance, IntervalGap) { EXPECT_EQ(set_distance(interval(0, 1), interval(4, 6)), 3.0); }

TEST(Distance, Identity) { EXPECT_EQ(set_distance(interval(0, 1), interval(0, 1)), 0.0); }

TEST(Distance, SupNormOfGaps) {
  auto a = standard_cube(0, {0, 0}), b = standard_cube(0, {2, 5});
  EXPECT_EQ(set_distance(a, b), 4.0);
  EXPECT_THROW(set_distance(a, interval(0, 1)), ConfigError);
}

TEST(Distance, LongDistance) {
  EXPECT_EQ(long_distance(interval(0, 1), interval(4, 6)), 6.0);
  EXPECT_EQ(long_distance(interval(0, 1), interval(0, 1)), 2.0);
}

TEST(Distance, SymmetryOnRandomPairs) {
  auto rng = rng_stream(3, 0);
  std::uniform_int_distribution<int> L(-3, 5), K(-20, 20);
  for (int i = 0; i < 200; ++i) {
    auto a = standard_cube(L(rng), {K(rng), K(rng)});
    auto b = standard_cube(L(rng), {K(rng), K(rng)});
    EXPECT_EQ(long_distance(a, b), long_distance(b, a));
    EXPECT_EQ(schur_coeff(a, b, 0.5), schur_coeff(b, a, 0.5));
  }
}

TEST(Schur, DirectValues) {
  EXPECT_NEAR(schur_coeff(interval(0, 1), interval(0, 1), 0.5), std::pow(2.0, -1.5), 1e-15);
  EXPECT_NEAR(schur_coeff(interval(0, 1), interval(4, 6), 0.5), std::pow(2.0, 0.75) / std::pow(6.0, 1.5),
              1e-15);
  EXPECT_NEAR(schur_coeff(interval(0, 1), interval(4, 6), 0.5), 0.114431, 1e-6);
}

TEST(Grid, ShiftUsesOnlyFinerBits) {
  auto g = ShiftedGrid::random(2, -6, 4, 99);
  for (int j = g.j_min; j <= g.j_max; ++j)
    for (int a = 0; a < 2; ++a) {
      double s = 0.0;
      for (int i = j + 1; i <= g.j_max; ++i) s += g.bits[i - g.j_min][a] ? std::ldexp(1.0, -i) : 0.0;
      EXPECT_EQ(g.shift(j, a), s);
    }
}

TEST(Grid, AncestorContainsAndScales) {
  auto g = ShiftedGrid::random(2, -8, 6, 5);
  auto rng = rng_stream(5, 1);
  std::uniform_real_distribution<double> U(-10, 10);
  for (int i = 0; i < 100; ++i) {
    auto I = cube_containing(g, 4, {U(rng), U(rng)});
    for (int k = 1; k <= 12; ++k) {
      auto A = ancestor(I, k, g);
      EXPECT_TRUE(A.contains(I));
      EXPECT_EQ(A.side(), std::ldexp(I.side(), k));
    }
  }
}

TEST(Grid, ChildrenAreHalves) {
  auto g = ShiftedGrid::random(1, -4, 4, 8);
  auto I = make_cube(g, 0, {3});
  auto ch = children(I, g);
  ASSERT_EQ(ch.size(), 2u);
  EXPECT_EQ(ch[0].lo(0), I.lo(0));
  EXPECT_EQ(ch[1].lo(0), I.lo(0) + 0.5);
  EXPECT_EQ(ch[1].hi(0), I.hi(0));
}

TEST(Goodness, BadByUnitInterval) {
  auto g = ShiftedGrid::standard_grid(1, 0, 2);
  auto I = make_cube(g, 2, {1});
  EXPECT_EQ(I.lo(0), 0.25);
  EXPECT_LE(0.25, std::pow(0.25, 1.0 / 6.0));
  EXPECT_FALSE(is_good(I, g, 2, 1.0 / 6.0));
}

TEST(Goodness, VacuousWhenNoCoarseLevels) {
  auto g = ShiftedGrid::standard_grid(1, 1, 2);
  EXPECT_TRUE(is_good(make_cube(g, 2, {1}), g, 2, 1.0 / 6.0));
}

TEST(Goodness, OutsideGridIsError) {
  auto g = ShiftedGrid::standard_grid(1, 0, 2);
  auto I = standard_cube(5, {1});
  EXPECT_THROW(is_good(I, g, 2, 1.0 / 6.0), ConfigError);
}

TEST(Goodness, MatchesExhaustiveScan) {
  for (int trial = 0; trial < 300; ++trial) {
    auto g = ShiftedGrid::random(trial % 2 ? 2 : 1, -10, 3, 17, trial);
    std::vector<std::int64_t> k(g.dim, trial % 5);
    auto I = make_cube(g, 2, k);
    for (int r : {1, 2, 4, 8}) {
      for (double gamma : {1.0 / 6.0, 0.1, 0.45})
        EXPECT_EQ(is_good(I, g, r, gamma), brute_force_good(I, g, r, gamma));
    }
  }
}

TEST(Goodness, MonotoneInRadius) {
  for (int trial = 0; trial < 500; ++trial) {
    auto g = ShiftedGrid::random(1, -12, 2, 23, trial);
    auto I = make_cube(g, 0, {0});
    for (int r = 1; r < 12; ++r)
      if (is_good(I, g, r, 0.3)) EXPECT_TRUE(is_good(I, g, r + 1, 0.3));
  }
}

TEST(Goodness, FinerBitsMoveCubeRigidly) {
  for (int trial = 0; trial < 200; ++trial) {
    auto g = ShiftedGrid::random(1, -10, 4, 31, trial);
    auto h = g;
    for (int j = 1; j <= 4; ++j) h.bits[j - h.j_min][0] ^= 1;
    h.id = g.id;
    h.finish();
    auto I = make_cube(g, 0, {0}), J = make_cube(h, 0, {0});
    EXPECT_EQ(is_good(I, g, 3, 0.2), is_good(J, h, 3, 0.2));
  }
}

TEST(PiGood, ZeroAtRadiusTwo) {
  Params p = Params::make(1, 1, 0.5, 0.5, 3, 3, 2);
  auto e = estimate_pi_good(p, 400, 0, 7);
  EXPECT_EQ(e.estimate, 0.0);
  EXPECT_EQ(exhaustive_pi_good(1, 2, 1.0 / 6.0, 12), 0.0);
}

TEST(PiGood, MonteCarloAgreesWithEnumeration) {
  // gamma = 0.45 with r = 4 has a positive goodness probability
  PiGoodOptions o;
  o.octaves = 10;
  double exact = exhaustive_pi_good(1, 4, 0.45, 10);
  int good = 0, trials = 2000;
  for (int t = 0; t < trials; ++t) {
    auto g = pi_good_grid(1, 0, o, 4, t);
    good += is_good(make_cube(g, 0, {0}), g, 4, 0.45);
  }
  double est = static_cast<double>(good) / trials;
  double hw = 4.0 * std::sqrt(exact * (1 - exact) / trials) + 1e-12;
  EXPECT_GT(exact, 0.0);
  EXPECT_NEAR(est, exact, hw);
}

TEST(PiGood, BaseCubeIndependence) {
  Params p = Params::make(1, 1, 0.5, 0.5, 3, 3, 8);
  p.gamma_n = 0.45;
  PiGoodOptions a, b;
  a.octaves = b.octaves = 11;
  b.base = {37};
  auto ea = estimate_pi_good(p, 1000, 0, 41, a);
  auto eb = estimate_pi_good(p, 1000, 0, 43, b);
  EXPECT_LE(std::abs(ea.estimate - eb.estimate),
            std::hypot(ea.ci_halfwidth, eb.ci_halfwidth) * 1.5 + 1e-12);
}

TEST(Whitney, PartitionMeasureIsExact) {
  auto rng = rng_stream(12, 0);
  std::uniform_real_distribution<double> U(-3, 3), T(0, 1);
  for (int i = 0; i < 50; ++i) {
    auto g = ShiftedGrid::random(2, -3, 9, 12, i);
    HalfspaceBox B;
    for (int a = 0; a < 2; ++a) {
      double x = U(rng), y = U(rng);
      B.lo.push_back(std::min(x, y));
      B.hi.push_back(std::max(x, y) + 0.01);
    }
    B.t0 = std::ldexp(1.0, -10) + T(rng) * 0.5;
    B.t1 = B.t0 + T(rng) * 7;
    EXPECT_NEAR(whitney_partition_sum(g, B), B.measure(), 1e-12 * B.measure());
  }
}

TEST(Whitney, CarlesonBoxContainsDescendants) {
  auto g = ShiftedGrid::random(1, -4, 6, 2);
  auto I = make_cube(g, 0, {1});
  CarlesonBox cb{I};
  for (auto& c : children(I, g)) {
    EXPECT_TRUE(cb.contains({c}));
    for (auto& cc : children(c, g)) EXPECT_TRUE(cb.contains({cc}));
  }
  EXPECT_TRUE(cb.contains({I}));
  EXPECT_FALSE(cb.contains({ancestor(I, 1, g)}));
}

TEST(Maximal, IndicatorOnItsSupport) {
  GridPair gp{ShiftedGrid::standard_grid(1, -1, 0), ShiftedGrid::standard_grid(1, -1, 0)};
  StepFunction f(0, {0.0, 0.0}, {1, 1});
  f.values = {1.0};
  auto M = strong_maximal_dyadic(f, gp);
  EXPECT_EQ(M({0.5, 0.5}), 1.0);
  EXPECT_EQ(M({1.5, 0.5}), 0.5);
  EXPECT_EQ(M({1.5, 1.5}), 0.25);
}

TEST(Maximal, DominatesFunction) {
  auto rng = rng_stream(21, 0);
  std::uniform_real_distribution<double> U(0, 1);
  GridPair gp{ShiftedGrid::random(1, -2, 3, 21, 1), ShiftedGrid::random(1, -2, 3, 21, 2)};
  StepFunction f(3, {0.0, 0.25}, {13, 9});
  for (auto& v : f.values) v = U(rng);
  auto M = strong_maximal_dyadic(f, gp);
  double h = f.side();
  for (std::int64_t i = 0; i < 13; ++i)
    for (std::int64_t k = 0; k < 9; ++k) {
      std::vector<double> x{(i + 0.5) * h, 0.25 + (k + 0.5) * h};
      EXPECT_GE(M(x), f(x));
    }
}

TEST(Maximal, NegativeInputRejected) {
  GridPair gp{ShiftedGrid::standard_grid(1, -1, 0), ShiftedGrid::standard_grid(1, -1, 0)};
  StepFunction f(0, {0.0, 0.0}, {1, 1});
  f.values = {-1.0};
  EXPECT_THROW(strong_maximal_dyadic(f, gp), ConfigError);
}
