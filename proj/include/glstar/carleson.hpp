#pragma once
// Bi-parameter Carleson coefficients C_IJ, packing sums over finite unions of
// dyadic rectangles, the packing test and the shadow sets of an open set.

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "core.hpp"
#include "dyadic.hpp"
#include "kernels.hpp"

namespace glstar {

// ---------------------------------------------------------------------------
// C_IJ

enum class CijRoute { closed_form, quadrature };

namespace detail {

/// Integral over R^d of (t / (t + |y|_inf))^p dy / t^d.
inline double weight_mass(int d, double p) {
  if (!(p > d)) throw NumericError("weight integral diverges: exponent " + std::to_string(p) +
                                   " must exceed the dimension " + std::to_string(d));
  return d * std::ldexp(1.0, d) * boost::math::beta(double(d), p - d);
}

/// Quadrature of one slot of C_IJ: over (x, t) in W_I and y in R of
/// |theta_t 1(y)|^2 (t / (t + |x - y|))^p dy/t dx dt/t, with theta_t 1 itself
/// obtained by quadrature of the factor.
inline double slot_by_quadrature(const KernelFactor& fac, const DyadicCube& I, double p,
                                 const QuadratureSpec& spec) {
  if (fac.dim != 1 || I.dim != 1) throw ConfigError("C_IJ quadrature is implemented for one-dimensional slots");
  if (fac.family == FactorFamily::zero) return 0.0;
  if (!(p > 1)) throw NumericError("weight integral diverges for n*lambda <= n");
  int q = spec.smooth_order();
  double l = I.side();
  Rule1D tr = rule_on_breaks({std::log(l / 2), std::log(l)}, q);
  Rule1D xr = rule_on_breaks({I.lo(0), I.hi(0)}, q);
  double eps = spec.truncation_eps * 1e-3;
  std::vector<double> terms;
  for (std::size_t a = 0; a < tr.size(); ++a) {
    double t = std::exp(tr.x[a]);
    double R = truncation_radius(fac.decay(), t, eps);
    // theta_t 1(y) = integral of psi_t(y - z) dz over z
    Rule1D ur = graded_rule(-R, R, {0.0}, t / 4, q);
    std::vector<double> kv(ur.size());
    for (std::size_t k = 0; k < ur.size(); ++k) kv[k] = ur.w[k] * fac.value1(t, ur.x[k]);
    double theta = pairwise_sum(kv);
    double Rw = t * std::pow(2.0 / ((p - 1) * eps), 1.0 / (p - 1));
    for (std::size_t b = 0; b < xr.size(); ++b) {
      double x = xr.x[b];
      Rule1D yr = graded_rule(x - Rw, x + Rw, {x}, t / 4, q);
      std::vector<double> wv(yr.size());
      for (std::size_t k = 0; k < yr.size(); ++k)
        wv[k] = yr.w[k] * theta * theta * std::pow(t / (t + std::abs(x - yr.x[k])), p) / t;
      terms.push_back(tr.w[a] * xr.w[b] * pairwise_sum(wv));
    }
  }
  return pairwise_sum(terms);
}

}  // namespace detail

/// C_IJ for a tensor convolution kernel. theta_t 1 is the constant product of
/// the factor means, so the closed form is
/// (m1 m2)^2 * w(n, n lambda1) |I| ln 2 * w(m, m lambda2) |J| ln 2.
inline double c_ij(const Kernel& k, const DyadicCube& I, const DyadicCube& J, const Params& p,
                   const QuadratureSpec& spec, CijRoute route = CijRoute::closed_form) {
  if (!k.is_tensor()) throw ConfigError("C_IJ is implemented for tensor kernels");
  if (I.dim != k.n || J.dim != k.m) throw ConfigError("cube dimensions do not match the kernel");
  double p1 = p.n * p.lambda1, p2 = p.m * p.lambda2;
  if (route == CijRoute::quadrature)
    return detail::slot_by_quadrature(k.first(), I, p1, spec) * detail::slot_by_quadrature(k.second(), J, p2, spec);
  double w1 = detail::weight_mass(k.n, p1), w2 = detail::weight_mass(k.m, p2);
  double theta = k.first().mean() * k.second().mean();
  return theta * theta * w1 * I.volume() * std::log(2.0) * w2 * J.volume() * std::log(2.0);
}

// ---------------------------------------------------------------------------
// Open sets made of dyadic rectangles

struct Rectangle {
  DyadicCube I;  ///< cube of the first grid
  DyadicCube J;  ///< cube of the second grid
  double volume() const { return I.volume() * J.volume(); }
};

/// Finite union of grid-pair rectangles, rasterised on the lattice of its
/// finest member.
class DyadicOpenSet {
 public:
  DyadicOpenSet(GridPair grids, std::vector<Rectangle> members) : grids_(std::move(grids)), members_(std::move(members)) {
    if (members_.empty()) throw ConfigError("open set needs at least one rectangle");
    int n = grids_.first.dim, m = grids_.second.dim, d = n + m;
    level_ = grids_.first.j_min;
    for (const auto& r : members_) {
      if (r.I.dim != n || r.J.dim != m) throw ConfigError("rectangle dimensions do not match the grid pair");
      if (r.I.grid_id != grids_.first.id || r.J.grid_id != grids_.second.id)
        throw ConfigError("rectangles must come from the open set's grid pair");
      level_ = std::max({level_, r.I.level, r.J.level});
    }
    std::vector<double> lo(d, std::numeric_limits<double>::infinity()), hi(d, -lo[0]);
    for (const auto& r : members_)
      for (int a = 0; a < d; ++a) {
        const DyadicCube& c = a < n ? r.I : r.J;
        lo[a] = std::min(lo[a], c.lo(a < n ? a : a - n));
        hi[a] = std::max(hi[a], c.hi(a < n ? a : a - n));
      }
    double h = std::ldexp(1.0, -level_);
    std::vector<std::int64_t> counts(d);
    for (int a = 0; a < d; ++a) counts[a] = std::llround((hi[a] - lo[a]) / h);
    indicator_ = StepFunction(level_, lo, counts);
    for (const auto& r : members_) paint(r);
    std::size_t on = 0;
    for (double v : indicator_.values) on += v > 0;
    measure_ = static_cast<double>(on) * indicator_.cell_volume();
    ext_ = indicator_.counts;
    sums_ = detail::prefix_sums(indicator_.values, ext_);
  }

  const GridPair& grids() const { return grids_; }
  const std::vector<Rectangle>& members() const { return members_; }
  const StepFunction& indicator() const { return indicator_; }
  double measure() const { return measure_; }
  int lattice_level() const { return level_; }

  /// Exact test of I x J being a subset of the union.
  bool contains(const DyadicCube& I, const DyadicCube& J) const {
    int n = I.dim, d = indicator_.dim;
    double h = indicator_.side();
    std::vector<std::int64_t> lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      const DyadicCube& c = a < n ? I : J;
      int ax = a < n ? a : a - n;
      double u0 = (c.lo(ax) - indicator_.lo[a]) / h, u1 = (c.hi(ax) - indicator_.lo[a]) / h;
      if (u0 < 0 || u1 > static_cast<double>(ext_[a])) return false;
      if (c.level > level_) {  // finer than the lattice: look at the containing cell
        lo[a] = static_cast<std::int64_t>(std::floor(u0));
        hi[a] = lo[a] + 1;
      } else {
        lo[a] = std::llround(u0);
        hi[a] = std::llround(u1);
      }
    }
    double cells = 1.0;
    for (int a = 0; a < d; ++a) cells *= static_cast<double>(hi[a] - lo[a]);
    return detail::box_sum(sums_, ext_, lo, hi) == cells;
  }

  /// Corner and far corner of the bounding box of the projection to one grid.
  std::pair<std::vector<double>, std::vector<double>> projection_box(bool first) const {
    int n = grids_.first.dim;
    int a0 = first ? 0 : n, a1 = first ? n : indicator_.dim;
    std::vector<double> lo, hi;
    for (int a = a0; a < a1; ++a) {
      lo.push_back(indicator_.lo[a]);
      hi.push_back(indicator_.hi(a));
    }
    return {lo, hi};
  }

 private:
  void paint(const Rectangle& r) {
    int n = r.I.dim, d = indicator_.dim;
    double h = indicator_.side();
    std::vector<std::int64_t> lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      const DyadicCube& c = a < n ? r.I : r.J;
      int ax = a < n ? a : a - n;
      lo[a] = std::llround((c.lo(ax) - indicator_.lo[a]) / h);
      hi[a] = std::llround((c.hi(ax) - indicator_.lo[a]) / h);
    }
    std::vector<std::int64_t> idx(lo);
    for (;;) {
      indicator_.values[indicator_.offset(idx)] = 1.0;
      int a = d - 1;
      for (; a >= 0; --a) {
        if (++idx[a] < hi[a]) break;
        idx[a] = lo[a];
      }
      if (a < 0) break;
    }
  }

  GridPair grids_;
  std::vector<Rectangle> members_;
  int level_ = 0;
  StepFunction indicator_;
  double measure_ = 0.0;
  std::vector<std::int64_t> ext_;
  std::vector<double> sums_;
};

/// Union of `count` rectangles drawn with levels in [level_lo, level_hi] and
/// positions in the unit box of the grid pair.
inline DyadicOpenSet random_open_set(const GridPair& gp, int count, int level_lo, int level_hi,
                                     std::uint64_t seed, std::uint64_t stream = 0) {
  if (count < 1) throw ConfigError("random open set needs at least one rectangle");
  auto rng = rng_stream(seed, stream);
  std::uniform_int_distribution<int> lev(level_lo, level_hi);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  std::vector<Rectangle> members;
  for (int c = 0; c < count; ++c) {
    int j1 = lev(rng), j2 = lev(rng);
    std::vector<double> x1(gp.first.dim), x2(gp.second.dim);
    for (auto& v : x1) v = pos(rng);
    for (auto& v : x2) v = pos(rng);
    members.push_back({cube_containing(gp.first, j1, x1), cube_containing(gp.second, j2, x2)});
  }
  return DyadicOpenSet(gp, std::move(members));
}

// ---------------------------------------------------------------------------
// Packing sums

struct RectangleKey {
  int level1, level2;
  std::vector<std::int64_t> index1, index2;
  bool operator<(const RectangleKey& o) const {
    return std::tie(level1, level2, index1, index2) < std::tie(o.level1, o.level2, o.index1, o.index2);
  }
};

struct CarlesonReport {
  std::map<RectangleKey, double> values;  ///< C_IJ per rectangle inside the open set
  double total = 0.0;
  double measure = 0.0;
  double ratio = 0.0;
  int finest_level = 0;      ///< finest level enumerated in either slot
  double last_level = 0.0;   ///< contribution of rectangles touching the finest level
  double cap = std::numeric_limits<double>::infinity();
  bool pass = true;
};

/// Sum of C_IJ over every rectangle I x J inside the open set, with both
/// levels running from the grid's coarsest level down to
/// (finest member level + levels).
inline CarlesonReport carleson_sum(const Kernel& k, const DyadicOpenSet& omega, int levels, const Params& p,
                                   const QuadratureSpec& spec,
                                   double cap = std::numeric_limits<double>::infinity()) {
  if (levels < 1) throw ConfigError("carleson_sum needs levels >= 1");
  if (omega.measure() <= 0) throw ConfigError("empty open set");
  const GridPair& gp = omega.grids();
  int finest = omega.lattice_level() + levels;
  if (!gp.first.has_level(finest) || !gp.second.has_level(finest))
    throw ConfigError("grid truncation does not reach level " + std::to_string(finest));
  auto [lo1, hi1] = omega.projection_box(true);
  auto [lo2, hi2] = omega.projection_box(false);
  struct Pair { int j1, j2; };
  std::vector<Pair> pairs;
  for (int j1 = gp.first.j_min; j1 <= finest; ++j1)
    for (int j2 = gp.second.j_min; j2 <= finest; ++j2) pairs.push_back({j1, j2});
  std::vector<std::vector<std::pair<RectangleKey, double>>> found(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t q) {
    auto [j1, j2] = pairs[q];
    auto A = cubes_meeting(gp.first, j1, lo1, hi1);
    auto B = cubes_meeting(gp.second, j2, lo2, hi2);
    for (const auto& I : A)
      for (const auto& J : B)
        if (omega.contains(I, J)) found[q].push_back({{j1, j2, I.index, J.index}, c_ij(k, I, J, p, spec)});
  });
  CarlesonReport rep;
  rep.measure = omega.measure();
  rep.finest_level = finest;
  rep.cap = cap;
  std::vector<double> all, last;
  for (std::size_t q = 0; q < pairs.size(); ++q)
    for (auto& [key, v] : found[q]) {
      all.push_back(v);
      if (pairs[q].j1 == finest || pairs[q].j2 == finest) last.push_back(v);
      rep.values.emplace(std::move(key), v);
    }
  rep.total = pairwise_sum(all);
  rep.last_level = pairwise_sum(last);
  rep.ratio = rep.total / rep.measure;
  rep.pass = rep.ratio <= cap;
  return rep;
}

struct CarlesonCheck {
  bool pass = true;
  std::vector<CarlesonReport> reports;       ///< at the requested levels
  std::vector<CarlesonReport> refined;       ///< one extra level
  std::vector<double> growth;                ///< ratio(levels + 1) / ratio(levels) - 1
  std::vector<std::string> warnings;
};

/// Packing test: every ratio within the cap and changing by less than 10%
/// when one more level is added. An infinite cap passes unconditionally.
inline CarlesonCheck carleson_check(const Kernel& k, const std::vector<DyadicOpenSet>& omegas, int levels,
                                    double cap, const Params& p, const QuadratureSpec& spec) {
  if (omegas.empty()) throw ConfigError("carleson_check needs at least one open set");
  CarlesonCheck out;
  bool vacuous = std::isinf(cap);
  if (vacuous) out.warnings.push_back("infinite cap: the packing test is vacuous");
  for (const auto& om : omegas) {
    auto a = carleson_sum(k, om, levels, p, spec, cap);
    auto b = carleson_sum(k, om, levels + 1, p, spec, cap);
    double g = a.ratio > 0 ? b.ratio / a.ratio - 1.0 : (b.ratio > 0 ? INFINITY : 0.0);
    if (!vacuous && (!a.pass || !b.pass || !(g < 0.1))) out.pass = false;
    out.growth.push_back(g);
    out.reports.push_back(std::move(a));
    out.refined.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shadow sets

namespace detail {

/// Crops a 0/1 step function to the bounding box of its support, padded by
/// `pad[a]` cells on each side.
inline StepFunction crop_support(const StepFunction& f, const std::vector<std::int64_t>& pad) {
  int d = f.dim;
  std::vector<std::int64_t> lo(d, std::numeric_limits<std::int64_t>::max()), hi(d, -1);
  std::vector<std::int64_t> idx(d, 0);
  for (std::size_t c = 0; c < f.values.size(); ++c) {
    if (f.values[c] > 0)
      for (int a = 0; a < d; ++a) {
        lo[a] = std::min(lo[a], idx[a]);
        hi[a] = std::max(hi[a], idx[a] + 1);
      }
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < f.counts[a]) break;
      idx[a] = 0;
    }
  }
  if (hi[0] < 0) throw NumericError("shadow set is empty");
  std::vector<double> corner(d);
  std::vector<std::int64_t> counts(d);
  for (int a = 0; a < d; ++a) {
    corner[a] = f.lo[a] + static_cast<double>(lo[a] - pad[a]) * f.side();
    counts[a] = hi[a] - lo[a] + 2 * pad[a];
  }
  StepFunction out(f.level, corner, counts);
  std::vector<std::int64_t> j(d, 0);
  for (std::size_t c = 0; c < out.values.size(); ++c) {
    bool inside = true;
    std::vector<std::int64_t> src(d);
    for (int a = 0; a < d; ++a) {
      src[a] = j[a] - pad[a] + lo[a];
      inside = inside && src[a] >= 0 && src[a] < f.counts[a];
    }
    if (inside) out.values[c] = f.values[f.offset(src)];
    for (int a = d - 1; a >= 0; --a) {
      if (++j[a] < out.counts[a]) break;
      j[a] = 0;
    }
  }
  return out;
}

/// Maximal average of a planar step function over all lattice-aligned
/// rectangles containing each cell. O(N1^2 N2^2).
inline std::vector<double> lattice_strong_maximal_2d(const std::vector<double>& v, std::int64_t N1, std::int64_t N2) {
  auto S = prefix_sums(v, {N1, N2});
  const std::int64_t W = N2 + 1;
  auto mass = [&](std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    return S[b * W + d] - S[a * W + d] - S[b * W + c] + S[a * W + c];
  };
  std::vector<double> M(v.size(), 0.0), best(N1), run(N1);
  for (std::int64_t c = 0; c < N2; ++c) {
    for (std::int64_t d = c + 1; d <= N2; ++d) {
      double h = static_cast<double>(d - c);
      // best(i) = max over a <= i < b of mass / area
      std::fill(best.begin(), best.end(), 0.0);
      for (std::int64_t a = 0; a < N1; ++a) {
        // suffix max over b > i of the average of [a, b)
        double tail = 0.0;
        for (std::int64_t b = N1; b > a; --b) {
          tail = std::max(tail, mass(a, b, c, d) / (h * static_cast<double>(b - a)));
          run[b - 1] = tail;  // max over b' >= b of avg [a, b'), valid for i = b - 1
        }
        for (std::int64_t i = a; i < N1; ++i) best[i] = std::max(best[i], run[i]);
      }
      for (std::int64_t i = 0; i < N1; ++i)
        for (std::int64_t k = c; k < d; ++k) {
          double& slot = M[static_cast<std::size_t>(i * N2 + k)];
          slot = std::max(slot, best[i]);
        }
    }
  }
  return M;
}

}  // namespace detail

struct ShadowSets {
  StepFunction omega_tilde;  ///< indicator of {M_D 1_Omega > 1/2}
  StepFunction omega_hat;    ///< indicator of {M 1_Omega_tilde > c}
  double measure_omega = 0.0;
  double measure_tilde = 0.0;
  double measure_hat = 0.0;
};

inline double default_shadow_threshold(int n, int m) { return std::ldexp(1.0, -(n + m + 1)); }

/// Shadow sets of an open set. The dyadic maximal function uses the given
/// grid pair; the second one runs over every lattice-aligned rectangle and is
/// implemented for n = m = 1.
inline ShadowSets shadow_sets(const DyadicOpenSet& omega, const GridPair& gp, double c) {
  if (!(c > 0 && c < 1)) throw ConfigError("shadow threshold c must lie in (0,1)");
  if (gp.first.dim != 1 || gp.second.dim != 1)
    throw ConfigError("the lattice maximal function is implemented for n = m = 1");
  const StepFunction& ind = omega.indicator();
  int L = std::max({ind.level, gp.first.j_max, gp.second.j_max});
  // resample the indicator on the finer lattice if the grids carry finer bits
  StepFunction f = ind;
  if (L > ind.level) {
    std::int64_t r = std::int64_t(1) << (L - ind.level);
    f = StepFunction(L, ind.lo, {ind.counts[0] * r, ind.counts[1] * r});
    for (std::int64_t i = 0; i < f.counts[0]; ++i)
      for (std::int64_t k = 0; k < f.counts[1]; ++k)
        f.values[f.offset({i, k})] = ind.values[ind.offset({i / r, k / r})];
  }
  StepFunction md = strong_maximal_dyadic(f, gp);
  for (auto& v : md.values) v = v > 0.5 ? 1.0 : 0.0;
  // a rectangle reaching a cell at distance D beyond the support of width W has
  // average at most W / (W + D), so D < W (1/c - 1) bounds the second shadow
  StepFunction tight = detail::crop_support(md, {0, 0});
  std::vector<std::int64_t> pad(2);
  for (int a = 0; a < 2; ++a)
    pad[a] = static_cast<std::int64_t>(std::ceil(static_cast<double>(tight.counts[a]) * (1.0 / c - 1.0)));
  StepFunction tilde = detail::crop_support(md, pad);
  StepFunction hat = tilde;
  hat.values = detail::lattice_strong_maximal_2d(tilde.values, tilde.counts[0], tilde.counts[1]);
  for (auto& v : hat.values) v = v > c ? 1.0 : 0.0;
  ShadowSets out;
  auto measure = [](const StepFunction& s) { return pairwise_sum(s.values) * s.cell_volume(); };
  out.measure_omega = omega.measure();
  out.measure_tilde = measure(tilde);
  out.measure_hat = measure(hat);
  out.omega_tilde = std::move(tilde);
  out.omega_hat = std::move(hat);
  return out;
}

}  // namespace glstar
