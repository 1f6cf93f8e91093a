#pragma once
// Standard and randomly shifted dyadic grids, cube geometry in the sup-norm,
// goodness, Whitney regions, Schur coefficients and the dyadic strong maximal
// function.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace glstar {

/// A dyadic grid in R^dim truncated to levels [j_min, j_max]. The corner of a
/// level-j cube with index k is 2^-j k + sum_{j < i <= j_max} 2^-i beta_i, so
/// every corner is a multiple of 2^-j_max and is stored exactly.
struct ShiftedGrid {
  int dim = 1;
  int j_min = 0;
  int j_max = 0;
  std::uint64_t seed = 0;
  std::uint64_t id = 0;
  bool standard = true;
  std::vector<std::vector<std::uint8_t>> bits;  ///< bits[j - j_min][axis]
  std::vector<std::vector<double>> shifts;      ///< shifts[j - j_min][axis]

  static ShiftedGrid standard_grid(int dim, int j_min, int j_max) {
    ShiftedGrid g;
    g.dim = dim;
    g.j_min = j_min;
    g.j_max = j_max;
    g.bits.assign(j_max - j_min + 1, std::vector<std::uint8_t>(dim, 0));
    g.finish();
    return g;
  }

  /// Independent fair bits per level and axis from the stream (seed, stream).
  static ShiftedGrid random(int dim, int j_min, int j_max, std::uint64_t seed,
                            std::uint64_t stream = 0) {
    ShiftedGrid g;
    g.dim = dim;
    g.j_min = j_min;
    g.j_max = j_max;
    g.seed = seed;
    g.standard = false;
    auto rng = rng_stream(seed, stream);
    g.bits.assign(j_max - j_min + 1, std::vector<std::uint8_t>(dim, 0));
    for (auto& level : g.bits)
      for (auto& b : level) b = static_cast<std::uint8_t>(rng() >> 63);
    g.id = (seed * 0x9e3779b97f4a7c15ULL) ^ (stream + 1);
    g.finish();
    return g;
  }

  /// Grid with explicitly given bits (bits[j - j_min][axis]).
  static ShiftedGrid from_bits(int dim, int j_min, int j_max,
                               std::vector<std::vector<std::uint8_t>> b, std::uint64_t id) {
    if (static_cast<int>(b.size()) != j_max - j_min + 1) throw ConfigError("bit table size mismatch");
    ShiftedGrid g;
    g.dim = dim;
    g.j_min = j_min;
    g.j_max = j_max;
    g.standard = false;
    g.bits = std::move(b);
    g.id = id;
    g.finish();
    return g;
  }

  bool has_level(int j) const { return j >= j_min && j <= j_max; }

  double shift(int j, int axis) const {
    if (!has_level(j)) throw ConfigError("level " + std::to_string(j) + " outside grid truncation");
    return shifts[j - j_min][axis];
  }

  void finish() {
    if (j_max < j_min) throw ConfigError("grid requires j_min <= j_max");
    shifts.assign(j_max - j_min + 1, std::vector<double>(dim, 0.0));
    for (int a = 0; a < dim; ++a) {
      double acc = 0.0;
      for (int j = j_max; j >= j_min; --j) {
        shifts[j - j_min][a] = acc;
        acc += bits[j - j_min][a] ? std::ldexp(1.0, -j) : 0.0;
      }
    }
    if (standard) id = 0;
  }
};

struct DyadicCube {
  int dim = 1;
  int level = 0;
  std::vector<std::int64_t> index;
  std::uint64_t grid_id = 0;
  std::vector<double> corner;

  double side() const { return std::ldexp(1.0, -level); }
  double volume() const { return std::pow(side(), dim); }
  double lo(int a) const { return corner[a]; }
  double hi(int a) const { return corner[a] + side(); }
  bool operator==(const DyadicCube& o) const {
    return dim == o.dim && level == o.level && index == o.index && grid_id == o.grid_id;
  }
  bool contains(const DyadicCube& o) const {
    for (int a = 0; a < dim; ++a)
      if (o.lo(a) < lo(a) || o.hi(a) > hi(a)) return false;
    return true;
  }
  bool contains_point(const std::vector<double>& x) const {
    for (int a = 0; a < dim; ++a)
      if (x[a] < lo(a) || x[a] >= hi(a)) return false;
    return true;
  }
};

inline DyadicCube make_cube(const ShiftedGrid& g, int level, std::vector<std::int64_t> index) {
  if (static_cast<int>(index.size()) != g.dim) throw ConfigError("cube index dimension mismatch");
  DyadicCube c;
  c.dim = g.dim;
  c.level = level;
  c.grid_id = g.id;
  c.corner.resize(g.dim);
  for (int a = 0; a < g.dim; ++a)
    c.corner[a] = std::ldexp(static_cast<double>(index[a]), -level) + g.shift(level, a);
  c.index = std::move(index);
  return c;
}

/// Standard (unshifted) cube of a standalone 1D or nD lattice.
inline DyadicCube standard_cube(int level, std::vector<std::int64_t> index) {
  DyadicCube c;
  c.dim = static_cast<int>(index.size());
  c.level = level;
  c.grid_id = 0;
  for (auto k : index) c.corner.push_back(std::ldexp(static_cast<double>(k), -level));
  c.index = std::move(index);
  return c;
}

inline DyadicCube cube_containing(const ShiftedGrid& g, int level, const std::vector<double>& x) {
  std::vector<std::int64_t> k(g.dim);
  for (int a = 0; a < g.dim; ++a)
    k[a] = static_cast<std::int64_t>(std::floor(std::ldexp(x[a] - g.shift(level, a), level)));
  return make_cube(g, level, k);
}

/// The k-th generation ancestor of I in grid g.
inline DyadicCube ancestor(const DyadicCube& I, int k, const ShiftedGrid& g) {
  if (k < 0) throw ConfigError("ancestor generation must be >= 0");
  if (k == 0) return I;
  int j = I.level - k;
  if (!g.has_level(j)) throw ConfigError("ancestor level outside grid truncation");
  return cube_containing(g, j, I.corner);
}

inline std::vector<DyadicCube> children(const DyadicCube& I, const ShiftedGrid& g) {
  std::vector<DyadicCube> out;
  int d = I.dim;
  for (int mask = 0; mask < (1 << d); ++mask) {
    std::vector<double> p(I.corner);
    for (int a = 0; a < d; ++a)
      if (mask & (1 << (d - 1 - a))) p[a] += 0.5 * I.side();
    out.push_back(cube_containing(g, I.level + 1, p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distances

inline double set_distance(const DyadicCube& a, const DyadicCube& b) {
  if (a.dim != b.dim) throw ConfigError("dimension mismatch");
  double d = 0.0;
  for (int i = 0; i < a.dim; ++i) {
    double gap = std::max({b.lo(i) - a.hi(i), a.lo(i) - b.hi(i), 0.0});
    d = std::max(d, gap);
  }
  return d;
}

inline double long_distance(const DyadicCube& a, const DyadicCube& b) {
  return a.side() + b.side() + set_distance(a, b);
}

/// Schur coefficient l1^(a/2) l2^(a/2) / D^(n+a) * |I1|^(1/2) |I2|^(1/2).
inline double schur_coeff(const DyadicCube& a, const DyadicCube& b, double alpha) {
  if (a.dim != b.dim) throw ConfigError("dimension mismatch");
  double D = long_distance(a, b);
  return std::pow(a.side() * b.side(), alpha / 2.0) / std::pow(D, a.dim + alpha) *
         std::sqrt(a.volume() * b.volume());
}

/// Sup-norm distance from the closed cube I to the boundary of J; zero when
/// the cubes overlap without I being inside J.
inline double boundary_distance(const DyadicCube& I, const DyadicCube& J) {
  if (J.contains(I)) {
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < I.dim; ++a) d = std::min({d, I.lo(a) - J.lo(a), J.hi(a) - I.hi(a)});
    return d;
  }
  return set_distance(I, J);
}

// ---------------------------------------------------------------------------
// Goodness

/// True iff no cube J of the truncated grid with l(J) >= 2^r l(I) has
/// dist(I, dJ) <= l(I)^gamma l(J)^(1-gamma). Candidates at each qualifying
/// level are the ancestor of I and its neighbours.
inline bool is_good(const DyadicCube& I, const ShiftedGrid& g, int r, double gamma) {
  if (I.dim != g.dim) throw ConfigError("dimension mismatch");
  if (I.grid_id != g.id) throw ConfigError("cube does not belong to this grid");
  if (!g.has_level(I.level)) throw ConfigError("insufficient scale range");
  double lI = I.side();
  for (int jJ = I.level - r; jJ >= g.j_min; --jJ) {
    DyadicCube A = ancestor(I, I.level - jJ, g);
    double lJ = A.side();
    double threshold = std::pow(lI, gamma) * std::pow(lJ, 1.0 - gamma);
    int d = g.dim;
    int combos = 1;
    for (int a = 0; a < d; ++a) combos *= 3;
    for (int c = 0; c < combos; ++c) {
      std::vector<std::int64_t> k(A.index);
      int rem = c;
      for (int a = 0; a < d; ++a) {
        k[a] += rem % 3 - 1;
        rem /= 3;
      }
      DyadicCube J = make_cube(g, jJ, k);
      if (boundary_distance(I, J) <= threshold) return false;
    }
  }
  return true;
}

inline bool is_good(const DyadicCube& I, const ShiftedGrid& g, const Params& p, int factor = 0) {
  return is_good(I, g, p.r, factor == 0 ? p.gamma_n : p.gamma_m);
}

struct PiGoodEstimate {
  double estimate = 0.0;
  double ci_halfwidth = 0.0;
  int trials = 0;
  int good = 0;
  int octaves = 0;  ///< coarser levels present above the tested cube
};

struct PiGoodOptions {
  int octaves = 12;                    ///< grid truncation above the cube
  int finer_bits = 4;                  ///< levels finer than the cube carrying shift bits
  std::vector<std::int64_t> base{};    ///< base cube index (defaults to the origin cube)
  int factor = 0;                      ///< 0 uses (n, gamma_n), 1 uses (m, gamma_m)
};

/// The shifted grid used for trial `trial` of estimate_pi_good.
inline ShiftedGrid pi_good_grid(int dim, int level, const PiGoodOptions& o, std::uint64_t seed,
                                std::uint64_t trial) {
  return ShiftedGrid::random(dim, level - o.octaves, level + o.finer_bits, seed, trial);
}

/// Monte-Carlo frequency of is_good(I + beta) over independent shift draws,
/// with a 95% normal-approximation half-width.
inline PiGoodEstimate estimate_pi_good(const Params& p, int trials, int level_of_I,
                                       std::uint64_t seed, const PiGoodOptions& o = {}) {
  if (trials < 100) throw ConfigError("estimate_pi_good needs at least 100 trials");
  int dim = o.factor == 0 ? p.n : p.m;
  std::vector<std::int64_t> base = o.base.empty() ? std::vector<std::int64_t>(dim, 0) : o.base;
  std::vector<std::uint8_t> good(trials, 0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    ShiftedGrid g = pi_good_grid(dim, level_of_I, o, seed, t);
    good[t] = is_good(make_cube(g, level_of_I, base), g, p, o.factor) ? 1 : 0;
  });
  PiGoodEstimate e;
  e.trials = trials;
  e.octaves = o.octaves;
  for (auto v : good) e.good += v;
  e.estimate = static_cast<double>(e.good) / trials;
  e.ci_halfwidth = 1.96 * std::sqrt(e.estimate * (1.0 - e.estimate) / trials);
  return e;
}

/// Exact probability of goodness for a cube with `octaves` coarser levels,
/// obtained by enumerating every pattern of the bits that position the cube
/// inside its ancestors (feasible for dim * octaves <= 24).
inline double exhaustive_pi_good(int dim, int r, double gamma, int octaves) {
  int nbits = dim * octaves;
  if (nbits > 24) throw ConfigError("exhaustive enumeration limited to 24 bits");
  const int level = 0;
  std::int64_t good = 0, total = std::int64_t(1) << nbits;
  for (std::int64_t pattern = 0; pattern < total; ++pattern) {
    std::vector<std::vector<std::uint8_t>> b(octaves + 1, std::vector<std::uint8_t>(dim, 0));
    for (int i = 0; i < nbits; ++i) b[1 + i / dim][i % dim] = (pattern >> i) & 1;
    // bits indexed from j_min = -octaves; level index 0 (j = j_min) is unused
    ShiftedGrid g = ShiftedGrid::from_bits(dim, level - octaves, level, b, 1);
    if (is_good(make_cube(g, level, std::vector<std::int64_t>(dim, 0)), g, r, gamma)) ++good;
  }
  return static_cast<double>(good) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Whitney regions and Carleson boxes

struct WhitneyRegion {
  DyadicCube cube;
  double t_lo() const { return cube.side() / 2; }
  double t_hi() const { return cube.side(); }
};

struct CarlesonBox {
  DyadicCube cube;
  bool contains(const WhitneyRegion& w) const {
    return cube.contains(w.cube) && w.t_hi() <= cube.side();
  }
};

/// A box of the upper half-space: x in [lo, hi), t in (t0, t1).
struct HalfspaceBox {
  std::vector<double> lo, hi;
  double t0 = 0.0, t1 = 0.0;
  double measure() const {
    double v = t1 - t0;
    for (std::size_t a = 0; a < lo.size(); ++a) v *= hi[a] - lo[a];
    return v;
  }
};

/// Lebesgue measure (dx dt) of W_I intersected with B.
inline double whitney_overlap(const WhitneyRegion& w, const HalfspaceBox& B) {
  double v = std::max(0.0, std::min(w.t_hi(), B.t1) - std::max(w.t_lo(), B.t0));
  for (int a = 0; a < w.cube.dim && v > 0; ++a)
    v *= std::max(0.0, std::min(w.cube.hi(a), B.hi[a]) - std::max(w.cube.lo(a), B.lo[a]));
  return v;
}

/// All grid cubes at `level` meeting the box [lo, hi).
inline std::vector<DyadicCube> cubes_meeting(const ShiftedGrid& g, int level,
                                             const std::vector<double>& lo,
                                             const std::vector<double>& hi) {
  int d = g.dim;
  std::vector<std::int64_t> k0(d), k1(d);
  for (int a = 0; a < d; ++a) {
    double s = g.shift(level, a);
    k0[a] = static_cast<std::int64_t>(std::floor(std::ldexp(lo[a] - s, level)));
    k1[a] = static_cast<std::int64_t>(std::ceil(std::ldexp(hi[a] - s, level))) - 1;
  }
  std::vector<DyadicCube> out;
  std::vector<std::int64_t> k(k0);
  for (;;) {
    out.push_back(make_cube(g, level, k));
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++k[a] <= k1[a]) break;
      k[a] = k0[a];
    }
    if (a < 0) break;
  }
  return out;
}

/// Sum over every grid cube of |W_I cap B|, enumerated level by level.
inline double whitney_partition_sum(const ShiftedGrid& g, const HalfspaceBox& B) {
  std::vector<double> parts;
  for (int j = g.j_min; j <= g.j_max; ++j) {
    double l = std::ldexp(1.0, -j);
    if (l <= B.t0 || l / 2 >= B.t1) continue;
    for (auto& c : cubes_meeting(g, j, B.lo, B.hi)) parts.push_back(whitney_overlap({c}, B));
  }
  return pairwise_sum(parts);
}

// ---------------------------------------------------------------------------
// Dyadic strong maximal function

struct GridPair {
  ShiftedGrid first;   ///< grid on R^n
  ShiftedGrid second;  ///< grid on R^m
};

namespace detail {

/// Summed-area table over a dense row-major array with the given extents.
inline std::vector<double> prefix_sums(const std::vector<double>& v,
                                       const std::vector<std::int64_t>& ext) {
  int d = static_cast<int>(ext.size());
  std::vector<std::int64_t> pe(d);
  for (int a = 0; a < d; ++a) pe[a] = ext[a] + 1;
  std::size_t total = 1;
  for (auto e : pe) total *= static_cast<std::size_t>(e);
  std::vector<double> S(total, 0.0);
  std::vector<std::size_t> stride(d, 1), vstride(d, 1);
  for (int a = d - 2; a >= 0; --a) {
    stride[a] = stride[a + 1] * static_cast<std::size_t>(pe[a + 1]);
    vstride[a] = vstride[a + 1] * static_cast<std::size_t>(ext[a + 1]);
  }
  std::vector<std::int64_t> idx(d, 0);
  std::size_t n = v.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t o = 0;
    for (int a = 0; a < d; ++a) o += static_cast<std::size_t>(idx[a] + 1) * stride[a];
    S[o] = v[c];
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < ext[a]) break;
      idx[a] = 0;
    }
  }
  for (int a = 0; a < d; ++a) {
    for (std::size_t o = 0; o < total; ++o) {
      std::size_t coord = (o / stride[a]) % static_cast<std::size_t>(pe[a]);
      if (coord > 0) S[o] += S[o - stride[a]];
    }
  }
  return S;
}

inline double box_sum(const std::vector<double>& S, const std::vector<std::int64_t>& ext,
                      const std::vector<std::int64_t>& lo, const std::vector<std::int64_t>& hi) {
  int d = static_cast<int>(ext.size());
  std::vector<std::size_t> stride(d, 1);
  for (int a = d - 2; a >= 0; --a) stride[a] = stride[a + 1] * static_cast<std::size_t>(ext[a + 1] + 1);
  double s = 0.0;
  for (int mask = 0; mask < (1 << d); ++mask) {
    std::size_t o = 0;
    int sign = 1;
    for (int a = 0; a < d; ++a) {
      bool low = mask & (1 << a);
      o += static_cast<std::size_t>(low ? lo[a] : hi[a]) * stride[a];
      if (low) sign = -sign;
    }
    s += sign * S[o];
  }
  return s;
}

inline void check_lattice(const ShiftedGrid& g, int level) {
  if (g.j_max > level)
    throw ConfigError("grid carries shift bits finer than the step lattice");
}

}  // namespace detail

/// Dyadic strong maximal function of a nonnegative step function on
/// R^(n+m): the supremum over grid rectangles I x J (levels down to the step
/// lattice) containing x of the average of f. The result lives on the union
/// of coarsest-level rectangles meeting the support, with tail 0.
inline StepFunction strong_maximal_dyadic(const StepFunction& f, const GridPair& gp) {
  int n = gp.first.dim, m = gp.second.dim;
  if (f.dim != n + m) throw ConfigError("step function dimension must equal n + m");
  if (f.tail != 0.0) throw ConfigError("maximal function requires tail 0");
  for (double v : f.values)
    if (v < 0) throw ConfigError("maximal function requires a nonnegative function");
  detail::check_lattice(gp.first, f.level);
  detail::check_lattice(gp.second, f.level);
  int L = f.level;
  double h = f.side();
  int d = f.dim;
  auto grid_of = [&](int a) -> const ShiftedGrid& { return a < n ? gp.first : gp.second; };
  auto axis_of = [&](int a) { return a < n ? a : a - n; };
  // output box: union of coarsest cubes meeting the support box
  std::vector<double> lo(d);
  std::vector<std::int64_t> ext(d), off(d);
  for (int a = 0; a < d; ++a) {
    const ShiftedGrid& g = grid_of(a);
    double s = g.shift(g.j_min, axis_of(a));
    double side = std::ldexp(1.0, -g.j_min);
    double l = s + side * std::floor((f.lo[a] - s) / side);
    double u = s + side * std::ceil((f.hi(a) - s) / side);
    lo[a] = l;
    ext[a] = static_cast<std::int64_t>(std::llround((u - l) / h));
    off[a] = static_cast<std::int64_t>(std::llround((f.lo[a] - l) / h));
  }
  StepFunction out(L, lo, ext, 0.0);
  std::vector<double> g(out.cell_count(), 0.0);
  {
    std::vector<std::int64_t> idx(d, 0);
    for (std::size_t c = 0; c < f.values.size(); ++c) {
      std::vector<std::int64_t> o(d);
      for (int a = 0; a < d; ++a) o[a] = idx[a] + off[a];
      g[out.offset(o)] = f.values[c];
      for (int a = d - 1; a >= 0; --a) {
        if (++idx[a] < f.counts[a]) break;
        idx[a] = 0;
      }
    }
  }
  auto S = detail::prefix_sums(g, ext);
  std::vector<double>& M = out.values;
  int j1lo = gp.first.j_min, j1hi = std::min(gp.first.j_max, L);
  int j2lo = gp.second.j_min, j2hi = std::min(gp.second.j_max, L);
  // per axis and level: start offset (in cells) of the grid cube containing each cell
  auto starts = [&](int a, int j) {
    const ShiftedGrid& gr = grid_of(a);
    std::int64_t block = std::int64_t(1) << (L - j);
    double s = gr.shift(j, axis_of(a));
    std::int64_t phase = std::llround((s - lo[a]) / h);
    std::vector<std::int64_t> st(ext[a]);
    for (std::int64_t i = 0; i < ext[a]; ++i) {
      std::int64_t rel = i - phase;
      std::int64_t q = rel >= 0 ? rel / block : -((-rel + block - 1) / block);
      st[i] = phase + q * block;
    }
    return st;
  };
  // the lattice cells themselves are exact candidates when both grids reach level L
  bool cells_are_rectangles = j1hi == L && j2hi == L;
  if (cells_are_rectangles) M = g;
  for (int j1 = j1lo; j1 <= j1hi; ++j1) {
    for (int j2 = j2lo; j2 <= j2hi; ++j2) {
      if (cells_are_rectangles && j1 == L && j2 == L) continue;
      std::vector<std::vector<std::int64_t>> st(d);
      std::vector<std::int64_t> block(d);
      double cells = 1.0;
      for (int a = 0; a < d; ++a) {
        int j = a < n ? j1 : j2;
        st[a] = starts(a, j);
        block[a] = std::int64_t(1) << (L - j);
        cells *= static_cast<double>(block[a]);
      }
      std::vector<std::int64_t> idx(d, 0), blo(d), bhi(d);
      for (std::size_t c = 0; c < M.size(); ++c) {
        for (int a = 0; a < d; ++a) {
          blo[a] = std::clamp<std::int64_t>(st[a][idx[a]], 0, ext[a]);
          bhi[a] = std::clamp<std::int64_t>(st[a][idx[a]] + block[a], 0, ext[a]);
        }
        double avg = detail::box_sum(S, ext, blo, bhi) / cells;
        if (avg > M[c]) M[c] = avg;
        for (int a = d - 1; a >= 0; --a) {
          if (++idx[a] < ext[a]) break;
          idx[a] = 0;
        }
      }
    }
  }
  return out;
}

}  // namespace glstar
