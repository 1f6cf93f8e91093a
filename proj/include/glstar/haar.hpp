#pragma once
// Haar functions, finite Haar systems on a top cube (one or two slots),
// partial pairings and the modified ancestor functions s_I^k.

#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "dyadic.hpp"

namespace glstar {

struct HaarIndex {
  DyadicCube cube;
  std::vector<int> eta;  ///< signature in {0,1}^dim; all zeros only for scaling members

  bool cancellative() const {
    for (int e : eta)
      if (e) return true;
    return false;
  }
};

namespace detail {
using HaarKey = std::tuple<int, std::vector<std::int64_t>, std::vector<int>>;
inline HaarKey key_of(const HaarIndex& h) { return {h.cube.level, h.cube.index, h.eta}; }

/// Sign of h^eta on the child selected by `mask` (bit (d-1-a) set = upper half on axis a).
inline double child_sign(const std::vector<int>& eta, int mask) {
  int d = static_cast<int>(eta.size());
  double s = 1.0;
  for (int a = 0; a < d; ++a)
    if (eta[a] && (mask & (1 << (d - 1 - a)))) s = -s;
  return s;
}

inline std::vector<std::vector<int>> cancellative_signatures(int d) {
  std::vector<std::vector<int>> out;
  for (int e = 1; e < (1 << d); ++e) {
    std::vector<int> eta(d);
    for (int a = 0; a < d; ++a) eta[a] = (e >> (d - 1 - a)) & 1;
    out.push_back(eta);
  }
  return out;
}
}  // namespace detail

/// h_I^eta as a step function on the children of I.
inline StepFunction haar_function(const HaarIndex& idx) {
  const DyadicCube& I = idx.cube;
  int d = I.dim;
  StepFunction f(I.level + 1, I.corner, std::vector<std::int64_t>(d, 2), 0.0);
  double amp = 1.0 / std::sqrt(I.volume());
  for (int mask = 0; mask < (1 << d); ++mask) f.values[mask] = amp * detail::child_sign(idx.eta, mask);
  return f;
}

/// Top cube(s) and finest level of a finite Haar system. A single-slot system
/// leaves `second` empty.
struct HaarDomain {
  ShiftedGrid grid_first;
  DyadicCube top_first;
  std::optional<ShiftedGrid> grid_second;
  std::optional<DyadicCube> top_second;
  int L = 0;

  int dim_first() const { return top_first.dim; }
  int dim_second() const { return top_second ? top_second->dim : 0; }
  std::int64_t cells_first() const {
    return std::int64_t(1) << ((L - top_first.level) * dim_first());
  }
  std::int64_t cells_second() const {
    return top_second ? std::int64_t(1) << ((L - top_second->level) * dim_second()) : 1;
  }
  /// Lattice of the domain box at level L.
  StepFunction lattice() const {
    std::vector<double> lo(top_first.corner);
    std::vector<std::int64_t> counts(dim_first(), std::int64_t(1) << (L - top_first.level));
    if (top_second) {
      lo.insert(lo.end(), top_second->corner.begin(), top_second->corner.end());
      for (int a = 0; a < dim_second(); ++a) counts.push_back(std::int64_t(1) << (L - top_second->level));
    }
    return StepFunction(L, lo, counts, 0.0);
  }
};

struct HaarEntry {
  HaarIndex first;
  std::optional<HaarIndex> second;
  double coef = 0.0;
};

struct HaarExpansion {
  HaarDomain domain;
  std::vector<HaarEntry> entries;

  double coefficient(const HaarIndex& a, const std::optional<HaarIndex>& b = std::nullopt) const {
    auto ka = detail::key_of(a);
    for (const auto& e : entries) {
      if (detail::key_of(e.first) != ka) continue;
      if (!b && !e.second) return e.coef;
      if (b && e.second && detail::key_of(*e.second) == detail::key_of(*b)) return e.coef;
    }
    return 0.0;
  }

  double sum_of_squares() const {
    std::vector<double> sq;
    for (auto& e : entries) sq.push_back(e.coef * e.coef);
    return pairwise_sum(sq);
  }
};

namespace detail {

/// Offset (in level-L cells, row-major) of the cell with the given corner in
/// the lattice of `top`.
inline std::size_t slot_offset(const DyadicCube& top, int L, const std::vector<double>& corner) {
  double h = std::ldexp(1.0, -L);
  std::int64_t per = std::int64_t(1) << (L - top.level);
  std::size_t o = 0;
  for (int a = 0; a < top.dim; ++a)
    o = o * static_cast<std::size_t>(per) +
        static_cast<std::size_t>(std::llround((corner[a] - top.corner[a]) / h));
  return o;
}

/// Haar analysis along one slot. `data[c]` is the vector (over the other
/// slot) of values on slot cell c; returns (index, vector) pairs with the
/// scaling member of the top cube first.
inline void analyze_slot(const ShiftedGrid& g, const DyadicCube& top, int L,
                         const std::vector<std::vector<double>>& data,
                         std::vector<std::pair<HaarIndex, std::vector<double>>>& out) {
  std::size_t K = data.empty() ? 0 : data[0].size();
  auto sigs = cancellative_signatures(top.dim);
  std::function<std::vector<double>(const DyadicCube&)> integral = [&](const DyadicCube& Q) {
    if (Q.level == L) {
      std::vector<double> s(data[slot_offset(top, L, Q.corner)]);
      for (auto& v : s) v *= Q.volume();
      return s;
    }
    auto ch = children(Q, g);
    std::vector<std::vector<double>> S;
    for (auto& c : ch) S.push_back(integral(c));
    double amp = 1.0 / std::sqrt(Q.volume());
    for (auto& eta : sigs) {
      std::vector<double> coef(K);
      std::vector<double> terms(ch.size());
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < ch.size(); ++c)
          terms[c] = child_sign(eta, static_cast<int>(c)) * S[c][k];
        coef[k] = pairwise_sum(terms) * amp;
      }
      out.push_back({HaarIndex{Q, eta}, std::move(coef)});
    }
    std::vector<double> tot(K);
    std::vector<double> terms(ch.size());
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t c = 0; c < ch.size(); ++c) terms[c] = S[c][k];
      tot[k] = pairwise_sum(terms);
    }
    return tot;
  };
  std::size_t first = out.size();
  auto S = integral(top);
  for (auto& v : S) v /= std::sqrt(top.volume());
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(first),
             {HaarIndex{top, std::vector<int>(top.dim, 0)}, S});
}

/// Inverse of analyze_slot: coefficient vectors keyed by index -> values per cell.
inline std::vector<std::vector<double>> synthesize_slot(
    const ShiftedGrid& g, const DyadicCube& top, int L, std::size_t K,
    const std::map<HaarKey, std::vector<double>>& coef) {
  std::size_t cells = std::size_t(1) << ((L - top.level) * top.dim);
  std::vector<std::vector<double>> out(cells, std::vector<double>(K, 0.0));
  auto sigs = cancellative_signatures(top.dim);
  std::function<void(const DyadicCube&, const std::vector<double>&)> fill =
      [&](const DyadicCube& Q, const std::vector<double>& avg) {
        if (Q.level == L) {
          out[slot_offset(top, L, Q.corner)] = avg;
          return;
        }
        auto ch = children(Q, g);
        double amp = 1.0 / std::sqrt(Q.volume());
        std::vector<const std::vector<double>*> cs;
        for (auto& eta : sigs) {
          auto it = coef.find(HaarKey{Q.level, Q.index, eta});
          cs.push_back(it == coef.end() ? nullptr : &it->second);
        }
        for (std::size_t c = 0; c < ch.size(); ++c) {
          std::vector<double> v(avg);
          for (std::size_t s = 0; s < sigs.size(); ++s) {
            if (!cs[s]) continue;
            double sg = child_sign(sigs[s], static_cast<int>(c)) * amp;
            for (std::size_t k = 0; k < K; ++k) v[k] += sg * (*cs[s])[k];
          }
          fill(ch[c], v);
        }
      };
  std::vector<double> top_avg(K, 0.0);
  auto it = coef.find(HaarKey{top.level, top.index, std::vector<int>(top.dim, 0)});
  if (it != coef.end())
    for (std::size_t k = 0; k < K; ++k) top_avg[k] = it->second[k] / std::sqrt(top.volume());
  fill(top, top_avg);
  return out;
}

/// Values of f on the level-L lattice of the domain; throws when f has mass
/// outside the domain box.
inline StepFunction restrict_to_domain(const StepFunction& f, const HaarDomain& dom) {
  StepFunction lat = dom.lattice();
  if (f.dim != lat.dim) throw ConfigError("step function dimension does not match the domain");
  if (f.level > dom.L) throw ConfigError("step function finer than the expansion level");
  if (f.tail != 0.0) throw ConfigError("support leakage outside domain (nonzero tail)");
  double hf = f.side();
  for (int a = 0; a < f.dim; ++a) {
    double u = (f.lo[a] - lat.lo[a]) / lat.side();
    if (u != std::floor(u)) throw ConfigError("step lattice not aligned with the domain");
  }
  double mass_inside = 0.0, mass_total = 0.0;
  std::vector<std::int64_t> idx(f.dim, 0);
  for (std::size_t c = 0; c < f.values.size(); ++c) {
    std::vector<double> center(f.dim);
    for (int a = 0; a < f.dim; ++a) center[a] = f.lo[a] + (static_cast<double>(idx[a]) + 0.5) * hf;
    bool inside = true;
    for (int a = 0; a < f.dim; ++a)
      if (center[a] < lat.lo[a] || center[a] >= lat.hi(a)) inside = false;
    mass_total += std::abs(f.values[c]);
    if (inside) mass_inside += std::abs(f.values[c]);
    for (int a = f.dim - 1; a >= 0; --a) {
      if (++idx[a] < f.counts[a]) break;
      idx[a] = 0;
    }
  }
  if (mass_inside != mass_total) throw ConfigError("support leakage outside domain");
  std::fill(idx.begin(), idx.end(), 0);
  for (std::size_t c = 0; c < lat.values.size(); ++c) {
    std::vector<double> center(lat.dim);
    for (int a = 0; a < lat.dim; ++a)
      center[a] = lat.lo[a] + (static_cast<double>(idx[a]) + 0.5) * lat.side();
    lat.values[c] = f(center);
    for (int a = lat.dim - 1; a >= 0; --a) {
      if (++idx[a] < lat.counts[a]) break;
      idx[a] = 0;
    }
  }
  return lat;
}

}  // namespace detail

/// Haar coefficients of f on a finite system: all cancellative members below
/// the top cube(s) plus the top scaling members, in product form when the
/// domain has two slots.
inline HaarExpansion expand(const StepFunction& f, const HaarDomain& dom) {
  StepFunction lat = detail::restrict_to_domain(f, dom);
  std::size_t N1 = static_cast<std::size_t>(dom.cells_first());
  std::size_t N2 = static_cast<std::size_t>(dom.cells_second());
  std::vector<std::vector<double>> data(N1, std::vector<double>(N2));
  for (std::size_t i = 0; i < N1; ++i)
    for (std::size_t k = 0; k < N2; ++k) data[i][k] = lat.values[i * N2 + k];
  std::vector<std::pair<HaarIndex, std::vector<double>>> first;
  detail::analyze_slot(dom.grid_first, dom.top_first, dom.L, data, first);
  HaarExpansion e;
  e.domain = dom;
  for (auto& [a, vec] : first) {
    if (!dom.top_second) {
      e.entries.push_back({a, std::nullopt, vec[0]});
      continue;
    }
    std::vector<std::vector<double>> col(N2, std::vector<double>(1));
    for (std::size_t k = 0; k < N2; ++k) col[k][0] = vec[k];
    std::vector<std::pair<HaarIndex, std::vector<double>>> second;
    detail::analyze_slot(*dom.grid_second, *dom.top_second, dom.L, col, second);
    for (auto& [b, c] : second) e.entries.push_back({a, b, c[0]});
  }
  return e;
}

inline HaarExpansion expand(const StepFunction& f, const HaarDomain& dom, int L) {
  HaarDomain d = dom;
  d.L = L;
  return expand(f, d);
}

inline StepFunction reconstruct(const HaarExpansion& e) {
  const HaarDomain& dom = e.domain;
  std::size_t N2 = static_cast<std::size_t>(dom.cells_second());
  std::map<detail::HaarKey, std::vector<double>> first_coef;
  if (!dom.top_second) {
    for (auto& en : e.entries) first_coef[detail::key_of(en.first)] = {en.coef};
  } else {
    std::map<detail::HaarKey, std::map<detail::HaarKey, std::vector<double>>> grouped;
    for (auto& en : e.entries) grouped[detail::key_of(en.first)][detail::key_of(*en.second)] = {en.coef};
    for (auto& [ka, inner] : grouped) {
      auto cells = detail::synthesize_slot(*dom.grid_second, *dom.top_second, dom.L, 1, inner);
      std::vector<double> v(N2);
      for (std::size_t k = 0; k < N2; ++k) v[k] = cells[k][0];
      first_coef[ka] = std::move(v);
    }
  }
  auto cells = detail::synthesize_slot(dom.grid_first, dom.top_first, dom.L, N2, first_coef);
  StepFunction out = dom.lattice();
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t k = 0; k < N2; ++k) out.values[i * N2 + k] = cells[i][k];
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {
/// Length of [a0, a1) cap [b0, b1).
inline double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}
}  // namespace detail

/// f_J(y1) = integral of f(y1, y2) h_J(y2) dy2 for f on R^(n+m), computed
/// cell by cell from exact overlaps with the children of J.
inline StepFunction partial_pair(const StepFunction& f, const HaarIndex& J) {
  int m = J.cube.dim, n = f.dim - m;
  if (n < 1) throw ConfigError("partial_pair needs f on R^(n+m) with n >= 1");
  if (f.tail != 0.0) throw ConfigError("partial_pair requires tail 0");
  StepFunction hJ = haar_function(J);
  std::vector<double> lo(f.lo.begin(), f.lo.begin() + n);
  std::vector<std::int64_t> cn(f.counts.begin(), f.counts.begin() + n);
  StepFunction out(f.level, lo, cn, 0.0);
  std::size_t N2 = 1;
  for (int a = n; a < f.dim; ++a) N2 *= static_cast<std::size_t>(f.counts[a]);
  // weight of each second-slot cell: integral of h_J over it
  std::vector<double> wcell(N2, 0.0);
  double h = f.side(), hh = hJ.side();
  std::vector<std::int64_t> idx(m, 0);
  for (std::size_t k = 0; k < N2; ++k) {
    double w = 0.0;
    for (int mask = 0; mask < (1 << m); ++mask) {
      double vol = 1.0;
      for (int a = 0; a < m; ++a) {
        double c0 = f.lo[n + a] + static_cast<double>(idx[a]) * h;
        double q0 = J.cube.corner[a] + ((mask >> (m - 1 - a)) & 1) * hh;
        vol *= detail::overlap(c0, c0 + h, q0, q0 + hh);
      }
      w += vol * hJ.values[mask];
    }
    wcell[k] = w;
    for (int a = m - 1; a >= 0; --a) {
      if (++idx[a] < f.counts[n + a]) break;
      idx[a] = 0;
    }
  }
  std::vector<double> terms(N2);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    for (std::size_t k = 0; k < N2; ++k) terms[k] = f.values[i * N2 + k] * wcell[k];
    out.values[i] = pairwise_sum(terms);
  }
  return out;
}

/// Average of a step function (tail 0 outside its box) over a cube.
inline double average_over(const StepFunction& g, const DyadicCube& I) {
  if (g.dim != I.dim) throw ConfigError("dimension mismatch");
  double h = g.side();
  std::vector<double> terms;
  std::vector<std::int64_t> idx(g.dim, 0);
  double covered = 1.0;
  for (int a = 0; a < g.dim; ++a) covered *= detail::overlap(g.lo[a], g.hi(a), I.lo(a), I.hi(a));
  for (std::size_t c = 0; c < g.values.size(); ++c) {
    double vol = 1.0;
    for (int a = 0; a < g.dim; ++a) {
      double c0 = g.lo[a] + static_cast<double>(idx[a]) * h;
      vol *= detail::overlap(c0, c0 + h, I.lo(a), I.hi(a));
    }
    if (vol > 0) terms.push_back(vol * g.values[c]);
    for (int a = g.dim - 1; a >= 0; --a) {
      if (++idx[a] < g.counts[a]) break;
      idx[a] = 0;
    }
  }
  double outside = I.volume() - covered;
  return (pairwise_sum(terms) + g.tail * outside) / I.volume();
}

/// s_I^k: equals -<h>_{I^(k-1)} outside I^(k-1), plus h_{I^(k)} on the
/// siblings of I^(k-1); zero on I^(k-1). `eta` selects the ancestor Haar
/// function (all ones by default).
inline StepFunction s_function(const DyadicCube& I, int k, const ShiftedGrid& g,
                               std::vector<int> eta = {}) {
  if (k < 1) throw ConfigError("s_function requires k >= 1");
  if (!g.has_level(I.level - k)) throw ConfigError("k exceeds truncation");
  if (eta.empty()) eta.assign(I.dim, 1);
  DyadicCube top = ancestor(I, k, g);
  DyadicCube inner = ancestor(I, k - 1, g);
  StepFunction h = haar_function({top, eta});
  int d = I.dim;
  int inner_mask = 0;
  for (int a = 0; a < d; ++a)
    if (inner.corner[a] > top.corner[a]) inner_mask |= 1 << (d - 1 - a);
  double c = h.values[inner_mask];
  StepFunction s = h;
  for (int mask = 0; mask < (1 << d); ++mask) s.values[mask] = (mask == inner_mask) ? 0.0 : h.values[mask] - c;
  s.tail = -c;
  return s;
}

}  // namespace glstar
