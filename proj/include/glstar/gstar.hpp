#pragma once
// theta_{t1,t2} f, the bi-parameter g*-function, and the localized quantities
// P, Q, K and R used in the boundedness argument.

#include <Eigen/Dense>
#include <map>
#include <mutex>

#include "haar.hpp"
#include "kernels.hpp"

namespace glstar {

struct GStarValue {
  std::vector<double> x;
  double value = 0.0;
  double error = 0.0;          ///< estimated truncation error of `value`
  QuadratureSpec spec;
  double tail_estimate = 0.0;  ///< t-range tail of value^2, relative
  bool clamped = false;        ///< a negative roundoff sum was clamped to 0
};

namespace detail {

/// Cells lo + [c h, (c+1) h), c = 0..N-1, of one axis of a step lattice.
struct Axis {
  double lo = 0.0;
  double h = 1.0;
  int N = 1;
  double edge(int c) const { return lo + c * h; }
  double hi() const { return edge(N); }
};

inline Axis axis_of(const StepFunction& f, int a) {
  return {f.lo[a], f.side(), static_cast<int>(f.counts[a])};
}

/// Psi_c(y) = integral of psi_t(y - z) over cell c.
inline void responses(const KernelFactor& f, double t, double y, const Axis& ax, double* out) {
  for (int c = 0; c < ax.N; ++c) out[c] = f.cell_integral(t, y, ax.edge(c), ax.edge(c + 1));
}

/// Ratio R/t beyond which the weight (t/(t+|v|))^p / t has mass below eps.
inline double weight_reach(double p, double eps) {
  return std::pow(2.0 / ((p - 1.0) * eps), 1.0 / (p - 1.0));
}

/// y-rule for integrands built from Psi on `ax` at scale t, weighted around
/// the extra anchors.
inline Rule1D psi_rule(double t, const Axis& ax, const std::vector<double>& extra, double reach,
                       const QuadratureSpec& spec) {
  std::vector<double> anchors = extra;
  bool fine = t < 4 * ax.h;
  if (fine)
    for (int c = 0; c <= ax.N; ++c) anchors.push_back(ax.edge(c));
  else {
    anchors.push_back(ax.lo);
    anchors.push_back(ax.hi());
  }
  double lo = ax.lo, hi = ax.hi();
  for (double e : extra) {
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  double R = t * reach;
  double scale = fine ? std::min(t, ax.h) / 2 : t / 2;
  return graded_rule(lo - R, hi + R, anchors, scale, spec.smooth_order());
}

inline double weight_constant(double p) { return 2.0 / (p - 1.0); }

/// Sum of per-node symmetric matrices in node order.
inline Eigen::MatrixXd ordered_sum(const std::vector<Eigen::MatrixXd>& parts, int N) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(N, N);
  for (const auto& p : parts) out += p;
  return out;
}

/// Per-octave Gram matrices of Psi over t in [t0, t1]; `weight(y, t)` is the
/// y-weight (already divided by t).
inline std::vector<Eigen::MatrixXd> octave_grams(
    const KernelFactor& f, const Axis& ax, double t0, double t1, const std::vector<double>& anchors,
    double reach, const std::function<double(double, double)>& weight, const QuadratureSpec& spec) {
  int octaves = static_cast<int>(std::ceil(std::log2(t1 / t0) - 1e-9));
  std::vector<Eigen::MatrixXd> out(octaves, Eigen::MatrixXd::Zero(ax.N, ax.N));
  parallel_for(static_cast<std::size_t>(octaves), [&](std::size_t o) {
    double lo = t0 * std::exp2(static_cast<double>(o)), hi = std::min(2 * lo, t1);
    Rule1D tr = t_rule(lo, hi, spec.t_points_per_octave);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(ax.N, ax.N);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      double t = tr.x[k];
      Rule1D yr = psi_rule(t, ax, anchors, reach, spec);
      Eigen::MatrixXd B(ax.N, yr.size());
      for (std::size_t i = 0; i < yr.size(); ++i) {
        double w = yr.w[i] * weight(yr.x[i], t);
        responses(f, t, yr.x[i], ax, B.col(static_cast<Eigen::Index>(i)).data());
        B.col(static_cast<Eigen::Index>(i)) *= std::sqrt(std::max(w, 0.0));
      }
      acc += tr.w[k] * (B * B.transpose());
    }
    out[o] = acc;
  });
  return out;
}

inline Eigen::MatrixXd as_matrix(const StepFunction& f) {
  int N1 = static_cast<int>(f.counts[0]), N2 = static_cast<int>(f.counts[1]);
  Eigen::MatrixXd F(N1, N2);
  for (int i = 0; i < N1; ++i)
    for (int k = 0; k < N2; ++k) F(i, k) = f.values[static_cast<std::size_t>(i) * N2 + k];
  return F;
}

inline bool fast_route(const Kernel& k, const StepFunction& f) {
  return k.is_tensor() && k.n == 1 && k.m == 1 && f.dim == 2;
}

/// Geometric extrapolation of a sequence of octave contributions beyond its
/// edge: edge * rho / (1 - rho) with rho = edge / next; infinite if rho >= 1.
inline double edge_tail(double edge, double next) {
  if (edge <= 0) return 0.0;
  if (!(next > 0)) return std::numeric_limits<double>::infinity();
  double rho = edge / next;
  return rho < 1 ? edge * rho / (1 - rho) : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// theta

/// theta_{t1,t2} f(y) = integral of K_{t1,t2}(y, z) f(z) dz.
inline double apply_theta(const Kernel& k, const StepFunction& f, const std::vector<double>& y, double t1,
                          double t2, const QuadratureSpec& spec) {
  if (!(t1 > 0) || !(t2 > 0)) throw ConfigError("apply_theta requires t1, t2 > 0");
  if (f.dim != k.n + k.m) throw ConfigError("step function dimension does not match the kernel");
  if (f.tail != 0.0 && !(k.alpha > 0 && k.beta > 0))
    throw NumericError("tail divergence: declared exponents must be positive for a constant tail");
  if (detail::fast_route(k, f)) {
    auto a1 = detail::axis_of(f, 0), a2 = detail::axis_of(f, 1);
    Eigen::VectorXd p1(a1.N), p2(a2.N);
    detail::responses(k.first(), t1, y[0], a1, p1.data());
    detail::responses(k.second(), t2, y[1], a2, p2.data());
    double v = p1.dot(detail::as_matrix(f) * p2);
    if (f.tail != 0.0) v += f.tail * (k.first().mean() * k.second().mean() - p1.sum() * p2.sum());
    return v;
  }
  if (k.is_tensor()) {
    // product cell integrals for multi-dimensional factors
    int n = k.n, d = f.dim;
    double h = f.side();
    std::vector<double> terms, ysl1(y.begin(), y.begin() + n), ysl2(y.begin() + n, y.end());
    std::vector<std::int64_t> idx(d, 0);
    double box1 = 0.0, box2 = 0.0;
    std::map<std::vector<std::int64_t>, double> cache1, cache2;
    auto slot_value = [&](int slot) {
      int off = slot == 0 ? 0 : n, dim = slot == 0 ? n : k.m;
      std::vector<std::int64_t> key(idx.begin() + off, idx.begin() + off + dim);
      auto& cache = slot == 0 ? cache1 : cache2;
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      std::vector<double> c0(dim), c1(dim);
      for (int a = 0; a < dim; ++a) {
        c0[a] = f.lo[off + a] + static_cast<double>(key[a]) * h;
        c1[a] = c0[a] + h;
      }
      const KernelFactor& fac = slot == 0 ? k.first() : k.second();
      double v = fac.cell_integral(slot == 0 ? t1 : t2, slot == 0 ? ysl1 : ysl2, c0, c1, spec.smooth_order());
      cache[key] = v;
      return v;
    };
    for (std::size_t c = 0; c < f.values.size(); ++c) {
      terms.push_back(f.values[c] * slot_value(0) * slot_value(1));
      for (int a = d - 1; a >= 0; --a) {
        if (++idx[a] < f.counts[a]) break;
        idx[a] = 0;
      }
    }
    double v = pairwise_sum(terms);
    if (f.tail != 0.0) {
      for (auto& [key, val] : cache1) box1 += val;
      for (auto& [key, val] : cache2) box2 += val;
      v += f.tail * (k.first().mean() * k.second().mean() - box1 * box2);
    }
    return v;
  }
  // generic kernel: tensor Gauss rule on each cell, graded toward y
  int d = f.dim;
  double h = f.side();
  QuadratureSpec cell_spec = spec;
  cell_spec.points_per_cell = spec.smooth_order();
  double scale = std::min(t1, t2) / 2;
  std::vector<double> terms;
  std::vector<std::int64_t> idx(d, 0);
  double box_total = 0.0;
  std::vector<double> box_terms;
  auto integrand = [&](const std::vector<double>& v) {
    std::vector<double> z(d);
    for (int a = 0; a < d; ++a) z[a] = y[a] + v[a];
    return k.evaluate(t1, t2, y, z);
  };
  for (std::size_t c = 0; c < f.values.size(); ++c) {
    Box b;
    for (int a = 0; a < d; ++a) {
      double c0 = f.lo[a] + static_cast<double>(idx[a]) * h;
      b.lo.push_back(c0 - y[a]);
      b.hi.push_back(c0 + h - y[a]);
    }
    double cell = integrate_box(integrand, b, cell_spec, scale).value;
    terms.push_back(f.values[c] * cell);
    box_terms.push_back(cell);
    for (int a = d - 1; a >= 0; --a) {
      if (++idx[a] < f.counts[a]) break;
      idx[a] = 0;
    }
  }
  double v = pairwise_sum(terms);
  if (f.tail != 0.0) {
    box_total = pairwise_sum(box_terms);
    Box all;
    for (int a = 0; a < d; ++a) {
      bool first = a < k.n;
      double R = truncation_radius(first ? k.alpha : k.beta, first ? t1 : t2, spec.truncation_eps,
                                   first ? k.n : k.m);
      all.lo.push_back(-R);
      all.hi.push_back(R);
    }
    double total = integrate_box(integrand, all, cell_spec, scale).value;
    v += f.tail * (total - box_total);
  }
  return v;
}

// ---------------------------------------------------------------------------
// One-parameter building blocks

/// Gram matrices P(x) split by octave of t in [t0, t1]:
/// P[c, c'] = integral dt/t integral dy (t/(t+|x-y|))^p / t Psi_c(y) Psi_c'(y).
inline std::vector<Eigen::MatrixXd> pointwise_gram(const KernelFactor& f, const detail::Axis& ax, double x,
                                                   double p, double t0, double t1, const QuadratureSpec& spec) {
  if (f.dim != 1) throw ConfigError("Gram routes need one-dimensional factors");
  double reach = detail::weight_reach(p, spec.truncation_eps * 1e-3);
  return detail::octave_grams(f, ax, t0, t1, {x}, reach,
                              [&](double y, double t) { return std::pow(t / (t + std::abs(x - y)), p) / t; },
                              spec);
}

/// Gram matrix of the Whitney region W_I (x integrated over I, t over the
/// octave of I): integral dt/t integral dy W_I(y, t) Psi Psi^T.
inline Eigen::MatrixXd whitney_gram(const KernelFactor& f, const detail::Axis& ax, const DyadicCube& I, double p,
                                    const QuadratureSpec& spec) {
  if (f.dim != 1 || I.dim != 1) throw ConfigError("Gram routes need one-dimensional factors");
  double c0 = I.lo(0), c1 = I.hi(0), l = I.side();
  double reach = detail::weight_reach(p, spec.truncation_eps * 1e-3);
  auto g = detail::octave_grams(f, ax, l / 2, l, {c0, c1}, reach,
                                [&](double y, double t) { return weight_over_interval(t, y, c0, c1, p); }, spec);
  return g[0];
}

/// Sum of whitney_gram over every cube of one level: the cube weights add up
/// to the constant 2/(p-1), so this is that constant times the plain Gram.
inline Eigen::MatrixXd level_gram(const KernelFactor& f, const detail::Axis& ax, int level, double p,
                                  const QuadratureSpec& spec) {
  if (f.dim != 1) throw ConfigError("Gram routes need one-dimensional factors");
  double l = std::ldexp(1.0, -level);
  double reach = std::ldexp(1.0, 20);
  auto g = detail::octave_grams(f, ax, l / 2, l, {}, reach, [](double, double) { return 1.0; }, spec);
  return detail::weight_constant(p) * g[0];
}

/// M(delta) = integral over all t of dt/t integral dy Psi_0(y) Psi_delta(y) for
/// unit cells [0,1) and [delta, delta+1), t in [2^-40, 2^40].
struct ToeplitzRow {
  std::vector<double> values;
  double tail_estimate = 0.0;  ///< worst t-range tail over delta, relative to M(0)
};

inline ToeplitzRow toeplitz_unit(const KernelFactor& f, int count, const QuadratureSpec& spec) {
  if (f.dim != 1) throw ConfigError("Gram routes need one-dimensional factors");
  ToeplitzRow row;
  row.values.assign(count, 0.0);
  std::vector<double> tails(count, 0.0);
  const int lo_oct = -40, hi_oct = 40;
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t di) {
    double delta = static_cast<double>(di);
    std::vector<double> per_octave;
    for (int o = lo_oct; o < hi_oct; ++o) {
      Rule1D tr = octave_rule(std::ldexp(1.0, o), spec.t_points_per_octave);
      std::vector<double> terms;
      for (std::size_t k = 0; k < tr.size(); ++k) {
        double t = tr.x[k];
        double R = t * std::ldexp(1.0, 20) + delta + 1;
        double scale = std::min(t, 1.0) / 2;
        Rule1D yr = graded_rule(-R, R + delta + 1, {0.0, 1.0, delta, delta + 1}, scale, spec.smooth_order());
        std::vector<double> inner(yr.size());
        for (std::size_t i = 0; i < yr.size(); ++i)
          inner[i] = yr.w[i] * f.cell_integral(t, yr.x[i], 0.0, 1.0) * f.cell_integral(t, yr.x[i], delta, delta + 1);
        terms.push_back(tr.w[k] * pairwise_sum(inner));
      }
      per_octave.push_back(pairwise_sum(terms));
    }
    double total = pairwise_sum(per_octave);
    std::size_t L = per_octave.size();
    double tail = std::abs(detail::edge_tail(std::abs(per_octave[0]), std::abs(per_octave[1]))) +
                  std::abs(detail::edge_tail(std::abs(per_octave[L - 1]), std::abs(per_octave[L - 2])));
    row.values[di] = total;
    tails[di] = tail;
  });
  // |M(delta)| <= M(0), so tails are measured against the diagonal entry
  for (double t : tails)
    row.tail_estimate = std::max(row.tail_estimate, row.values[0] > 0 ? t / row.values[0] : (t > 0 ? INFINITY : 0.0));
  if (!(row.tail_estimate <= 1e-2))
    throw NumericError("t-range too small: Toeplitz Gram tail estimate " + std::to_string(row.tail_estimate) +
                       " (the factor's square function does not converge as t -> 0 or t -> infinity)");
  return row;
}

/// Full-halfspace Gram of N cells of side h: h * M(|c - c'|).
inline Eigen::MatrixXd toeplitz_gram(const ToeplitzRow& row, int N, double h) {
  if (static_cast<int>(row.values.size()) < N) throw ConfigError("Toeplitz row shorter than the lattice");
  Eigen::MatrixXd M(N, N);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) M(i, k) = h * row.values[std::abs(i - k)];
  return M;
}

// ---------------------------------------------------------------------------
// g*

struct PointwiseOptions {
  bool throw_on_tail = true;
  double tail_tolerance = 1e-2;
};

namespace detail {

inline GStarValue finish_value(const std::vector<double>& x, double sq, double tail_abs,
                               const QuadratureSpec& spec, const PointwiseOptions& o) {
  GStarValue g;
  g.x = x;
  g.spec = spec;
  if (sq < 0) {
    g.clamped = true;
    sq = 0;
  }
  g.value = std::sqrt(sq);
  g.tail_estimate = sq > 0 ? tail_abs / sq : (tail_abs > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  g.error = std::sqrt(sq + tail_abs) - g.value;
  if (o.throw_on_tail && g.tail_estimate > o.tail_tolerance) {
    std::ostringstream os;
    os << "t-range too small: tail estimate " << g.tail_estimate << " of g*^2 lies outside [" << spec.t_min
       << ", " << spec.t_max << "]";
    throw NumericError(os.str());
  }
  return g;
}

}  // namespace detail

/// Direct four-fold quadrature over (t1, t2, y1, y2) of |theta f(y)|^2 against
/// both weights. Tensor kernels evaluate theta on the whole node grid at once
/// from the cell responses; other kernels call apply_theta per node (slow).
/// n = m = 1.
inline GStarValue gstar_pointwise_direct(const Kernel& k, const StepFunction& f, const std::vector<double>& x,
                                         const Params& p, const QuadratureSpec& spec,
                                         const PointwiseOptions& o = {}) {
  spec.validate();
  if (k.n != 1 || k.m != 1) throw ConfigError("direct g* quadrature is implemented for n = m = 1");
  if (f.tail != 0.0) throw ConfigError("g* requires a step function with zero tail");
  double p1 = p.n * p.lambda1, p2 = p.m * p.lambda2;
  auto a1 = detail::axis_of(f, 0), a2 = detail::axis_of(f, 1);
  double r1 = detail::weight_reach(p1, spec.truncation_eps * 1e-3), r2 = detail::weight_reach(p2, spec.truncation_eps * 1e-3);
  int oct = static_cast<int>(std::ceil(std::log2(spec.t_max / spec.t_min) - 1e-9));
  bool tensor = detail::fast_route(k, f);
  Eigen::MatrixXd F = tensor ? detail::as_matrix(f) : Eigen::MatrixXd();
  std::vector<double> grid(static_cast<std::size_t>(oct) * oct, 0.0);
  parallel_for(grid.size(), [&](std::size_t idx) {
    int o1 = static_cast<int>(idx) / oct, o2 = static_cast<int>(idx) % oct;
    double l1 = spec.t_min * std::exp2(o1), l2 = spec.t_min * std::exp2(o2);
    Rule1D tr1 = t_rule(l1, std::min(2 * l1, spec.t_max), spec.t_points_per_octave);
    Rule1D tr2 = t_rule(l2, std::min(2 * l2, spec.t_max), spec.t_points_per_octave);
    std::vector<double> terms;
    for (std::size_t i1 = 0; i1 < tr1.size(); ++i1)
      for (std::size_t i2 = 0; i2 < tr2.size(); ++i2) {
        double t1 = tr1.x[i1], t2 = tr2.x[i2];
        Rule1D y1 = detail::psi_rule(t1, a1, {x[0]}, r1, spec);
        Rule1D y2 = detail::psi_rule(t2, a2, {x[1]}, r2, spec);
        if (tensor) {
          // theta on the (y1, y2) node grid as B1^T F B2 with weights folded in
          Eigen::MatrixXd B1(a1.N, y1.size()), B2(a2.N, y2.size());
          for (std::size_t j = 0; j < y1.size(); ++j) {
            detail::responses(k.first(), t1, y1.x[j], a1, B1.col(static_cast<Eigen::Index>(j)).data());
            B1.col(static_cast<Eigen::Index>(j)) *=
                std::sqrt(y1.w[j] * std::pow(t1 / (t1 + std::abs(x[0] - y1.x[j])), p1) / t1);
          }
          for (std::size_t j = 0; j < y2.size(); ++j) {
            detail::responses(k.second(), t2, y2.x[j], a2, B2.col(static_cast<Eigen::Index>(j)).data());
            B2.col(static_cast<Eigen::Index>(j)) *=
                std::sqrt(y2.w[j] * std::pow(t2 / (t2 + std::abs(x[1] - y2.x[j])), p2) / t2);
          }
          terms.push_back(tr1.w[i1] * tr2.w[i2] * (B1.transpose() * F * B2).squaredNorm());
          continue;
        }
        std::vector<double> inner;
        inner.reserve(y1.size() * y2.size());
        for (std::size_t j1 = 0; j1 < y1.size(); ++j1) {
          double w1 = std::pow(t1 / (t1 + std::abs(x[0] - y1.x[j1])), p1) / t1;
          for (std::size_t j2 = 0; j2 < y2.size(); ++j2) {
            double w2 = std::pow(t2 / (t2 + std::abs(x[1] - y2.x[j2])), p2) / t2;
            double th = apply_theta(k, f, {y1.x[j1], y2.x[j2]}, t1, t2, spec);
            inner.push_back(y1.w[j1] * y2.w[j2] * w1 * w2 * th * th);
          }
        }
        terms.push_back(tr1.w[i1] * tr2.w[i2] * pairwise_sum(inner));
      }
    grid[idx] = pairwise_sum(terms);
  });
  double sq = pairwise_sum(grid);
  // edge octaves along each t-axis
  std::vector<double> row(oct, 0.0), col(oct, 0.0);
  for (int a = 0; a < oct; ++a)
    for (int b = 0; b < oct; ++b) {
      row[a] += grid[static_cast<std::size_t>(a) * oct + b];
      col[b] += grid[static_cast<std::size_t>(a) * oct + b];
    }
  double tail = 0.0;
  if (oct >= 2)
    for (auto* v : {&row, &col})
      tail += detail::edge_tail((*v)[0], (*v)[1]) + detail::edge_tail((*v)[oct - 1], (*v)[oct - 2]);
  return detail::finish_value(x, sq, tail, spec, o);
}

/// g*(f)(x). Tensor kernels with one-dimensional factors use the Gram route
/// g*^2 = tr(F^T P1 F P2); other kernels fall back to the direct quadrature.
inline GStarValue gstar_pointwise(const Kernel& k, const StepFunction& f, const std::vector<double>& x,
                                  const Params& p, const QuadratureSpec& spec, const PointwiseOptions& o = {}) {
  spec.validate();
  if (!(p.lambda1 > 1) || !(p.lambda2 > 1)) throw ConfigError("g* requires lambda1, lambda2 > 1");
  if (f.tail != 0.0) throw ConfigError("g* requires a step function with zero tail");
  if (static_cast<int>(x.size()) != k.n + k.m) throw ConfigError("point dimension does not match the kernel");
  bool zero = std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; });
  if (zero) return detail::finish_value(x, 0.0, 0.0, spec, o);
  if (!detail::fast_route(k, f)) return gstar_pointwise_direct(k, f, x, p, spec, o);
  auto a1 = detail::axis_of(f, 0), a2 = detail::axis_of(f, 1);
  auto P1 = pointwise_gram(k.first(), a1, x[0], p.n * p.lambda1, spec.t_min, spec.t_max, spec);
  auto P2 = pointwise_gram(k.second(), a2, x[1], p.m * p.lambda2, spec.t_min, spec.t_max, spec);
  Eigen::MatrixXd F = detail::as_matrix(f);
  Eigen::MatrixXd S1 = detail::ordered_sum(P1, a1.N), S2 = detail::ordered_sum(P2, a2.N);
  double sq = (F.transpose() * S1 * F * S2).trace();
  auto slot_terms = [&](const std::vector<Eigen::MatrixXd>& parts, bool first) {
    std::vector<double> c;
    for (const auto& P : parts) c.push_back(first ? (F.transpose() * P * F * S2).trace() : (F.transpose() * S1 * F * P).trace());
    return c;
  };
  double tail = 0.0;
  for (bool first : {true, false}) {
    auto c = slot_terms(first ? P1 : P2, first);
    std::size_t L = c.size();
    if (L >= 2) tail += detail::edge_tail(c[0], c[1]) + detail::edge_tail(c[L - 1], c[L - 2]);
  }
  return detail::finish_value(x, sq, tail, spec, o);
}

/// One-parameter g*(f1)(x1)^2 for a 1D factor and 1D step values.
inline GStarValue gstar_one_parameter(const KernelFactor& fac, const StepFunction& f1, double x, double p,
                                      const QuadratureSpec& spec, const PointwiseOptions& o = {}) {
  if (f1.dim != 1 || f1.tail != 0.0) throw ConfigError("one-parameter g* needs a 1D step function with zero tail");
  auto ax = detail::axis_of(f1, 0);
  auto P = pointwise_gram(fac, ax, x, p, spec.t_min, spec.t_max, spec);
  Eigen::Map<const Eigen::VectorXd> v(f1.values.data(), ax.N);
  std::vector<double> c;
  for (const auto& M : P) c.push_back(v.dot(M * v));
  double sq = pairwise_sum(c);
  double tail = c.size() >= 2 ? detail::edge_tail(c[0], c[1]) + detail::edge_tail(c.back(), c[c.size() - 2]) : 0.0;
  return detail::finish_value({x}, sq, tail, spec, o);
}

struct SqNormResult {
  double value = 0.0;
  double tail_estimate = 0.0;  ///< relative, from the coarsest and finest grid levels
};

/// ||g* f||^2 as the Whitney-region sum over both grids of the pair. The x
/// integral of each region is taken in closed form (W_I weights) and, for the
/// unrestricted sum, all cubes of one level are summed through the exact
/// partition of the weight. `keep_first` / `keep_second`, when given, restrict
/// the sum to the accepted cubes and switch to explicit per-cube Grams.
inline SqNormResult gstar_sq_norm_detail(const Kernel& k, const StepFunction& f, const Params& p,
                                         const GridPair& gp, const QuadratureSpec& spec,
                                         const std::function<bool(const DyadicCube&)>& keep_first = nullptr,
                                         const std::function<bool(const DyadicCube&)>& keep_second = nullptr) {
  spec.validate();
  if (!detail::fast_route(k, f))
    throw ConfigError("Whitney-sum g* norm needs a tensor kernel with one-dimensional factors");
  if (f.tail != 0.0) throw ConfigError("g* requires a step function with zero tail");
  SqNormResult res;
  bool zero = std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; });
  if (zero) return res;
  auto slot = [&](int s) {
    const KernelFactor& fac = s == 0 ? k.first() : k.second();
    const ShiftedGrid& g = s == 0 ? gp.first : gp.second;
    const auto& keep = s == 0 ? keep_first : keep_second;
    double pw = s == 0 ? p.n * p.lambda1 : p.m * p.lambda2;
    auto ax = detail::axis_of(f, s);
    std::vector<Eigen::MatrixXd> levels;
    for (int j = g.j_min; j <= g.j_max; ++j) {
      if (!keep) {
        levels.push_back(level_gram(fac, ax, j, pw, spec));
        continue;
      }
      double l = std::ldexp(1.0, -j), reach = 16 * l + (ax.hi() - ax.lo);
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(ax.N, ax.N);
      for (const auto& I : cubes_meeting(g, j, {ax.lo - reach}, {ax.hi() + reach}))
        if (keep(I)) acc += whitney_gram(fac, ax, I, pw, spec);
      levels.push_back(acc);
    }
    return levels;
  };
  auto G1 = slot(0), G2 = slot(1);
  Eigen::MatrixXd F = detail::as_matrix(f);
  Eigen::MatrixXd S1 = detail::ordered_sum(G1, F.rows()), S2 = detail::ordered_sum(G2, F.cols());
  res.value = (F.transpose() * S1 * F * S2).trace();
  double tail = 0.0;
  auto edges = [&](const std::vector<Eigen::MatrixXd>& G, bool first) {
    std::vector<double> c;
    for (const auto& M : G) c.push_back(first ? (F.transpose() * M * F * S2).trace() : (F.transpose() * S1 * F * M).trace());
    if (c.size() >= 2) tail += detail::edge_tail(c[0], c[1]) + detail::edge_tail(c.back(), c[c.size() - 2]);
  };
  edges(G1, true);
  edges(G2, false);
  res.tail_estimate = res.value > 0 ? tail / res.value : 0.0;
  return res;
}

inline double gstar_sq_norm(const Kernel& k, const StepFunction& f, const Params& p, const GridPair& gp,
                            const QuadratureSpec& spec) {
  return gstar_sq_norm_detail(k, f, p, gp, spec).value;
}

// ---------------------------------------------------------------------------
// Localized quantities

namespace detail {

/// [integral |Theta(x - y)|^2 (t/(t+|y|))^p dy / t]^(1/2), where Theta is the
/// factor applied to the 1D step function g (constant tail included).
inline double slot_weighted_norm(const KernelFactor& fac, const StepFunction& g, double x, double t, double p,
                                 const QuadratureSpec& spec) {
  if (fac.dim != 1 || g.dim != 1) throw ConfigError("localized quantities need one-dimensional factors");
  auto ax = axis_of(g, 0);
  double reach = weight_reach(p, spec.truncation_eps * 1e-3);
  // in the variable v = x - y the weight sits at x and Theta sees the lattice
  Rule1D vr = psi_rule(t, ax, {x}, reach, spec);
  std::vector<double> psi(ax.N), terms(vr.size());
  double mean = g.tail != 0.0 ? fac.mean() : 0.0;
  for (std::size_t i = 0; i < vr.size(); ++i) {
    double v = vr.x[i];
    responses(fac, t, v, ax, psi.data());
    double th = 0.0, box = 0.0;
    for (int c = 0; c < ax.N; ++c) {
      th += g.values[c] * psi[c];
      box += psi[c];
    }
    if (g.tail != 0.0) th += g.tail * (mean - box);
    terms[i] = vr.w[i] * th * th * std::pow(t / (t + std::abs(x - v)), p) / t;
  }
  return std::sqrt(std::max(pairwise_sum(terms), 0.0));
}

inline void require_tensor_1d(const Kernel& k) {
  if (!k.is_tensor() || k.n != 1 || k.m != 1)
    throw ConfigError("localized quantities are implemented for tensor kernels with n = m = 1");
}

inline StepFunction haar_of(const DyadicCube& I) {
  return haar_function({I, std::vector<int>(I.dim, 1)});
}

}  // namespace detail

/// P(x, t): weighted L2 size of theta(h_{I1} x h_{J1})(x - y) over y.
inline double p_quantity(const Kernel& k, const DyadicCube& I1, const DyadicCube& J1, const std::vector<double>& x,
                         double t1, double t2, const Params& p, const QuadratureSpec& spec) {
  detail::require_tensor_1d(k);
  return detail::slot_weighted_norm(k.first(), detail::haar_of(I1), x[0], t1, p.n * p.lambda1, spec) *
         detail::slot_weighted_norm(k.second(), detail::haar_of(J1), x[1], t2, p.m * p.lambda2, spec);
}

/// Q: as P with h_{I1} replaced by s_I^k (ancestor Haar function with the
/// I^(k-1) average removed, constant tail included).
inline double q_quantity(const Kernel& k, const DyadicCube& I, int kk, const ShiftedGrid& g, const DyadicCube& J1,
                         const std::vector<double>& x, double t1, double t2, const Params& p,
                         const QuadratureSpec& spec) {
  detail::require_tensor_1d(k);
  StepFunction s = s_function(I, kk, g);
  return detail::slot_weighted_norm(k.first(), s, x[0], t1, p.n * p.lambda1, spec) *
         detail::slot_weighted_norm(k.second(), detail::haar_of(J1), x[1], t2, p.m * p.lambda2, spec);
}

/// K: [integral (integral over the complement of I^(k-1) of
/// t^a (t + |x - y - z|)^(-1-a) dz)^2 (t/(t+|y|))^(n lambda1) dy / t]^(1/2).
inline double k_quantity(const KernelFactor& fac, const DyadicCube& I, int kk, const ShiftedGrid& g, double x1,
                         double t1, const Params& p, const QuadratureSpec& spec) {
  if (fac.dim != 1 || I.dim != 1) throw ConfigError("k_quantity is implemented for n = 1");
  if (kk < 1) throw ConfigError("k_quantity requires k >= 1");
  if (!g.has_level(I.level - kk + 1)) throw ConfigError("k exceeds truncation");
  DyadicCube A = ancestor(I, kk - 1, g);
  double c0 = A.lo(0), c1 = A.hi(0);
  KernelFactor size = size_factor(1, fac.alpha);
  double pw = p.n * p.lambda1;
  double R = t1 * detail::weight_reach(pw, spec.truncation_eps * 1e-3);
  double a = std::min({-R, x1 - c1 - R}), b = std::max({R, x1 - c0 + R});
  Rule1D yr = graded_rule(a, b, {0.0, x1 - c0, x1 - c1}, t1 / 2, spec.smooth_order());
  std::vector<double> terms(yr.size());
  for (std::size_t i = 0; i < yr.size(); ++i) {
    double y = yr.x[i];
    double inner = size.complement_integral(t1, x1 - y, c0, c1);
    terms[i] = yr.w[i] * inner * inner * std::pow(t1 / (t1 + std::abs(y)), pw) / t1;
  }
  return std::sqrt(std::max(pairwise_sum(terms), 0.0));
}

struct RQuantity {
  double value = 0.0;
  double tail_estimate = 0.0;  ///< contribution of the finest level, relative
  int levels = 0;
  std::vector<double> per_level;
};

/// R: sum over the descendants I' of I (down to `levels` generations) of the
/// W_{I'} integral of |theta(1 x h_{J1})(x - y)|^2 against both weights.
inline RQuantity r_quantity(const Kernel& k, const DyadicCube& I, const DyadicCube& J1, double x2, double t2,
                            const Params& p, const ShiftedGrid& g, const QuadratureSpec& spec, int levels) {
  detail::require_tensor_1d(k);
  if (levels < 0) throw ConfigError("r_quantity requires levels >= 0");
  if (!g.has_level(I.level + levels)) throw NumericError("truncation does not reach the requested finest level");
  double m1 = k.first().mean();
  double c1 = detail::weight_constant(p.n * p.lambda1);
  double P2 = detail::slot_weighted_norm(k.second(), detail::haar_of(J1), x2, t2, p.m * p.lambda2, spec);
  RQuantity out;
  out.levels = levels;
  // every generation of descendants covers I, and each W_{I'} carries |I'| ln 2
  for (int l = 0; l <= levels; ++l) out.per_level.push_back(m1 * m1 * c1 * I.volume() * std::log(2.0) * P2 * P2);
  out.value = pairwise_sum(out.per_level);
  out.tail_estimate = out.value > 0 ? out.per_level.back() / out.value : 0.0;
  return out;
}

/// Lemma-type left side: [integral (integral over I1 of (t+|x - y - z|)^(-1-a) dz)^2
/// (t/(t+|y|))^(n lambda1) dy / t]^(1/2).
inline double lemma32_lhs(const DyadicCube& I1, double x1, double t1, const Params& p, const QuadratureSpec& spec) {
  if (I1.dim != 1) throw ConfigError("lemma32_lhs is implemented for n = 1");
  double c0 = I1.lo(0), c1 = I1.hi(0), a = p.alpha, pw = p.n * p.lambda1;
  KernelFactor size = size_factor(1, a);
  double R = t1 * detail::weight_reach(pw, spec.truncation_eps * 1e-3);
  double lo = std::min({-R, x1 - c1 - R}), hi = std::max({R, x1 - c0 + R});
  Rule1D yr = graded_rule(lo, hi, {0.0, x1 - c0, x1 - c1}, std::min(t1, c1 - c0) / 2, spec.smooth_order());
  std::vector<double> terms(yr.size());
  double scale = std::pow(t1, -a);
  for (std::size_t i = 0; i < yr.size(); ++i) {
    double y = yr.x[i];
    double inner = scale * size.cell_integral(t1, x1 - y, c0, c1);
    terms[i] = yr.w[i] * inner * inner * std::pow(t1 / (t1 + std::abs(y)), pw) / t1;
  }
  return std::sqrt(std::max(pairwise_sum(terms), 0.0));
}

inline double lemma32_rhs(const DyadicCube& I1, const DyadicCube& I2, const Params& p) {
  return I1.volume() / std::pow(I2.side() + set_distance(I1, I2), p.n + p.alpha);
}

}  // namespace glstar
