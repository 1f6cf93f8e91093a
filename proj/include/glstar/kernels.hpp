#pragma once
// Convolution kernel factors, bi-parameter kernels and sampling checkers for
// the standard and Carleson-type kernel estimates.

#include <boost/math/special_functions/beta.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "dyadic.hpp"

namespace glstar {

enum class FactorFamily { size_only, cancellative, wrong_alpha, holder_break, zero };

inline std::string family_name(FactorFamily f) {
  switch (f) {
    case FactorFamily::size_only: return "size_only";
    case FactorFamily::cancellative: return "cancellative";
    case FactorFamily::wrong_alpha: return "wrong_alpha";
    case FactorFamily::holder_break: return "holder_break";
    case FactorFamily::zero: return "zero";
  }
  return "?";
}

/// One-parameter convolution factor psi_t(u) on R^dim, u measured in the sup
/// norm. `alpha` is the declared exponent; wrong_alpha decays with alpha/2.
struct KernelFactor {
  FactorFamily family = FactorFamily::size_only;
  int dim = 1;
  double alpha = 0.5;
  double scale = 1.0;

  double decay() const { return family == FactorFamily::wrong_alpha ? alpha / 2 : alpha; }

  /// psi_t(u) for |u|_inf = rho; `negative_first` marks u_0 < 0.
  double value_rho(double t, double rho, bool negative_first) const {
    double a = decay();
    double base = std::pow(t, a) * std::pow(t + rho, -dim - a);
    switch (family) {
      case FactorFamily::size_only:
      case FactorFamily::wrong_alpha: return scale * base;
      case FactorFamily::cancellative: return scale * base * (a - (dim + a) * t / (t + rho));
      case FactorFamily::holder_break: return scale * base * (negative_first ? 2.0 : 1.0);
      case FactorFamily::zero: return 0.0;
    }
    return 0.0;
  }

  double value(double t, const double* u) const {
    double rho = 0.0;
    for (int a = 0; a < dim; ++a) rho = std::max(rho, std::abs(u[a]));
    return value_rho(t, rho, u[0] < 0);
  }
  double value(double t, const std::vector<double>& u) const { return value(t, u.data()); }
  double value1(double t, double u) const { return value_rho(t, std::abs(u), u < 0); }

  /// Integral of psi_t over R^dim (independent of t).
  double mean() const {
    double a = decay();
    double size = dim * std::ldexp(1.0, dim) * boost::math::beta(double(dim), a);
    switch (family) {
      case FactorFamily::size_only:
      case FactorFamily::wrong_alpha: return scale * size;
      case FactorFamily::holder_break: return scale * 1.5 * size;
      case FactorFamily::cancellative:
      case FactorFamily::zero: return 0.0;
    }
    return 0.0;
  }

  /// Integral of psi_t(x - z) over z in [c0, c1] (dim = 1, closed form).
  double cell_integral(double t, double x, double c0, double c1) const {
    if (dim != 1) throw ConfigError("closed-form cell integrals need a one-dimensional factor");
    if (family == FactorFamily::zero) return 0.0;
    double U0 = x - c0, U1 = x - c1;  // U0 >= U1
    double a = decay();
    auto q = [&](double U) { return std::pow(t / (t + std::abs(U)), a); };
    auto size_part = [&](double hi, double lo) {  // integral of size-only psi over [lo, hi]
      if (hi <= lo) return 0.0;
      if (lo >= 0) return (q(lo) - q(hi)) / a;
      if (hi <= 0) return (q(hi) - q(lo)) / a;
      return (2.0 - q(hi) - q(lo)) / a;
    };
    switch (family) {
      case FactorFamily::size_only:
      case FactorFamily::wrong_alpha: return scale * size_part(U0, U1);
      case FactorFamily::holder_break: return scale * (size_part(U0, U1) + size_part(std::min(U0, 0.0), U1));
      case FactorFamily::cancellative: {
        auto H = [&](double U) {
          double s = U > 0 ? 1.0 : (U < 0 ? -1.0 : 0.0);
          return -s * q(U) * std::abs(U) / (t + std::abs(U));
        };
        return scale * (H(U0) - H(U1));
      }
      case FactorFamily::zero: return 0.0;
    }
    return 0.0;
  }

  /// Integral of psi_t(x - z) over the complement of [c0, c1] (dim = 1).
  double complement_integral(double t, double x, double c0, double c1) const {
    if (dim != 1) throw ConfigError("closed-form cell integrals need a one-dimensional factor");
    if (family == FactorFamily::size_only || family == FactorFamily::wrong_alpha) {
      double a = decay();
      auto q = [&](double U) { return std::pow(t / (t + std::abs(U)), a); };
      double A = x - c0, B = x - c1;  // integrate U > A and U < B
      double upper = A >= 0 ? q(A) / a : (2.0 - q(A)) / a;
      double lower = B <= 0 ? q(B) / a : (2.0 - q(B)) / a;
      return scale * (upper + lower);
    }
    return mean() - cell_integral(t, x, c0, c1);
  }

  /// Integral of psi_t(x - z) over an axis-aligned cell of any dimension. For
  /// dim > 1 this is a graded tensor quadrature centred on x.
  double cell_integral(double t, const std::vector<double>& x, const std::vector<double>& c0,
                       const std::vector<double>& c1, int order = 8) const {
    if (dim == 1) return cell_integral(t, x[0], c0[0], c1[0]);
    if (family == FactorFamily::zero) return 0.0;
    std::vector<Rule1D> rules;
    for (int a = 0; a < dim; ++a) {
      double lo = c0[a] - x[a], hi = c1[a] - x[a];
      rules.push_back(graded_rule(lo, hi, {std::clamp(0.0, lo, hi)}, t / 2, order));
    }
    return detail::tensor_sum([&](const std::vector<double>& v) {
      std::vector<double> u(dim);
      for (int a = 0; a < dim; ++a) u[a] = -v[a];
      return value(t, u);
    }, rules);
  }

  std::string name() const { return family_name(family); }
};

inline KernelFactor size_factor(int dim, double alpha) { return {FactorFamily::size_only, dim, alpha, 1.0}; }
inline KernelFactor cancellative_factor(int dim, double alpha) {
  return {FactorFamily::cancellative, dim, alpha, 1.0};
}

/// Kernel K_{t1,t2}(x, y) on R^(n+m) x R^(n+m).
struct Kernel {
  int n = 1;
  int m = 1;
  double alpha = 0.5;  ///< declared
  double beta = 0.5;   ///< declared
  std::string label;
  std::function<double(double, double, const std::vector<double>&, const std::vector<double>&)> evaluate;
  std::optional<std::pair<KernelFactor, KernelFactor>> tensor_parts;

  bool is_tensor() const { return tensor_parts.has_value(); }
  const KernelFactor& first() const { return tensor_parts->first; }
  const KernelFactor& second() const { return tensor_parts->second; }
};

/// psi_{t1}(x1 - y1) phi_{t2}(x2 - y2).
inline Kernel make_tensor(const KernelFactor& f1, const KernelFactor& f2, std::string label) {
  Kernel k;
  k.n = f1.dim;
  k.m = f2.dim;
  k.alpha = f1.alpha;
  k.beta = f2.alpha;
  k.label = std::move(label);
  k.tensor_parts = std::make_pair(f1, f2);
  int n = f1.dim, m = f2.dim;
  k.evaluate = [f1, f2, n, m](double t1, double t2, const std::vector<double>& x,
                              const std::vector<double>& y) {
    double u[64];
    for (int a = 0; a < n + m; ++a) u[a] = x[a] - y[a];
    return f1.value(t1, u) * f2.value(t2, u + n);
  };
  return k;
}

inline void check_exponents(int n, int m, double alpha, double beta) {
  if (n < 1 || m < 1 || n + m > 64) throw ConfigError("kernel dimensions out of range");
  if (!(alpha > 0) || !(beta > 0)) throw ConfigError("kernel exponents must be positive");
}

inline Kernel make_size_only(int n, int m, double alpha, double beta) {
  check_exponents(n, m, alpha, beta);
  return make_tensor(size_factor(n, alpha), size_factor(m, beta), "size_only");
}

inline Kernel make_cancellative(int n, int m, double alpha, double beta) {
  check_exponents(n, m, alpha, beta);
  return make_tensor(cancellative_factor(n, alpha), cancellative_factor(m, beta), "cancellative");
}

/// Cancellative first factor times size-only second factor.
inline Kernel make_mixed(int n, int m, double alpha, double beta) {
  check_exponents(n, m, alpha, beta);
  return make_tensor(cancellative_factor(n, alpha), size_factor(m, beta), "mixed");
}

inline Kernel make_zero(int n, int m, double alpha, double beta) {
  check_exponents(n, m, alpha, beta);
  return make_tensor({FactorFamily::zero, n, alpha, 1.0}, {FactorFamily::zero, m, beta, 1.0}, "zero");
}

/// c * K.
inline Kernel scaled(const Kernel& k, double c) {
  if (k.is_tensor()) {
    KernelFactor f1 = k.first();
    f1.scale *= c;
    Kernel out = make_tensor(f1, k.second(), k.label);
    out.alpha = k.alpha;
    out.beta = k.beta;
    return out;
  }
  Kernel out = k;
  auto ev = k.evaluate;
  out.evaluate = [ev, c](double t1, double t2, const std::vector<double>& x, const std::vector<double>& y) {
    return c * ev(t1, t2, x, y);
  };
  return out;
}

enum class Defect { wrong_alpha, holder_break };

inline Defect parse_defect(const std::string& s) {
  if (s == "wrong_alpha") return Defect::wrong_alpha;
  if (s == "holder_break") return Defect::holder_break;
  throw ConfigError("unknown defect '" + s + "'");
}

/// Negative controls: wrong_alpha makes the first factor decay with alpha/2
/// while still declaring alpha; holder_break puts a jump at u2 = 0 into the
/// second factor.
inline Kernel make_broken(const Kernel& base, const std::vector<Defect>& defects) {
  if (defects.empty()) return base;
  if (!base.is_tensor()) throw ConfigError("broken variants are built from tensor kernels");
  KernelFactor f1 = base.first(), f2 = base.second();
  std::string label = base.label;
  for (Defect d : defects) {
    if (d == Defect::wrong_alpha) {
      f1.family = FactorFamily::wrong_alpha;
      label += "+wrong_alpha";
    } else {
      f2.family = FactorFamily::holder_break;
      label += "+holder_break";
    }
  }
  Kernel k = make_tensor(f1, f2, label);
  k.alpha = base.alpha;
  k.beta = base.beta;
  return k;
}

inline Kernel make_broken(const Kernel& base, Defect d) { return make_broken(base, std::vector<Defect>{d}); }

// ---------------------------------------------------------------------------
// Checkers

struct AssumptionReport {
  std::string condition;
  double estimate = 0.0;
  int samples = 0;
  std::vector<double> worst_point;  ///< (t1, t2, x..., y..., y'...) of the worst sample
  bool pass = false;
  double cap = 0.0;
};

struct CheckOptions {
  double cap = 16.0;
  double max_ratio = 1e8;     ///< largest |x - y| / t sampled
  double log2_t_range = 20;   ///< t sampled log-uniformly in [2^-r, 2^r]
  double min_step = 1e-12;    ///< smallest |y - y'| / t sampled
};

namespace detail {

inline double majorant(double t, double rho, int d, double a) {
  return std::pow(t, a) * std::pow(t + rho, -d - a);
}

inline double sup_norm(const double* u, int d) {
  double r = 0.0;
  for (int a = 0; a < d; ++a) r = std::max(r, std::abs(u[a]));
  return r;
}

/// A point of R^d with |v|_inf = rho and uniformly random direction.
inline void sphere_point(std::mt19937_64& rng, int d, double rho, double* v) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> A(0, d - 1);
  for (int a = 0; a < d; ++a) v[a] = rho * U(rng);
  v[A(rng)] = rho * (U(rng) < 0 ? -1.0 : 1.0);
}

struct Sample {
  double t1, t2;
  std::vector<double> x, y, yp;  ///< yp: y with both slots perturbed
};

/// Random sample; every fourth one sits near the diagonal with steps that
/// straddle it, where violations concentrate.
inline Sample draw_sample(const Kernel& k, const CheckOptions& o, std::uint64_t seed, std::uint64_t i) {
  auto rng = rng_stream(seed, i);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int n = k.n, m = k.m, d = n + m;
  Sample s;
  s.t1 = std::exp2(o.log2_t_range * (2 * U(rng) - 1));
  s.t2 = std::exp2(o.log2_t_range * (2 * U(rng) - 1));
  bool diagonal = (i % 4) == 3;
  double lo = std::log10(o.min_step), hi = std::log10(o.max_ratio);
  std::vector<double> u(d), du(d);
  for (int slot = 0; slot < 2; ++slot) {
    int off = slot == 0 ? 0 : n, dim = slot == 0 ? n : m;
    double t = slot == 0 ? s.t1 : s.t2;
    if (diagonal) {
      double rho = t * std::pow(10.0, lo + (-2 - lo) * U(rng));
      sphere_point(rng, dim, rho, &u[off]);
      for (int a = 0; a < dim; ++a) du[off + a] = 2 * u[off + a];  // y' mirrors y through x
      continue;
    }
    double rho = (U(rng) < 0.125) ? 0.0 : t * std::pow(10.0, -8 + (hi + 8) * U(rng));
    sphere_point(rng, dim, rho, &u[off]);
    double step = 0.5 * t * std::pow(10.0, lo * U(rng)) * (1 - 1e-12);
    sphere_point(rng, dim, step, &du[off]);
  }
  // y sits at the origin so that x - y and x - y' are exact even when |u| is
  // far below the spacing of doubles near a random base point
  s.x = u;
  s.y.assign(d, 0.0);
  s.yp = du;
  return s;
}

inline AssumptionReport run_checker(
    const Kernel& k, int samples, std::uint64_t seed, const CheckOptions& o, const std::string& name,
    const std::function<double(const Sample&)>& ratio) {
  if (samples < 1000) throw ConfigError("checkers need at least 1000 samples");
  std::vector<double> r(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    Sample s = draw_sample(k, o, seed, i);
    double v = ratio(s);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << name << ": non-finite kernel value at sample " << i << " (t1=" << s.t1 << ", t2=" << s.t2 << ")";
      throw NumericError(os.str());
    }
    r[i] = v;
  });
  AssumptionReport rep;
  rep.condition = name;
  rep.samples = samples;
  rep.cap = o.cap;
  std::size_t worst = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[worst]) worst = i;
  rep.estimate = r[worst];
  Sample s = draw_sample(k, o, seed, worst);
  rep.worst_point = {s.t1, s.t2};
  for (auto* v : {&s.x, &s.y, &s.yp}) rep.worst_point.insert(rep.worst_point.end(), v->begin(), v->end());
  rep.pass = std::isfinite(rep.estimate) && rep.estimate <= o.cap;
  return rep;
}

inline std::vector<double> mix(const std::vector<double>& y, const std::vector<double>& yp, int n, bool first,
                               bool second) {
  std::vector<double> out(y);
  for (std::size_t a = 0; a < y.size(); ++a) {
    bool in_first = static_cast<int>(a) < n;
    if ((in_first && first) || (!in_first && second)) out[a] = yp[a];
  }
  return out;
}

}  // namespace detail

/// sup |K| / (size majorant in both slots).
inline AssumptionReport check_size(const Kernel& k, const Params& p, int samples, std::uint64_t seed,
                                   const CheckOptions& o = {}) {
  (void)p;
  return detail::run_checker(k, samples, seed, o, "size", [&](const detail::Sample& s) {
    std::vector<double> u(s.x.size());
    for (std::size_t a = 0; a < u.size(); ++a) u[a] = s.x[a] - s.y[a];
    double r1 = detail::sup_norm(u.data(), k.n);
    double r2 = detail::sup_norm(u.data() + k.n, k.m);
    double rhs = detail::majorant(s.t1, r1, k.n, k.alpha) * detail::majorant(s.t2, r2, k.m, k.beta);
    return std::abs(k.evaluate(s.t1, s.t2, s.x, s.y)) / rhs;
  });
}

/// Four-term second difference against |dy1|^a |dy2|^b over the size denominators.
inline AssumptionReport check_holder(const Kernel& k, const Params& p, int samples, std::uint64_t seed,
                                     const CheckOptions& o = {}) {
  (void)p;
  return detail::run_checker(k, samples, seed, o, "holder", [&](const detail::Sample& s) {
    int n = k.n, m = k.m;
    auto y12 = detail::mix(s.y, s.yp, n, false, true);  // (y1, y2')
    auto y21 = detail::mix(s.y, s.yp, n, true, false);  // (y1', y2)
    double lhs = std::abs(k.evaluate(s.t1, s.t2, s.x, s.y) - k.evaluate(s.t1, s.t2, s.x, y12) -
                          k.evaluate(s.t1, s.t2, s.x, y21) + k.evaluate(s.t1, s.t2, s.x, s.yp));
    std::vector<double> u(s.x.size()), du(s.x.size());
    for (std::size_t a = 0; a < u.size(); ++a) {
      u[a] = s.x[a] - s.y[a];
      du[a] = s.yp[a] - s.y[a];
    }
    double rhs = std::pow(detail::sup_norm(du.data(), n), k.alpha) *
                 std::pow(s.t1 + detail::sup_norm(u.data(), n), -n - k.alpha) *
                 std::pow(detail::sup_norm(du.data() + n, m), k.beta) *
                 std::pow(s.t2 + detail::sup_norm(u.data() + n, m), -m - k.beta);
    return lhs / rhs;
  });
}

/// Both mixed Hoelder/size displays; the larger ratio is reported per sample.
inline AssumptionReport check_mixed(const Kernel& k, const Params& p, int samples, std::uint64_t seed,
                                    const CheckOptions& o = {}) {
  (void)p;
  return detail::run_checker(k, samples, seed, o, "mixed", [&](const detail::Sample& s) {
    int n = k.n, m = k.m;
    auto y12 = detail::mix(s.y, s.yp, n, false, true);
    auto y21 = detail::mix(s.y, s.yp, n, true, false);
    double K0 = k.evaluate(s.t1, s.t2, s.x, s.y);
    std::vector<double> u(s.x.size()), du(s.x.size());
    for (std::size_t a = 0; a < u.size(); ++a) {
      u[a] = s.x[a] - s.y[a];
      du[a] = s.yp[a] - s.y[a];
    }
    double r1 = detail::sup_norm(u.data(), n), r2 = detail::sup_norm(u.data() + n, m);
    double d1 = detail::sup_norm(du.data(), n), d2 = detail::sup_norm(du.data() + n, m);
    double rhs_a = detail::majorant(s.t1, r1, n, k.alpha) * std::pow(d2, k.beta) * std::pow(s.t2 + r2, -m - k.beta);
    double rhs_b = std::pow(d1, k.alpha) * std::pow(s.t1 + r1, -n - k.alpha) * detail::majorant(s.t2, r2, m, k.beta);
    double ra = std::abs(K0 - k.evaluate(s.t1, s.t2, s.x, y12)) / rhs_a;
    double rb = std::abs(K0 - k.evaluate(s.t1, s.t2, s.x, y21)) / rhs_b;
    return std::max(ra, rb);
  });
}

/// Weight integral over an interval: (1/t) * integral over x in [c0, c1] of
/// (t / (t + |x - u|))^p, in closed form.
inline double weight_over_interval(double t, double u, double c0, double c1, double p) {
  auto q = [&](double v) { return std::pow(t / (t + std::abs(v)), p - 1.0); };
  double s;
  if (u <= c0) s = q(c0 - u) - q(c1 - u);
  else if (u >= c1) s = q(u - c1) - q(u - c0);
  else s = 2.0 - q(c1 - u) - q(u - c0);
  return s / (p - 1.0);
}

enum class ComboMode { size, holder };
enum class Slot { first, second };

struct ComboDetail {
  double carleson_factor = 0.0;  ///< A / |I|^(1/2)
  double tail_estimate = 0.0;    ///< share of A^2 below the smallest t node, extrapolated
  int octaves = 0;
};

/// A^2 = integral over t in (0, l(I)) of dt/t, over u of |Phi_t(u)|^2 W_I(u, t),
/// where Phi_t(u) is the factor integrated over the cube and W_I the weight
/// averaged over x in I. One-dimensional tensor factors only.
inline ComboDetail carleson_box_factor(const KernelFactor& f, const DyadicCube& I, double weight_exponent,
                                       const QuadratureSpec& spec) {
  if (f.dim != 1 || I.dim != 1) throw ConfigError("Carleson-box quadrature needs a one-dimensional factor");
  double l = I.side(), c0 = I.lo(0), c1 = I.hi(0);
  int order = spec.smooth_order();
  const int max_octaves = 80;
  std::vector<double> per_octave;
  ComboDetail out;
  for (int o = 0; o < max_octaves; ++o) {
    double thi = std::ldexp(l, -o), tlo = thi / 2;
    Rule1D tr = t_rule(tlo, thi, spec.t_points_per_octave);
    std::vector<double> terms;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      double t = tr.x[k];
      double R = t * std::pow(2.0 / ((weight_exponent - 1) * spec.truncation_eps * 1e-3),
                              1.0 / (weight_exponent - 1)) + l;
      Rule1D ur = graded_rule(c0 - R, c1 + R, {c0, c1}, t / 4, order);
      std::vector<double> inner(ur.size());
      for (std::size_t i = 0; i < ur.size(); ++i) {
        double u = ur.x[i];
        double phi = f.cell_integral(t, u, c0, c1);
        inner[i] = ur.w[i] * phi * phi * weight_over_interval(t, u, c0, c1, weight_exponent);
      }
      terms.push_back(tr.w[k] * pairwise_sum(inner));
    }
    per_octave.push_back(pairwise_sum(terms));
    double total = pairwise_sum(per_octave);
    if (o >= 4) {
      double a = per_octave[o], b = per_octave[o - 1];
      if (total == 0.0) break;
      double ratio = b > 0 ? a / b : 0.0;
      double tail = ratio < 1 ? a * ratio / (1 - ratio) : std::numeric_limits<double>::infinity();
      if (tail <= spec.truncation_eps * total) {
        out.tail_estimate = tail / total;
        out.octaves = o + 1;
        out.carleson_factor = std::sqrt(total / I.volume());
        return out;
      }
    }
  }
  double total = pairwise_sum(per_octave);
  if (total == 0.0) {
    out.octaves = max_octaves;
    return out;
  }
  throw NumericError("quadrature truncation failure: Carleson-box integral of " + f.name() +
                     " does not decay as t -> 0 (tail estimate above tolerance)");
}

/// Samples (x2, y2, z2, t2) [or the first-slot analogue] and reports the sup of
/// the left side over the right side of the Carleson x size (or Hoelder)
/// combination for the cube `cube` in slot `slot`.
inline AssumptionReport check_carleson_combo(const Kernel& k, const Params& p, const DyadicCube& cube,
                                             ComboMode mode, const QuadratureSpec& spec, int samples,
                                             std::uint64_t seed = 0, Slot slot = Slot::first,
                                             const CheckOptions& o = {}, ComboDetail* detail_out = nullptr) {
  if (!k.is_tensor()) throw ConfigError("Carleson combination checker needs a tensor kernel");
  if (samples < 1000) throw ConfigError("checkers need at least 1000 samples");
  const KernelFactor& inner = slot == Slot::first ? k.first() : k.second();
  const KernelFactor& outer = slot == Slot::first ? k.second() : k.first();
  double outer_exp = slot == Slot::first ? k.beta : k.alpha;
  double w_exp = slot == Slot::first ? p.n * p.lambda1 : p.m * p.lambda2;
  bool zero = inner.family == FactorFamily::zero || outer.family == FactorFamily::zero;
  ComboDetail det;
  if (!zero) det = carleson_box_factor(inner, cube, w_exp, spec);
  if (detail_out) *detail_out = det;
  int d = outer.dim;
  std::vector<double> r(samples);
  std::vector<std::vector<double>> pts(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    auto rng = rng_stream(seed, i);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double t = std::exp2(o.log2_t_range * (2 * U(rng) - 1));
    std::vector<double> w(d), dw(d);
    double rho = (i % 4 == 3) ? t * std::pow(10.0, std::log10(o.min_step) * U(rng))
                              : ((U(rng) < 0.125) ? 0.0 : t * std::pow(10.0, -8 + (std::log10(o.max_ratio) + 8) * U(rng)));
    detail::sphere_point(rng, d, rho, w.data());
    double val;
    if (mode == ComboMode::size) {
      val = std::abs(outer.value(t, w)) / detail::majorant(t, rho, d, outer_exp);
    } else {
      if (i % 4 == 3) {
        for (int a = 0; a < d; ++a) dw[a] = 2 * w[a];
      } else {
        double step = 0.5 * t * std::pow(10.0, std::log10(o.min_step) * U(rng)) * (1 - 1e-12);
        detail::sphere_point(rng, d, step, dw.data());
      }
      // w' = x - y - z' with z' = z + dz, so w' = w - dz
      std::vector<double> wp(d);
      for (int a = 0; a < d; ++a) wp[a] = w[a] - dw[a];
      double step = detail::sup_norm(dw.data(), d);
      val = std::abs(outer.value(t, w) - outer.value(t, wp)) * std::pow(t + rho, d + outer_exp) /
            std::pow(step, outer_exp);
    }
    r[i] = zero ? 0.0 : det.carleson_factor * val;
    pts[i] = {t};
    pts[i].insert(pts[i].end(), w.begin(), w.end());
    if (!std::isfinite(r[i])) throw NumericError("non-finite kernel value in Carleson combination");
  });
  AssumptionReport rep;
  rep.condition = std::string("carleson_") + (mode == ComboMode::size ? "size" : "holder") +
                  (slot == Slot::first ? "_first" : "_second");
  rep.samples = samples;
  rep.cap = o.cap;
  std::size_t worst = 0;
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[worst]) worst = i;
  rep.estimate = r[worst];
  rep.worst_point = pts[worst];
  rep.pass = std::isfinite(rep.estimate) && rep.estimate <= o.cap;
  return rep;
}

/// Largest |K - f1 (x) f2| over sampled points, for tensor kernels.
inline double tensor_consistency(const Kernel& k, int samples, std::uint64_t seed) {
  if (!k.is_tensor()) return 0.0;
  double worst = 0.0;
  CheckOptions o;
  for (int i = 0; i < samples; ++i) {
    auto s = detail::draw_sample(k, o, seed, static_cast<std::uint64_t>(i));
    std::vector<double> u(s.x.size());
    for (std::size_t a = 0; a < u.size(); ++a) u[a] = s.x[a] - s.y[a];
    double prod = k.first().value(s.t1, u.data()) * k.second().value(s.t2, u.data() + k.n);
    double v = k.evaluate(s.t1, s.t2, s.x, s.y);
    double scale = std::max(std::abs(prod), 1e-300);
    worst = std::max(worst, std::abs(v - prod) / scale);
  }
  return worst;
}

}  // namespace glstar
