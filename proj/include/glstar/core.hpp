#pragma once
// Parameters, dyadic step functions and the quadrature engine shared by every
// other header.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

namespace glstar {

// ---------------------------------------------------------------------------
// Errors

/// Invalid user-supplied configuration (maps to CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a trustworthy value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed step-function file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parameters

/// Smallest r >= 1 with (1/2 - 2^-r) > 2^(-r*gamma).
inline int default_goodness_radius(double gamma) {
  for (int r = 1; r < 200; ++r)
    if (0.5 - std::ldexp(1.0, -r) > std::pow(2.0, -r * gamma)) return r;
  throw ConfigError("no feasible goodness radius for gamma=" + std::to_string(gamma));
}

struct Params {
  int n = 1;
  int m = 1;
  double alpha = 0.5;
  double beta = 0.5;
  double lambda1 = 3.0;
  double lambda2 = 3.0;
  int r = 8;
  double gamma_n = 0.5 / (2.0 * 1.5);
  double gamma_m = 0.5 / (2.0 * 1.5);

  /// Validates and fills the derived exponents. In theorem mode the exponent
  /// constraints of the boundedness theorem are enforced; otherwise a
  /// violation is appended to `warnings`.
  static Params make(int n, int m, double alpha, double beta, double lambda1, double lambda2,
                     int r, bool theorem_mode = false,
                     std::vector<std::string>* warnings = nullptr) {
    if (n < 1 || m < 1) throw ConfigError("dimensions n, m must be >= 1");
    if (!(alpha > 0) || !(beta > 0)) throw ConfigError("alpha and beta must be positive");
    if (!(lambda1 > 1) || !(lambda2 > 1)) throw ConfigError("lambda1 and lambda2 must exceed 1");
    if (r < 1) throw ConfigError("goodness radius r must be >= 1");
    Params p;
    p.n = n;
    p.m = m;
    p.alpha = alpha;
    p.beta = beta;
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    p.r = r;
    p.gamma_n = alpha / (2.0 * (n + alpha));
    p.gamma_m = beta / (2.0 * (m + beta));
    std::string why;
    if (!(lambda1 > 2) || !(lambda2 > 2)) why = "lambda1, lambda2 must exceed 2";
    else if (alpha > n * (lambda1 - 2) / 2) why = "alpha exceeds n*(lambda1-2)/2";
    else if (beta > m * (lambda2 - 2) / 2) why = "beta exceeds m*(lambda2-2)/2";
    if (!why.empty()) {
      if (theorem_mode) throw ConfigError("theorem mode: " + why);
      if (warnings) warnings->push_back(why);
    }
    return p;
  }
};

inline Params default_params() { return Params::make(1, 1, 0.5, 0.5, 3.0, 3.0, 8, true); }

// ---------------------------------------------------------------------------
// Threading and random streams

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

inline void set_threads(int n) { detail::thread_setting() = n; }

inline int thread_count() {
  int n = detail::thread_setting();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, count). Each index writes only its own output
/// slot, so results do not depend on the number of threads.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(failure_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Reproducible random stream keyed by (seed, index).
inline std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x676c7374u};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Summation

/// Pairwise (tree) summation; the order of additions is fixed by the length.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureSpec {
  int points_per_cell = 1;      ///< Gauss-Legendre order per cell (1 = midpoint)
  int t_points_per_octave = 4;  ///< nodes per factor of two on t-axes
  double truncation_eps = 1e-6;
  double t_min = 0x1p-30;
  double t_max = 0x1p30;

  void validate() const {
    if (points_per_cell < 1 || t_points_per_octave < 1)
      throw ConfigError("quadrature counts must be >= 1");
    if (!(t_min > 0) || !(t_min < t_max)) throw ConfigError("quadrature requires 0 < t_min < t_max");
    if (!(truncation_eps > 0 && truncation_eps < 1))
      throw ConfigError("truncation_eps must lie in (0,1)");
  }

  /// Gauss order used on graded cells for smooth kernel integrands.
  int smooth_order() const { return std::min(64, 4 * points_per_cell); }

  /// Doubles both resolution knobs.
  QuadratureSpec refined() const {
    QuadratureSpec s = *this;
    s.points_per_cell *= 2;
    s.t_points_per_octave *= 2;
    return s;
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  ///< difference against the same rule on cells merged pairwise
};

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

/// Gauss-Legendre nodes and weights on [-1, 1].
inline const Rule1D& gauss_legendre(int order) {
  static const std::vector<Rule1D> table = [] {
    std::vector<Rule1D> t(65);
    for (int p = 1; p <= 64; ++p) {
      Rule1D r;
      auto zeros = boost::math::legendre_p_zeros<double>(p);
      for (double z : zeros) {
        double d = boost::math::legendre_p_prime(p, z);
        double w = 2.0 / ((1.0 - z * z) * d * d);
        if (z == 0.0) {
          r.x.push_back(0.0);
          r.w.push_back(w);
        } else {
          r.x.push_back(-z);
          r.w.push_back(w);
          r.x.push_back(z);
          r.w.push_back(w);
        }
      }
      std::vector<std::size_t> idx(r.x.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return r.x[a] < r.x[b]; });
      Rule1D s;
      for (auto i : idx) {
        s.x.push_back(r.x[i]);
        s.w.push_back(r.w[i]);
      }
      t[p] = std::move(s);
    }
    return t;
  }();
  if (order < 1 || order > 64) throw ConfigError("Gauss order must lie in [1, 64]");
  return table[order];
}

/// Appends an order-p Gauss rule on each interval [b[i], b[i+1]].
inline Rule1D rule_on_breaks(const std::vector<double>& breaks, int order) {
  const Rule1D& g = gauss_legendre(order);
  Rule1D out;
  out.x.reserve(breaks.size() * g.size());
  out.w.reserve(breaks.size() * g.size());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = breaks[i], b = breaks[i + 1];
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      out.x.push_back(c + h * g.x[k]);
      out.w.push_back(h * g.w[k]);
    }
  }
  return out;
}

/// Breakpoints on [a, b] that refine geometrically (ratio 2) toward each
/// anchor, starting from cells of size `scale` next to the anchor. Anchors
/// outside [a, b] still grade the part of the interval facing them.
inline std::vector<double> graded_breaks(double a, double b, const std::vector<double>& anchors,
                                         double scale) {
  std::vector<double> br{a, b};
  for (double c : anchors) {
    if (c > a && c < b) br.push_back(c);
    double reach = std::max(std::abs(c - a), std::abs(c - b));
    for (double s = scale; s < reach; s *= 2.0) {
      if (c + s > a && c + s < b) br.push_back(c + s);
      if (c - s > a && c - s < b) br.push_back(c - s);
    }
  }
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

inline Rule1D graded_rule(double a, double b, const std::vector<double>& anchors, double scale,
                          int order) {
  return rule_on_breaks(graded_breaks(a, b, anchors, scale), order);
}

/// Geometric rule for the measure dt/t on [t0, t1]: octaves t0*2^k, each
/// carrying a Gauss rule in log t with `per_octave` nodes.
inline Rule1D t_rule(double t0, double t1, int per_octave) {
  if (!(t0 > 0) || !(t0 < t1)) throw ConfigError("t-rule requires 0 < t0 < t1");
  const Rule1D& g = gauss_legendre(per_octave);
  Rule1D out;
  double s0 = std::log2(t0), s1 = std::log2(t1);
  for (double a = s0; a < s1; a += 1.0) {
    double b = std::min(a + 1.0, s1);
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      out.x.push_back(std::exp2(c + h * g.x[k]));
      out.w.push_back(h * g.w[k] * std::log(2.0));
    }
  }
  return out;
}

/// Nodes of the dt/t rule restricted to one octave (lo, 2*lo).
inline Rule1D octave_rule(double lo, int per_octave) { return t_rule(lo, 2.0 * lo, per_octave); }

/// Radius R such that the tail mass of scale^a (scale + |u|)^(-d-a) beyond
/// |u|_inf = R is below eps. Uses the bound d 2^d (s/(s+R))^a / a.
inline double truncation_radius(double decay_exponent, double scale, double eps, int d = 1) {
  double k = std::pow(d * std::ldexp(1.0, d) / (eps * decay_exponent), 1.0 / decay_exponent);
  return scale * std::max(k - 1.0, 0.0) * (1.0 + 1e-9);
}

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= std::max(hi[i] - lo[i], 0.0);
    return v;
  }
};

namespace detail {
inline double tensor_sum(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<Rule1D>& rules) {
  int d = static_cast<int>(rules.size());
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> pt(d), terms;
  std::size_t total = 1;
  for (auto& r : rules) total *= r.size();
  terms.reserve(total);
  for (std::size_t c = 0; c < total; ++c) {
    double w = 1.0;
    for (int i = 0; i < d; ++i) {
      pt[i] = rules[i].x[idx[i]];
      w *= rules[i].w[idx[i]];
    }
    double v = f(pt);
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite integrand at (";
      for (int i = 0; i < d; ++i) os << (i ? ", " : "") << pt[i];
      os << ")";
      throw NumericError(os.str());
    }
    terms.push_back(w * v);
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < rules[i].size()) break;
      idx[i] = 0;
    }
  }
  return pairwise_sum(terms);
}

inline std::vector<double> every_other(const std::vector<double>& br) {
  std::vector<double> out;
  for (std::size_t i = 0; i < br.size(); i += 2) out.push_back(br[i]);
  if (out.back() != br.back()) out.push_back(br.back());
  return out;
}
}  // namespace detail

/// Tensor-product quadrature over a bounded box. Each axis is split into
/// cells that double in size away from the point of the box nearest the
/// origin, the first cell having side min(scale, axis length).
inline QuadResult integrate_box(const std::function<double(const std::vector<double>&)>& f,
                                const Box& box, const QuadratureSpec& spec, double scale = 1.0) {
  spec.validate();
  std::vector<Rule1D> fine, coarse;
  for (int i = 0; i < box.dim(); ++i) {
    if (!(box.hi[i] > box.lo[i]) || !std::isfinite(box.hi[i] - box.lo[i]))
      throw ConfigError("integrate_box requires a bounded nonempty box");
    double anchor = std::clamp(0.0, box.lo[i], box.hi[i]);
    auto br = graded_breaks(box.lo[i], box.hi[i], {anchor}, scale);
    fine.push_back(rule_on_breaks(br, spec.points_per_cell));
    coarse.push_back(rule_on_breaks(detail::every_other(br), spec.points_per_cell));
  }
  QuadResult res;
  res.value = detail::tensor_sum(f, fine);
  std::vector<Rule1D> higher;
  for (int i = 0; i < box.dim(); ++i) {
    double anchor = std::clamp(0.0, box.lo[i], box.hi[i]);
    higher.push_back(rule_on_breaks(graded_breaks(box.lo[i], box.hi[i], {anchor}, scale),
                                    std::min(2 * spec.points_per_cell, 64)));
  }
  // sum of the cell-merging and order-doubling indicators
  res.error = std::abs(res.value - detail::tensor_sum(f, coarse)) +
              std::abs(res.value - detail::tensor_sum(f, higher));
  return res;
}

/// Integrates f(y, t) dy dt over ybox x [t_min, t_max]. The t-axis uses the
/// geometric rule; at each t node the y-axes are graded at scale t.
inline QuadResult integrate_halfspace(
    const std::function<double(const std::vector<double>&, double)>& f, const Box& ybox,
    const QuadratureSpec& spec) {
  spec.validate();
  Rule1D tr = t_rule(spec.t_min, spec.t_max, spec.t_points_per_octave);
  std::vector<double> terms(tr.size()), errs(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    double t = tr.x[k];
    auto r = integrate_box([&](const std::vector<double>& y) { return f(y, t); }, ybox, spec, t);
    terms[k] = tr.w[k] * t * r.value;  // dt = t * (dt/t)
    errs[k] = tr.w[k] * t * r.error;
  }
  return {pairwise_sum(terms), pairwise_sum(errs)};
}

// ---------------------------------------------------------------------------
// Step functions

/// Piecewise constant function on the cells of side 2^-level of a box, with a
/// constant value outside the box.
struct StepFunction {
  int dim = 1;
  int level = 0;
  std::vector<double> lo;               ///< box corner (lattice point)
  std::vector<std::int64_t> counts;     ///< cells per axis
  std::vector<double> values;           ///< row-major, last axis fastest
  double tail = 0.0;

  StepFunction() = default;
  StepFunction(int level_, std::vector<double> lo_, std::vector<std::int64_t> counts_,
               double tail_ = 0.0)
      : dim(static_cast<int>(lo_.size())), level(level_), lo(std::move(lo_)),
        counts(std::move(counts_)), tail(tail_) {
    if (static_cast<int>(counts.size()) != dim) throw ConfigError("box dimension mismatch");
    for (auto c : counts)
      if (c < 1) throw ConfigError("empty support");
    values.assign(cell_count(), 0.0);
  }

  double side() const { return std::ldexp(1.0, -level); }
  std::size_t cell_count() const {
    std::size_t c = 1;
    for (auto k : counts) c *= static_cast<std::size_t>(k);
    return c;
  }
  double hi(int axis) const { return lo[axis] + static_cast<double>(counts[axis]) * side(); }
  double cell_volume() const { return std::pow(side(), dim); }

  /// Row-major offset of a multi-index.
  std::size_t offset(const std::vector<std::int64_t>& idx) const {
    std::size_t o = 0;
    for (int i = 0; i < dim; ++i) o = o * static_cast<std::size_t>(counts[i]) + idx[i];
    return o;
  }

  double operator()(const std::vector<double>& x) const {
    std::size_t o = 0;
    double h = side();
    for (int i = 0; i < dim; ++i) {
      double u = (x[i] - lo[i]) / h;
      if (!(u >= 0) || u >= static_cast<double>(counts[i])) return tail;
      o = o * static_cast<std::size_t>(counts[i]) + static_cast<std::size_t>(std::floor(u));
    }
    return values[o];
  }

  bool same_lattice(const StepFunction& o) const {
    return dim == o.dim && level == o.level && lo == o.lo && counts == o.counts;
  }

  StepFunction& operator+=(const StepFunction& o) {
    if (!same_lattice(o)) throw ConfigError("step functions live on different lattices");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    tail += o.tail;
    return *this;
  }
  friend StepFunction operator+(StepFunction a, const StepFunction& b) { return a += b; }

  StepFunction& operator*=(double c) {
    for (auto& v : values) v *= c;
    tail *= c;
    return *this;
  }

  /// Integral over the box (the tail is not included).
  double box_integral() const { return pairwise_sum(values) * cell_volume(); }

  /// Squared L2 norm; requires tail 0.
  double l2_squared() const {
    if (tail != 0.0) throw NumericError("L2 norm of a function with nonzero tail is infinite");
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = values[i] * values[i];
    return pairwise_sum(sq) * cell_volume();
  }
};

namespace detail {
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("bad number in header: '" + s + "'");
  return v;
}

inline bool little_endian_host() {
  std::uint16_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}
}  // namespace detail

/// Writes magic "GLSF1", a header line "dim level lo... hi... tail" and the
/// cell values as little-endian binary64 in row-major order.
inline void write_step(const std::string& path, const StepFunction& f) {
  if (static_cast<int>(f.counts.size()) != f.dim || f.counts.empty())
    throw ConfigError("empty support");
  for (auto c : f.counts)
    if (c < 1) throw ConfigError("empty support");
  if (f.values.size() != f.cell_count()) throw FormatError("length mismatch: values vs box");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  std::ostringstream hdr;
  hdr << "GLSF1\n" << f.dim << ' ' << f.level;
  for (int i = 0; i < f.dim; ++i) hdr << ' ' << detail::format_double(f.lo[i]);
  for (int i = 0; i < f.dim; ++i) hdr << ' ' << detail::format_double(f.hi(i));
  hdr << ' ' << detail::format_double(f.tail) << '\n';
  std::string h = hdr.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  bool le = detail::little_endian_host();
  for (double v : f.values) {
    unsigned char b[8];
    std::memcpy(b, &v, 8);
    if (!le) std::reverse(b, b + 8);
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw FormatError("write failed for " + path);
}

inline StepFunction read_step(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string magic, header;
  std::getline(in, magic);
  if (magic != "GLSF1") throw FormatError("wrong magic in " + path);
  std::getline(in, header);
  std::istringstream hs(header);
  std::vector<std::string> tok;
  for (std::string s; hs >> s;) tok.push_back(s);
  if (tok.size() < 2) throw FormatError("malformed header");
  int dim = 0, level = 0;
  try {
    dim = std::stoi(tok[0]);
    level = std::stoi(tok[1]);
  } catch (const std::exception&) {
    throw FormatError("malformed header");
  }
  if (dim < 1 || tok.size() != static_cast<std::size_t>(3 + 2 * dim))
    throw FormatError("malformed header");
  std::vector<double> lo(dim);
  std::vector<std::int64_t> counts(dim);
  double h = std::ldexp(1.0, -level);
  for (int i = 0; i < dim; ++i) {
    lo[i] = detail::parse_double(tok[2 + i]);
    double hi = detail::parse_double(tok[2 + dim + i]);
    double c = (hi - lo[i]) / h;
    if (!(c >= 1) || c != std::floor(c)) {
      if (c <= 0) throw FormatError("empty support");
      throw FormatError("box is not a whole number of cells");
    }
    counts[i] = static_cast<std::int64_t>(c);
  }
  double tail = detail::parse_double(tok.back());
  StepFunction f(level, lo, counts, tail);
  bool le = detail::little_endian_host();
  for (auto& v : f.values) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("length mismatch: too few values");
    if (!le) std::reverse(b, b + 8);
    std::memcpy(&v, b, 8);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("length mismatch: trailing bytes");
  return f;
}

}  // namespace glstar
