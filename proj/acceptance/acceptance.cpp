// Acceptance run: one PASS/FAIL line per criterion, with measured runtime.

#include <Eigen/Sparse>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "glstar/cli.hpp"

using namespace glstar;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_seconds, const std::function<Verdict()>& body) {
  detail::Stopwatch sw;
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  double t = sw.seconds();
  bool in_time = t < limit_seconds;
  bool ok = v.pass && in_time;
  if (!ok) ++failures;
  std::printf("criterion %2d %s  %s  [%.2f s / limit %.0f s%s]  %s\n", id, ok ? "PASS" : "FAIL", title.c_str(), t,
              limit_seconds, in_time ? "" : ", over time", v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

struct HaarCheck {
  double ortho = 0.0, parseval = 0.0, recon = 0.0;
};

/// Orthonormality of every member of the single-slot system (sparse Gram on
/// the level-L lattice), Parseval and reconstruction for a random f.
HaarCheck check_haar_system(const HaarDomain& dom, std::uint64_t seed) {
  HaarCheck out;
  StepFunction f = dom.lattice();
  auto rng = rng_stream(seed, 0);
  std::normal_distribution<double> G;
  for (auto& v : f.values) v = G(rng);
  HaarExpansion e = expand(f, dom);
  StepFunction g = reconstruct(e);
  for (std::size_t i = 0; i < f.values.size(); ++i) out.recon = std::max(out.recon, std::abs(f.values[i] - g.values[i]));
  out.parseval = std::abs(e.sum_of_squares() - f.l2_squared()) / f.l2_squared();
  if (dom.top_second) return out;
  StepFunction lat = dom.lattice();
  int d = lat.dim;
  double h = lat.side();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < e.entries.size(); ++r) {
    StepFunction hf = haar_function(e.entries[r].first);
    const DyadicCube& I = e.entries[r].first.cube;
    std::int64_t per = std::int64_t(1) << (dom.L - I.level);
    std::vector<std::int64_t> base(d), idx(d);
    for (int a = 0; a < d; ++a) base[a] = std::llround((I.lo(a) - lat.lo[a]) / h);
    std::int64_t total = 1;
    for (int a = 0; a < d; ++a) total *= per;
    for (std::int64_t c = 0; c < total; ++c) {
      std::int64_t rem = c;
      std::vector<double> centre(d);
      for (int a = d - 1; a >= 0; --a) {
        idx[a] = base[a] + rem % per;
        rem /= per;
        centre[a] = lat.lo[a] + (idx[a] + 0.5) * h;
      }
      trip.emplace_back(static_cast<int>(r), static_cast<int>(lat.offset(idx)), hf(centre));
    }
  }
  Eigen::SparseMatrix<double> H(static_cast<int>(e.entries.size()), static_cast<int>(lat.cell_count()));
  H.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseMatrix<double> Gm = (H * H.transpose()) * lat.cell_volume();
  Eigen::MatrixXd D = Eigen::MatrixXd(Gm) - Eigen::MatrixXd::Identity(Gm.rows(), Gm.cols());
  out.ortho = D.cwiseAbs().maxCoeff();
  return out;
}

HaarDomain one_slot(int dim, int L, std::uint64_t seed) {
  HaarDomain d{ShiftedGrid::random(dim, -2, L, seed), {}, std::nullopt, std::nullopt, L};
  d.top_first = make_cube(d.grid_first, 0, std::vector<std::int64_t>(dim, 0));
  return d;
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string json_without_timestamp(const std::filesystem::path& p) {
  auto j = json::parse(slurp(p));
  j.erase("timestamp");
  return j.dump();
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"glstar"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream sink;
  return run(static_cast<int>(argv.size()), argv.data(), sink, sink);
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const Params p = default_params();
  const QuadratureSpec spec;
  const std::uint64_t seed = 20261016;
  Kernel canc = make_cancellative(1, 1, p.alpha, p.beta);
  Kernel size = make_size_only(1, 1, p.alpha, p.beta);

  criterion(1, "Haar orthonormality, Parseval, reconstruction (levels <= 6, 1D and 2D)", 10, [&] {
    HaarCheck worst;
    for (int L = 0; L <= 6; ++L)
      for (int dim : {1, 2}) {
        auto c = check_haar_system(one_slot(dim, L, seed + L), seed + 10 * L + dim);
        worst.ortho = std::max(worst.ortho, c.ortho);
        worst.parseval = std::max(worst.parseval, c.parseval);
        worst.recon = std::max(worst.recon, c.recon);
      }
    for (int L = 0; L <= 6; ++L) {
      HaarDomain d = one_slot(1, L, seed + 100 + L);
      d.grid_second = ShiftedGrid::random(1, -2, L, seed + 200 + L);
      d.top_second = make_cube(*d.grid_second, 0, {0});
      auto c = check_haar_system(d, seed + 300 + L);
      worst.parseval = std::max(worst.parseval, c.parseval);
      worst.recon = std::max(worst.recon, c.recon);
    }
    bool ok = worst.ortho <= 1e-12 && worst.parseval <= 1e-12 && worst.recon <= 1e-12;
    return Verdict{ok, "max |<h,h'> - delta| = " + fmt("%.2e", worst.ortho) + ", Parseval rel = " +
                           fmt("%.2e", worst.parseval) + ", reconstruction max = " + fmt("%.2e", worst.recon)};
  });

  criterion(2, "Whitney partition of random boxes (20 draws x 50 boxes)", 10, [&] {
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
      int dim = 1 + draw % 2;
      ShiftedGrid g = ShiftedGrid::random(dim, -4, 12, seed, draw);
      auto rng = rng_stream(seed + 1, draw);
      std::uniform_real_distribution<double> U(-3, 3), T(0, 1);
      for (int b = 0; b < 50; ++b) {
        HalfspaceBox B;
        for (int a = 0; a < dim; ++a) {
          double x = U(rng), y = U(rng);
          B.lo.push_back(std::min(x, y));
          B.hi.push_back(std::max(x, y) + 1e-3);
        }
        B.t0 = std::ldexp(1.0, -12) + T(rng) * 0.5;
        B.t1 = B.t0 + T(rng) * 8;
        worst = std::max(worst, std::abs(whitney_partition_sum(g, B) - B.measure()) / B.measure());
      }
    }
    return Verdict{worst <= 1e-12, "max relative deviation " + fmt("%.2e", worst)};
  });

  criterion(3, "Averaging over good Whitney regions (1000 draws, r = 8)", 60, [&] {
    auto r = run_averaging(p, {}, seed);
    std::string d = "partition max error " + fmt("%.2e", r.summary["partition_max_error"].get<double>()) +
                    ", pi_good = " + fmt("%.4f", r.summary["pi_good"].get<double>());
    if (r.summary.contains("aborted"))
      d += ", aborted: " + r.summary["aborted"].get<std::string>();
    else
      d += ", estimate " + fmt("%.6f", r.summary["estimate"].get<double>()) + " vs ln 2";
    return Verdict{r.pass, d};
  });

  criterion(4, "pi_good positivity at r = 8, zero at r = 2, monotone in r", 120, [&] {
    auto r = run_pigood(p, {}, seed);
    return Verdict{r.pass, "estimate " + fmt("%.4f", r.summary["estimate"].get<double>()) + " +- " +
                               fmt("%.4f", r.summary["ci_halfwidth"].get<double>()) + ", exhaustive at r = 2: " +
                               fmt("%.1f", r.summary["exhaustive_at_r_low"].get<double>()) + ", monotonicity violations " +
                               std::to_string(r.summary["monotonicity_violations"].get<long>())};
  });

  criterion(5, "Schur operator norm saturation (nested collections to 512 cubes)", 60, [&] {
    auto r = run_schur(p, {}, seed);
    return Verdict{r.pass, "final doubling growth " + fmt("%.4f", r.summary["last_doubling_growth"].get<double>()) +
                               ", singleton norm " + fmt("%.17g", r.summary["singleton_norm"].get<double>()) +
                               ", vector violations " + std::to_string(r.summary["vector_violations"].get<int>())};
  });

  criterion(6, "Off-diagonal decay ratio stable under quadrature refinement (100 configs)", 180, [&] {
    auto r = run_lemma32(p, random_lemma32_configs(100, seed), spec, seed);
    return Verdict{r.pass, "max ratio " + fmt("%.6f", r.summary["max_ratio"].get<double>()) + " -> " +
                               fmt("%.6f", r.summary["max_ratio_refined"].get<double>()) + " (change " +
                               fmt("%.2e", r.summary["refinement_change"].get<double>()) + ")"};
  });

  criterion(7, "K and Q decay in k (slope -alpha/2 for k > r, Theta(1) for k <= r)", 180, [&] {
    auto found = best_goodness_cube(p, 14, 1000, seed);
    auto r = run_kdecay(p, canc, found.cube, found.grid, {}, spec, seed);
    auto num = [&](const char* k) {
      const auto& v = r.summary[k];
      return v.is_number() ? fmt("%.4f", v.get<double>()) : v.get<std::string>();
    };
    return Verdict{r.pass, std::string("cube good: ") + (found.good ? "yes" : "no") + " (best margin " +
                               fmt("%.3f", found.margin) + "), slope K " + num("slope_K") + ", slope Q " +
                               num("slope_Q") + ", target " + num("target_slope") + ", Theta(1) K/Q: " +
                               (r.summary["K_theta1_for_k_le_r"].get<bool>() ? "yes" : "no") + "/" +
                               (r.summary["Q_theta1_for_k_le_r"].get<bool>() ? "yes" : "no")};
  });

  criterion(8, "C_IJ for the size-only kernel (unit cubes, three scales)", 60, [&] {
    GridPair gp{ShiftedGrid::standard_grid(1, -4, 8), ShiftedGrid::standard_grid(1, -4, 8)};
    const double target = 16.0 * std::log(2.0) * std::log(2.0);
    DyadicCube I0 = make_cube(gp.first, 0, {0}), J0 = make_cube(gp.second, 0, {0});
    double unit = c_ij(size, I0, J0, p, spec, CijRoute::quadrature);
    double closed = c_ij(size, I0, J0, p, spec, CijRoute::closed_form);
    double worst = 0.0;
    for (auto [j1, j2] : {std::pair{1, 0}, std::pair{2, 1}, std::pair{-1, 3}}) {
      auto I = make_cube(gp.first, j1, {1}), J = make_cube(gp.second, j2, {-2});
      double q = c_ij(size, I, J, p, spec, CijRoute::quadrature);
      worst = std::max(worst, std::abs(q / (I.volume() * J.volume()) / unit - 1.0));
    }
    bool abs_ok = std::abs(unit - target) <= 0.01 * target;
    bool prop_ok = worst <= 0.01;
    return Verdict{abs_ok && prop_ok, "quadrature " + fmt("%.6f", unit) + ", closed form " + fmt("%.6f", closed) +
                                          ", expected " + fmt("%.4f", target) + (abs_ok ? " (match)" : " (mismatch)") +
                                          ", proportionality deviation " + fmt("%.2e", worst)};
  });

  criterion(9, "Carleson dichotomy (cancellative passes, size-only grows as (L+1)^2)", 120, [&] {
    auto r = run_carleson(p, {canc, size}, {}, seed, spec);
    const auto& k = r.summary["kernels"];
    double canc_cij = k["cancellative"]["max_cij"].get<double>(), canc_ratio = k["cancellative"]["max_ratio"].get<double>();
    double dev = k["size_only"]["unit_square_max_count_deviation"].get<double>();
    bool ok = k["cancellative"]["pass"].get<bool>() && canc_cij <= 1e-10 && canc_ratio == 0.0 &&
              !k["size_only"]["pass"].get<bool>() && dev <= 0.05;
    return Verdict{ok, "cancellative max C_IJ " + fmt("%.1e", canc_cij) + ", max ratio " + fmt("%.1e", canc_ratio) +
                           "; size-only flagged: " + (k["size_only"]["pass"].get<bool>() ? "no" : "yes") +
                           ", (L+1)^2 count deviation " + fmt("%.2e", dev)};
  });

  criterion(10, "Bound-ratio saturation and kernel homogeneity (200 functions, levels 4..7)", 300, [&] {
    auto r = run_boundratio(p, canc, {}, seed, spec);
    if (r.summary.contains("aborted")) return Verdict{false, r.summary["aborted"].get<std::string>()};
    const auto& m = r.summary["max_ratio_per_level"];
    return Verdict{r.pass, "max ratio per level " + fmt("%.7f", m[0].get<double>()) + " .. " +
                               fmt("%.7f", m[m.size() - 1].get<double>()) + ", change 6->7 " +
                               fmt("%.2e", r.summary["top_level_change"].get<double>()) + ", homogeneity deviation " +
                               fmt("%.1e", r.summary["homogeneity_deviation"].get<double>())};
  });

  criterion(11, "Case decomposition inequality and separated/nested/adjacent partition", 180, [&] {
    bool ok = true;
    std::string d;
    for (int L : {3, 4}) {
      auto r = run_cases(p, canc, detail::random_unit_step(L, seed, 0), seed + L, spec);
      ok = ok && r.pass;
      const auto& t = r.summary["tag_counts"];
      d += "L=" + std::to_string(L) + ": G " + fmt("%.4f", r.summary["G"].get<double>()) + " <= " +
           fmt("%.4f", r.summary["four_times_pieces"].get<double>()) + ", tags " +
           std::to_string(t["separated"].get<long>()) + "+" + std::to_string(t["nested"].get<long>()) + "+" +
           std::to_string(t["adjacent"].get<long>()) + "=" + std::to_string(t["ge_pairs"].get<long>()) + "; ";
    }
    return Verdict{ok, d};
  });

  criterion(12, "Kernel assumption checkers (families pass, defects flagged)", 60, [&] {
    auto r = run_kernelcheck(p, {}, seed);
    std::string d;
    for (const auto& [name, v] : r.summary["kernels"].items())
      d += name + (v["all_pass"].get<bool>() ? " pass" : " flagged") + "; ";
    d += "tensor consistency " + fmt("%.1e", r.summary["tensor_consistency"].get<double>());
    return Verdict{r.pass, d};
  });

  criterion(13, "Byte-identical reruns of the averaging and boundratio runs", 600, [&] {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "glstar-acceptance";
    fs::remove_all(dir);
    bool same = true;
    std::string d;
    for (const std::string name : {"averaging", "boundratio"}) {
      std::vector<std::string> csv, js;
      for (int rep = 0; rep < 2; ++rep) {
        fs::path out = dir / std::to_string(rep);
        int code = cli({name, "--seed", "5", "--out", out.string(), "--quiet"});
        if (code == 2) return Verdict{false, name + " run rejected its configuration"};
        csv.push_back(slurp(out / (name + "-5.csv")));
        js.push_back(json_without_timestamp(out / (name + "-5.json")));
      }
      bool s = !csv[0].empty() && csv[0] == csv[1] && js[0] == js[1];
      same = same && s;
      d += name + (s ? " identical; " : " differs; ");
    }
    return Verdict{same, d};
  });

  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
