#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

#include "config.hpp"
#include "jacobi.hpp"
#include "loewner.hpp"
#include "mcmc.hpp"
#include "partition.hpp"
#include "sde.hpp"
#include "stats.hpp"

namespace msle {

// ---------------------------------------------------------------------------
// Hitting points

// Bounded coordinate of a hitting point: s = t/(L+t), t = z - x_next.
inline double to_s(const MarkedConfig& cfg, double z) {
  double t = z - cfg.x_next, L = cfg.scale();
  return t / (L + t);
}
inline double from_s(const MarkedConfig& cfg, double s) {
  return cfg.x_next + cfg.scale() * s / (1 - s);
}

// Log density of the hitting points in s-coordinates (Jacobian included).
inline double log_density_s(const MarkedConfig& cfg, Parity p, const std::vector<double>& s) {
  std::vector<double> z(s.size());
  double jac = 0, L = cfg.scale();
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (!(s[j] > 0 && s[j] < 1)) return neg_inf;
    z[j] = from_s(cfg, s[j]);
    jac += std::log(L) - 2 * std::log1p(-s[j]);
  }
  return log_density(cfg, p, z) + jac;
}

// Inverse CDF of a single hitting point: tanh-sinh integrals of the
// s-density between the nodes of a uniform grid, then a bracketed root solve
// inside the cell.
class SingleHitSampler {
 public:
  SingleHitSampler(const MarkedConfig& cfg, Parity p, int cells = 256)
      : cfg_(cfg), p_(p), cells_(cells), ts_(10) {
    if (cfg.count(p) != 1) throw std::invalid_argument("SingleHitSampler needs exactly one point");
    check_integrable(cfg, p);
    ref_ = log_density_s(cfg, p, {0.5});
    cum_.assign(cells + 1, 0.0);
    for (int k = 0; k < cells; ++k)
      cum_[k + 1] = cum_[k] + integral(double(k) / cells, double(k + 1) / cells);
  }

  double cdf_s(double s) const {
    if (s <= 0) return 0;
    if (s >= 1) return 1;
    int k = std::min(cells_ - 1, static_cast<int>(s * cells_));
    return (cum_[k] + integral(double(k) / cells_, s)) / cum_.back();
  }
  double cdf(double z) const { return z <= cfg_.x_next ? 0.0 : cdf_s(to_s(cfg_, z)); }

  double quantile_s(double u) const {
    double target = u * cum_.back();
    int k = static_cast<int>(std::upper_bound(cum_.begin(), cum_.end(), target) - cum_.begin()) - 1;
    k = std::clamp(k, 0, cells_ - 1);
    double a = double(k) / cells_, b = double(k + 1) / cells_;
    double rest = target - cum_[k];
    auto f = [&](double s) { return integral(a, s) - rest; };
    double fa = -rest, fb = cum_[k + 1] - cum_[k] - rest;
    if (fa >= 0) return a;
    if (fb <= 0) return b;
    if (k > 0 && k < cells_ - 1) {
      // smooth cell: Newton with the density as derivative
      auto g = [&](double s) { return std::pair{f(s), density(s)}; };
      double guess = a + (b - a) * rest / (cum_[k + 1] - cum_[k]);
      return boost::math::tools::newton_raphson_iterate(g, guess, a, b, 36);
    }
    std::uintmax_t it = 60;
    auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb,
                                               boost::math::tools::eps_tolerance<double>(40), it);
    return 0.5 * (r.first + r.second);
  }
  double sample(Rng& rng) const { return from_s(cfg_, quantile_s(uniform01(rng))); }

 private:
  // Endpoint singularities only occur at s = 0 and s = 1; those cells use
  // tanh-sinh with the singular end moved to the origin, the rest a fixed
  // 30-point Gauss rule (the density is smooth across a cell).
  double density(double s) const {
    double l = log_density_s(cfg_, p_, {s});
    return std::isfinite(l) ? std::exp(l - ref_) : 0.0;
  }
  double integral(double a, double b) const {
    if (b <= a) return 0;
    auto f = [&](double s) { return density(s); };
    if (a == 0) return ts_.integrate(f, 0.0, b);
    if (b == 1) return ts_.integrate([&](double u) { return f(1 - u); }, 0.0, 1 - a);
    return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
  }
  MarkedConfig cfg_;
  Parity p_;
  int cells_;
  double ref_ = 0;
  std::vector<double> cum_;
  mutable boost::math::quadrature::tanh_sinh<double> ts_;
};

struct HittingBatch {
  std::vector<std::vector<double>> draws;  // each increasing, > x_next
  bool used_mcmc = false;
  double gelman_rubin = 1;
  bool converged = true;
};

// Draws from the hitting density r (odd) or rho (even): empty tuples for
// count 0, inverse CDF for count 1, Metropolis in s-coordinates otherwise
// (or whenever force_mcmc is set).
inline HittingBatch sample_hitting_batch(const MarkedConfig& cfg, Parity p, std::size_t n,
                                         std::uint64_t seed, bool force_mcmc = false) {
  cfg.validate();
  HittingBatch out;
  int c = cfg.count(p);
  if (c == 0) {
    out.draws.assign(n, {});
    return out;
  }
  check_integrable(cfg, p);
  if (c == 1 && !force_mcmc) {
    SingleHitSampler smp(cfg, p);
    out.draws.resize(n);
    const std::size_t block = 1024;
    parallel_for((n + block - 1) / block, [&](std::size_t b) {
      Rng rng = make_rng(seed, b);
      for (std::size_t i = b * block; i < std::min(n, (b + 1) * block); ++i)
        out.draws[i] = {smp.sample(rng)};
    });
    return out;
  }
  auto rep = ordered_simplex_mcmc(
      c, [&](const std::vector<double>& s) { return log_density_s(cfg, p, s); }, n, seed);
  out.used_mcmc = true;
  out.gelman_rubin = rep.gelman_rubin;
  out.converged = rep.converged;
  for (auto& s : rep.draws) {
    std::vector<double> z;
    for (double v : s) z.push_back(from_s(cfg, v));
    out.draws.push_back(std::move(z));
  }
  return out;
}

inline std::vector<double> sample_hitting_points(const MarkedConfig& cfg, Parity p,
                                                 std::uint64_t seed, bool force_mcmc = false) {
  int c = cfg.count(p);
  if (c == 0) return {};
  if (c == 1 && !force_mcmc) {
    SingleHitSampler smp(cfg, p, 64);
    Rng rng = make_rng(seed);
    return {smp.sample(rng)};
  }
  auto b = sample_hitting_batch(cfg, p, 1, seed, true);
  if (!b.converged) throw std::runtime_error("hitting-point MCMC did not converge");
  return b.draws.front();
}

// ---------------------------------------------------------------------------
// Curve systems

struct SystemOptions {
  Parity start = Parity::odd;  // construction used for the outermost curve
  FlowLineOptions flow;        // flow.trace_vertices > 0 also returns polylines
};

struct CurveSystem {
  int N = 0;
  std::vector<double> endpoints;         // endpoints[j-1]: landing point of curve j
  std::vector<TracePolyline> curves;     // curves[j-1], original coordinates (if requested)
  std::vector<Parity> parity_history;    // stage k samples curve N-k
  std::vector<std::vector<double>> hits; // hitting points drawn at each stage (stage coordinates)

  // e_N < e_{N-1} < ... < e_1, all beyond x_next
  bool interlaced(double x_next) const {
    for (int j = 0; j < N; ++j) {
      if (!(endpoints[j] > x_next)) return false;
      if (j > 0 && !(endpoints[j] < endpoints[j - 1])) return false;
    }
    return true;
  }
  // endpoints of curves N, N-2, ... (w-type) and N-1, N-3, ... (z-type), increasing
  std::vector<double> w_type() const {
    std::vector<double> v;
    for (int j = N; j >= 1; j -= 2) v.push_back(endpoints[j - 1]);
    return v;
  }
  std::vector<double> z_type() const {
    std::vector<double> v;
    for (int j = N - 1; j >= 1; j -= 2) v.push_back(endpoints[j - 1]);
    return v;
  }
};

namespace detail {

inline bool segments_cross(cplx a, cplx b, cplx c, cplx d) {
  auto cross = [](cplx u, cplx v) { return u.real() * v.imag() - u.imag() * v.real(); };
  double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace detail

// True if two polylines have a proper segment crossing.
inline bool polylines_cross(const TracePolyline& a, const TracePolyline& b) {
  for (std::size_t i = 0; i + 1 < a.vertices.size(); ++i)
    for (std::size_t j = 0; j + 1 < b.vertices.size(); ++j)
      if (detail::segments_cross(a.vertices[i], a.vertices[i + 1], b.vertices[j], b.vertices[j + 1]))
        return true;
  return false;
}

// Longest chord of a polyline.
// Distance between curves modulo reparametrization, bounded above by the
// discrete Frechet distance of the vertex sequences.
inline double curve_distance(const TracePolyline& a, const TracePolyline& b) {
  return frechet_distance(a.vertices, b.vertices);
}

inline double trace_resolution(const TracePolyline& a) {
  double r = 0;
  for (std::size_t i = 0; i + 1 < a.vertices.size(); ++i) r = std::max(r, std::abs(a.vertices[i + 1] - a.vertices[i]));
  return r;
}

// How far `inner` leaves the region enclosed by `outer` and the real segment
// joining its ends: the largest distance from that region of an inner vertex.
// Zero for properly nested curves.
inline double crossing_depth(const TracePolyline& outer, const TracePolyline& inner) {
  namespace bg = boost::geometry;
  using pt = bg::model::d2::point_xy<double>;
  bg::model::polygon<pt, false, false> poly;  // counterclockwise, open
  for (auto z : outer.vertices) poly.outer().emplace_back(z.real(), z.imag());
  // close along the real axis below the landing point
  poly.outer().emplace_back(outer.vertices.back().real(), 0.0);
  if (bg::area(poly) < 0) bg::reverse(poly);
  double depth = 0;
  for (auto z : inner.vertices) depth = std::max(depth, double(bg::distance(pt(z.real(), z.imag()), poly)));
  return depth;
}

// Outermost-first cascade. Each stage draws hitting points for the current
// parity, runs the flow-line marginal of the outermost curve up to its
// hitting time tau, and hands the rest to the other construction on the
// configuration (g_tau(x_1), ..., g_tau(x_{N-1}); W_tau). Landing points and
// polylines are pulled back through the stored stage maps.
inline CurveSystem sample_system(const MarkedConfig& cfg0, std::uint64_t seed,
                                 const SystemOptions& opt = {}) {
  cfg0.validate();
  CurveSystem sys;
  sys.N = cfg0.N();
  sys.endpoints.assign(sys.N, 0.0);
  if (opt.flow.trace_vertices > 0) sys.curves.resize(sys.N);
  std::vector<DrivingPath> stages;
  auto pull_back = [&](double x) {
    for (std::size_t s = stages.size(); s-- > 0;) x = invert_map(stages[s], stages[s].end_time(), x);
    return x;
  };
  auto pull_back_c = [&](cplx z) {
    for (std::size_t s = stages.size(); s-- > 0;) {
      z = z.imag() > 0 ? invert_map(stages[s], stages[s].end_time(), z)
                       : cplx(invert_map(stages[s], stages[s].end_time(), z.real()), 0.0);
    }
    return z;
  };
  MarkedConfig cur = cfg0;
  Parity parity = opt.start;
  for (int stage = 0; stage < sys.N; ++stage) {
    int level = cur.N();
    auto hits = sample_hitting_points(cur, parity, replica_seed(seed, 2 * stage));
    FlowLineOptions fo = opt.flow;
    fo.trace_vertices = 0;  // traced below, in original coordinates
    auto fl = sample_flow_line_marginal(level, cur, hits, parity, replica_seed(seed, 2 * stage + 1), fo);
    sys.parity_history.push_back(parity);
    sys.hits.push_back(hits);
    sys.endpoints[level - 1] = pull_back(fl.landing);
    if (opt.flow.trace_vertices > 0)
      sys.curves[level - 1] = trace_curve(fl.run.driver, opt.flow.trace_vertices, pull_back_c);
    if (level == 1) break;
    const auto& run = fl.run;
    double W = run.driver.values.back();
    if (cur.collapsed) {
      cur = MarkedConfig::same_point(cur.kappa, level - 1, run.force_paths[0].back(), W);
    } else {
      // left force paths are x_{N-1}, ..., x_1 in that order
      std::vector<double> xs(level - 1);
      for (int i = 0; i < level - 1; ++i) xs[level - 2 - i] = run.force_paths[i].back();
      cur = MarkedConfig::spread(cur.kappa, std::move(xs), W);
    }
    stages.push_back(run.driver);
    parity = flip(parity);
  }
  return sys;
}

struct Ensemble {
  std::vector<CurveSystem> systems;
  std::size_t discarded = 0;  // replicates lost to ill-conditioned pull-backs
  std::vector<std::string> log;
};

inline Ensemble sample_ensemble(const MarkedConfig& cfg, std::size_t n, std::uint64_t seed,
                                const SystemOptions& opt = {}) {
  std::vector<std::optional<CurveSystem>> got(n);
  std::vector<std::string> errs(n);
  parallel_for(n, [&](std::size_t r) {
    try {
      got[r] = sample_system(cfg, replica_seed(seed, r), opt);
    } catch (const LoewnerError& e) {
      errs[r] = "replicate " + std::to_string(r) + ": " + e.what();
    }
  });
  Ensemble out;
  for (std::size_t r = 0; r < n; ++r) {
    if (got[r]) out.systems.push_back(std::move(*got[r]));
    else {
      ++out.discarded;
      out.log.push_back(errs[r]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification

struct MarginalCheck {
  std::string name;
  double ks = 0;
  double mean_s = 0, mean_s_ref = 0;  // mean of the bounded coordinate s
  BootstrapResult mean_s_ci;          // bootstrap CI of mean_s
  double second_s = 0, second_s_ref = 0;
};

struct HittingLawReport {
  std::vector<MarginalCheck> marginals;
  std::size_t replicates = 0, reference = 0, discarded = 0;
  std::size_t interlaced = 0;  // replicates with e_N < ... < e_1
  double max_ks() const {
    double m = 0;
    for (auto& c : marginals) m = std::max(m, c.ks);
    return m;
  }
};

namespace detail {

inline MarginalCheck compare_marginal(const std::string& name, const MarkedConfig& cfg,
                                      const std::vector<double>& sample,
                                      const std::vector<double>& ref, std::uint64_t seed) {
  MarginalCheck c;
  c.name = name;
  c.ks = ks_statistic(sample, ref);
  std::vector<double> s, s2, r, r2;
  for (double v : sample) {
    s.push_back(to_s(cfg, v));
    s2.push_back(s.back() * s.back());
  }
  for (double v : ref) {
    r.push_back(to_s(cfg, v));
    r2.push_back(r.back() * r.back());
  }
  c.mean_s = mean(s);
  c.mean_s_ref = mean(r);
  c.second_s = mean(s2);
  c.second_s_ref = mean(r2);
  c.mean_s_ci = bootstrap(s, [](std::span<const double> x) { return mean(x); }, 500, seed);
  return c;
}

}  // namespace detail

// Cascade endpoints against direct draws of the hitting densities: curves
// N, N-2, ... against rho (w), curves N-1, N-3, ... against r (z). The
// reference sample is ref_factor times larger than the replicate count.
inline HittingLawReport verify_hitting_law(const MarkedConfig& cfg, std::size_t n,
                                           std::uint64_t seed, const SystemOptions& opt = {},
                                           std::size_t ref_factor = 10) {
  auto ens = sample_ensemble(cfg, n, seed, opt);
  HittingLawReport rep;
  rep.replicates = ens.systems.size();
  rep.discarded = ens.discarded;
  for (auto& s : ens.systems) rep.interlaced += s.interlaced(cfg.x_next);
  rep.reference = ref_factor * n;
  for (Parity p : {Parity::even, Parity::odd}) {
    int c = cfg.count(p);
    if (c == 0) continue;
    auto ref = sample_hitting_batch(cfg, p, rep.reference, replica_seed(seed, 1u << 30 | unsigned(p)));
    for (int m = 0; m < c; ++m) {
      std::vector<double> a, b;
      for (auto& s : ens.systems) a.push_back((p == Parity::even ? s.w_type() : s.z_type())[m]);
      for (auto& d : ref.draws) b.push_back(d[m]);
      std::string name = std::string(p == Parity::even ? "w" : "z") + std::to_string(m + 1);
      rep.marginals.push_back(detail::compare_marginal(name, cfg, a, b, seed + m));
    }
  }
  return rep;
}

struct JacobiLinkCheck {
  std::string group;  // "z-type" (curves N-1, N-3, ...) or "w-type" (curves N, N-2, ...)
  JacobiParams stated, derived;
  std::vector<double> ks_stated, ks_derived;  // per ordered coordinate
  double mean = 0, mean_se = 0;               // first coordinate of psi images
  double mean_stated = 0, mean_derived = 0;   // reference means (tridiagonal samples)
  double se_stated = 0, se_derived = 0;       // and their standard errors
  bool in_unit_interval = true;
};

struct JacobiLinkReport {
  int N = 0;
  double kappa = 0;
  std::size_t replicates = 0, discarded = 0;
  std::vector<JacobiLinkCheck> groups;
};

// Same-point systems on (H; 0; 1, inf); psi(z) = 1/z maps endpoints into (0,1).
inline JacobiLinkReport verify_jacobi_link(int N, double kappa, std::size_t n, std::uint64_t seed,
                                           const SystemOptions& opt = {},
                                           std::size_t ref_factor = 10) {
  auto cfg = MarkedConfig::same_point(kappa, N, 0.0, 1.0);
  auto ens = sample_ensemble(cfg, n, seed, opt);
  JacobiLinkReport rep{N, kappa, ens.systems.size(), ens.discarded, {}};
  for (Parity p : {Parity::odd, Parity::even}) {
    int c = cfg.count(p);
    if (c == 0) continue;
    JacobiLinkCheck g;
    g.group = p == Parity::odd ? "z-type" : "w-type";
    g.stated = stated_link_params(N, kappa, p);
    g.derived = derived_link_params(N, kappa, p);
    std::vector<Spectrum> psi;
    for (auto& s : ens.systems) {
      auto e = p == Parity::odd ? s.z_type() : s.w_type();
      Spectrum y;
      for (double v : e) {
        y.push_back(1 / v);
        if (!(y.back() > 0 && y.back() < 1)) g.in_unit_interval = false;
      }
      std::sort(y.begin(), y.end());
      psi.push_back(y);
    }
    auto column = [](const std::vector<Spectrum>& v, int j) {
      std::vector<double> c;
      for (auto& y : v) c.push_back(y[j]);
      return c;
    };
    auto first = column(psi, 0);
    g.mean = mean(first);
    g.mean_se = std_error(first);
    std::size_t m = ref_factor * n;
    auto ts = sample_tridiag(g.stated, m, replica_seed(seed, 7001 + unsigned(p)));
    auto td = g.derived.a > -1 && g.derived.b > -1
                  ? sample_tridiag(g.derived, m, replica_seed(seed, 7003 + unsigned(p)))
                  : std::vector<Spectrum>{};
    g.mean_stated = mean(column(ts, 0));
    g.se_stated = std_error(column(ts, 0));
    if (!td.empty()) {
      g.mean_derived = mean(column(td, 0));
      g.se_derived = std_error(column(td, 0));
    }
    for (int j = 0; j < c; ++j) {
      g.ks_stated.push_back(ks_statistic(column(psi, j), column(ts, j)));
      if (!td.empty()) g.ks_derived.push_back(ks_statistic(column(psi, j), column(td, j)));
    }
    rep.groups.push_back(std::move(g));
  }
  return rep;
}

enum class CascadeWeight { ell, eta };

struct CascadeWeightReport {
  CascadeWeight which = CascadeWeight::ell;
  std::size_t replicates = 0, direct = 0;
  double tv = 0;                       // 50-bin total variation, s-coordinates
  double weight_mean = 0, weight_se = 0;
  double weight_min = 0;
  double ess = 0;                      // (sum w)^2 / sum w^2
  std::size_t nonpositive = 0;
};

// Base curve SLE_kappa(2,...,2; (kappa-6)/2) reweighted at its hitting time
// against the outermost curve of the odd (ell) or even (eta) construction
// sampled directly. Weights:
//   ell: W_{N-1}(g(x_1..x_{N-1}); W_tau) / Z_N(x; x_next)
//   eta: B(2/k,2/k) prod_{i<N} (W_tau - g(x_i))^{-2/k} Z_{N-1}(g(x_1..x_{N-1}); W_tau)
//        / (prod_{i<=N} (x_next - x_i)^{2/k} W_N(x; x_next))
// (g_tau(x_next) = W_tau since x_next is swallowed at tau).
inline CascadeWeightReport verify_cascade_weight(const MarkedConfig& cfg, CascadeWeight which,
                                                 std::size_t n, std::uint64_t seed,
                                                 const FlowLineOptions& opt = {},
                                                 std::size_t direct_factor = 1, int bins = 50) {
  cfg.validate();
  if (cfg.collapsed) throw std::invalid_argument("cascade weight check needs distinct points");
  const int N = cfg.N();
  const double k = cfg.kappa;
  CascadeWeightReport rep;
  rep.which = which;
  double log_den;
  if (which == CascadeWeight::ell) {
    log_den = normalize(cfg, Parity::odd, Method::quadrature).log_value;
  } else {
    log_den = normalize(cfg, Parity::even, N == 1 ? Method::closed_form : Method::quadrature).log_value;
    for (double x : cfg.xs) log_den += 2 / k * std::log(cfg.x_next - x);
  }
  std::vector<double> land(n), w(n);
  parallel_for(n, [&](std::size_t r) {
    auto fl = sample_base_curve(cfg, replica_seed(seed, r), opt);
    double W = fl.run.driver.values.back();
    land[r] = fl.landing;
    if (N == 1) {
      // W_0 = 1 / Z_1 = 1, and the eta weight reduces to 1 by the closed form
      w[r] = std::exp(-log_den + (which == CascadeWeight::eta
                                      ? log_beta_fn(2 / k, 2 / k)
                                      : 0.0));
      return;
    }
    std::vector<double> gx(N - 1);
    for (int i = 0; i < N - 1; ++i) gx[N - 2 - i] = fl.run.force_paths[i].back();
    auto sub = MarkedConfig::spread(k, gx, W);
    double lw;
    if (which == CascadeWeight::ell) {
      lw = normalize(sub, Parity::even, N - 1 == 1 ? Method::closed_form : Method::quadrature).log_value;
    } else {
      lw = log_beta_fn(2 / k, 2 / k) + normalize(sub, Parity::odd, Method::quadrature).log_value;
      for (double g : gx) lw -= 2 / k * std::log(W - g);
    }
    w[r] = std::exp(lw - log_den);
  });
  rep.replicates = n;
  rep.weight_mean = mean(w);
  rep.weight_se = std_error(w);
  rep.weight_min = *std::min_element(w.begin(), w.end());
  for (double v : w) rep.nonpositive += !(v > 0);
  double sw = 0, sw2 = 0;
  for (double v : w) {
    sw += v;
    sw2 += v * v;
  }
  rep.ess = sw * sw / sw2;

  // direct samples of the outermost curve's landing point
  rep.direct = direct_factor * n;
  std::vector<double> direct(rep.direct);
  if (which == CascadeWeight::eta) {
    auto b = sample_hitting_batch(cfg, Parity::even, rep.direct, replica_seed(seed, 1u << 31));
    for (std::size_t i = 0; i < rep.direct; ++i) direct[i] = b.draws[i][0];
  } else {
    parallel_for(rep.direct, [&](std::size_t r) {
      std::uint64_t sd = replica_seed(seed ^ 0x5bd1e995u, r);
      auto z = sample_hitting_points(cfg, Parity::odd, replica_seed(sd, 0));
      direct[r] = sample_flow_line_marginal(N, cfg, z, Parity::odd, replica_seed(sd, 1), opt).landing;
    });
  }
  std::vector<double> edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = double(i) / bins;
  std::vector<double> sb(n), sd(rep.direct), ones(rep.direct, 1.0);
  for (std::size_t i = 0; i < n; ++i) sb[i] = to_s(cfg, land[i]);
  for (std::size_t i = 0; i < rep.direct; ++i) sd[i] = to_s(cfg, direct[i]);
  rep.tv = tv_distance(histogram(sb, w, edges), histogram(sd, ones, edges));
  return rep;
}

// log of prod_{i<j} (y_j - y_i)^{-2/3} prod_i (y_next - y_i)^{1/2} R_N(y; y_next)
inline double log_ising_partition(const std::vector<double>& ys, double y_next) {
  double s = std::log(eval_R(ys, y_next));
  for (std::size_t j = 0; j < ys.size(); ++j) {
    s += 0.5 * std::log(y_next - ys[j]);
    for (std::size_t i = 0; i < j; ++i) s -= 2.0 / 3.0 * std::log(ys[j] - ys[i]);
  }
  return s;
}

struct MartingaleOptions {
  std::vector<double> times;  // evaluation grid (capacity, stage units); default 20 points
  double horizon = 0.5;       // in units of scale^2 (used when times is empty)
  double eps = 0.05;          // stop when g(y_next) - W <= eps * scale
  double K = 10;              // stop when M >= K
  bool stopping = true;       // false: run to the hitting time (negative control)
  FlowLineOptions flow;
  int boot = 500;
};

struct MartingaleReport {
  std::vector<double> times, mean, sigma;  // per grid time: E[M_t]/M_0 and bootstrap sd
  double max_dev = 0;                      // max_t |mean - 1|
  double max_z = 0;                        // max_t |mean - 1| / sigma
  double stopped_eps = 0, stopped_K = 0, hit = 0;  // fractions by stopping reason
};

// Ising martingale M_t at kappa = 3 for l ~ SLE_3(2,...,2; -3/2) from y_N:
// the ratio of the Ising partition function at (g(y_1), ..., g(y_{N-1}), W_t; g(y_next))
// to its initial value.
inline MartingaleReport verify_martingale(const std::vector<double>& ys, double y_next,
                                          std::size_t n, std::uint64_t seed,
                                          MartingaleOptions opt = {}) {
  auto cfg = MarkedConfig::spread(3.0, ys, y_next);
  const int N = cfg.N();
  const double L = cfg.scale();
  if (opt.times.empty())
    for (int i = 1; i <= 20; ++i) opt.times.push_back(opt.horizon * L * L * i / 20);
  const double logM0 = log_ising_partition(ys, y_next);
  const std::size_t G = opt.times.size();
  std::vector<std::vector<double>> M(G, std::vector<double>(n));
  std::vector<int> why(n);
  // force order: left y_{N-1}..y_1, then y_next
  auto logM = [&](double W, const std::vector<double>& V) {
    std::vector<double> a(N);
    for (int i = 0; i < N - 1; ++i) a[N - 2 - i] = V[i];
    a[N - 1] = W;
    return log_ising_partition(a, V[N - 1]) - logM0;
  };
  parallel_for(n, [&](std::size_t r) {
    std::vector<ForcePoint> f;
    for (int i = N - 1; i >= 1; --i) f.push_back({Side::left, ys[i - 1], 2.0, false});
    f.push_back({Side::right, y_next, -1.5, false});
    auto rc = flow_line_run_config(cfg, ys[N - 1], f, opt.flow);
    rc.max_time = opt.times.back();
    int reason = 0;
    if (opt.stopping) {
      rc.observer = [&](double, double W, const std::vector<double>& V) {
        if (V[N - 1] - W <= opt.eps * L) return reason = 1, true;
        if (std::exp(logM(W, V)) >= opt.K) return reason = 2, true;
        return false;
      };
    }
    auto run = sample_driver(rc, replica_seed(seed, r));
    if (run.hit && !opt.stopping) reason = 3;
    why[r] = reason;
    const auto& T = run.driver.times;
    std::vector<double> V(N);
    for (std::size_t g = 0; g < G; ++g) {
      std::size_t k = static_cast<std::size_t>(
                          std::upper_bound(T.begin(), T.end(), opt.times[g] * (1 + 1e-12)) - T.begin()) - 1;
      // at a collision the driver sits on y_next's image; use the step before
      if (k > 0 && !(run.force_paths[N - 1][k] > run.driver.values[k])) --k;
      for (int j = 0; j < N; ++j) V[j] = run.force_paths[j][k];
      M[g][r] = std::exp(logM(run.driver.values[k], V));
    }
  });
  MartingaleReport rep;
  rep.times = opt.times;
  for (std::size_t g = 0; g < G; ++g) {
    auto b = bootstrap(M[g], [](std::span<const double> x) { return mean(x); }, opt.boot,
                       replica_seed(seed, 99 + g));
    double m = mean(M[g]);
    rep.mean.push_back(m);
    rep.sigma.push_back(b.sigma);
    rep.max_dev = std::max(rep.max_dev, std::abs(m - 1));
    rep.max_z = std::max(rep.max_z, std::abs(m - 1) / b.sigma);
  }
  for (int v : why) {
    rep.stopped_eps += v == 1;
    rep.stopped_K += v == 2;
    rep.hit += v == 3;
  }
  rep.stopped_eps /= n;
  rep.stopped_K /= n;
  rep.hit /= n;
  return rep;
}

}  // namespace msle
