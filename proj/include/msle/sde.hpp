#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "config.hpp"
#include "loewner.hpp"
#include "rng.hpp"

namespace msle {

enum class Side { left, right };

struct ForcePoint {
  Side side = Side::right;
  double location = 0;
  double weight = 0;
  bool prime_end = false;  // left prime end: placed at start - eps_prime*scale
};

enum class StopKind { fixed_horizon, hit_interval, hit_radius };

struct StopRule {
  StopKind kind = StopKind::fixed_horizon;
  double a = 0, b = std::numeric_limits<double>::infinity();
  double radius = 0;

  static StopRule horizon() { return {}; }
  static StopRule interval(double a, double b = std::numeric_limits<double>::infinity()) {
    return {StopKind::hit_interval, a, b, 0};
  }
  static StopRule ball(double r) { return {StopKind::hit_radius, 0, 0, r}; }
};

enum class HitReason { hit_interval, hit_radius, absorption, observer, step_limit };

inline const char* to_string(HitReason r) {
  switch (r) {
    case HitReason::hit_interval: return "hit-interval";
    case HitReason::hit_radius: return "hit-radius";
    case HitReason::absorption: return "boundary-absorption";
    case HitReason::observer: return "observer";
    case HitReason::step_limit: return "step-limit";
  }
  return "?";
}

struct HitRecord {
  double hit_time = 0;
  double hit_point = 0;  // W at the stopping time
  HitReason reason = HitReason::hit_interval;
  int force_index = -1;  // force point that collided, if any
};

// Called after every step with (t, W, V); returning true stops the run.
using StepObserver = std::function<bool(double, double, const std::vector<double>&)>;

struct SleRunConfig {
  double kappa = 8.0 / 3.0;
  double start = 0;
  std::vector<ForcePoint> forces;
  double dt = 1e-3;
  double max_time = std::numeric_limits<double>::infinity();
  StopRule stop;
  double scale = 0;          // length scale of the configuration; 0 = infer
  double rel_step = 0.1;     // diffusion displacement per step <= rel_step * nearest distance
  double eps_coll = 1e-12;   // collision threshold, relative to (1 + |location|)
  double eps_prime = 1e-9;   // prime-end offset, relative to scale
  std::size_t max_steps = 20'000'000;
  StepObserver observer;

  double length_scale() const {
    if (scale > 0) return scale;
    double s = 0;
    for (auto& f : forces)
      if (!f.prime_end) s = std::max(s, std::abs(f.location - start));
    return s > 0 ? s : 1.0;
  }

  void validate() const {
    if (!(kappa > 0 && kappa < 4)) throw std::invalid_argument("kappa must lie in (0,4)");
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    double last_l = start, last_r = start;
    bool seen_l = false;
    for (auto& f : forces) {
      if (f.side == Side::left) {
        if (f.prime_end) {
          if (seen_l) throw std::invalid_argument("prime end must be the first left force point");
          seen_l = true;
          continue;
        }
        if (f.location > last_l) throw std::invalid_argument("left force points misordered");
        last_l = f.location;
        seen_l = true;
      } else {
        if (f.prime_end) throw std::invalid_argument("prime end must be on the left");
        if (f.location < last_r) throw std::invalid_argument("right force points misordered");
        last_r = f.location;
      }
    }
    if (stop.kind == StopKind::hit_interval && !(stop.b > stop.a))
      throw std::invalid_argument("empty stopping interval");
  }
};

struct SleRun {
  DrivingPath driver;
  std::vector<std::vector<double>> force_paths;  // force_paths[j][k] = V_j(t_k)
  std::optional<HitRecord> hit;
  std::vector<double> initial;                   // V_j(0)
};

// Euler-Maruyama for dW = sqrt(kappa) dB + sum rho_j/(W-V_j) dt. The force
// points follow the exact slit flow of the discretized chain, so they agree
// with evolve_point on the returned driver.
inline SleRun sample_driver(const SleRunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed);
  const double L = cfg.length_scale();
  const std::size_t n = cfg.forces.size();
  std::vector<double> V(n), rho(n), eps(n);
  std::vector<bool> watch(n);
  int a_index = -1;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& f = cfg.forces[j];
    V[j] = f.prime_end ? cfg.start - cfg.eps_prime * L : f.location;
    rho[j] = f.weight;
    eps[j] = cfg.eps_coll * (1.0 + std::abs(V[j]));
    // only points the driver can actually reach are collision candidates
    watch[j] = f.weight < cfg.kappa / 2 - 2;
    if (cfg.stop.kind == StopKind::hit_interval && f.side == Side::right && a_index < 0 &&
        f.location >= cfg.stop.a)
      a_index = static_cast<int>(j);
  }
  if (cfg.stop.kind == StopKind::hit_interval && a_index < 0)
    throw std::invalid_argument("hit-interval stop needs a right force point at the interval start");
  if (a_index >= 0) watch[a_index] = true;

  SleRun run;
  run.initial = V;
  run.force_paths.assign(n, {});
  for (std::size_t j = 0; j < n; ++j) run.force_paths[j].push_back(V[j]);
  run.driver.left_point = true;
  run.driver.times.push_back(0.0);
  run.driver.values.push_back(cfg.start);

  double W = cfg.start, t = 0;
  const double sk = std::sqrt(cfg.kappa);
  auto finish = [&](HitReason r, int idx) {
    run.hit = HitRecord{t, W, r, idx};
  };

  for (std::size_t step = 0;; ++step) {
    if (t >= cfg.max_time * (1 - 1e-15)) break;
    if (step >= cfg.max_steps) {
      finish(HitReason::step_limit, -1);
      break;
    }
    double dmin = std::numeric_limits<double>::infinity(), drift = 0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = W - V[j];
      dmin = std::min(dmin, std::abs(d));
      drift += rho[j] / d;
    }
    double h = cfg.dt;
    if (std::isfinite(dmin)) {
      h = cfg.dt * std::max(1.0, (dmin / L) * (dmin / L));
      double r = cfg.rel_step * dmin;
      h = std::min(h, r * r / cfg.kappa);
      if (drift != 0) h = std::min(h, cfg.rel_step * dmin / std::abs(drift));
    }
    h = std::min(h, cfg.max_time - t);
    double Wn = W + drift * h + sk * std::sqrt(h) * normal(rng);
    int collided = -1;
    for (std::size_t j = 0; j < n; ++j) {
      double Vn = slit_forward(V[j], W, h);
      bool right = V[j] > W;
      // a driver step across a force point means the trace landed there
      if (collided < 0 && ((right && Wn >= Vn) || (!right && Wn <= Vn))) collided = static_cast<int>(j);
      V[j] = Vn;
    }
    if (collided >= 0) Wn = V[collided];
    W = Wn;
    if (!std::isfinite(W)) throw LoewnerError("sample_driver: non-finite driver", step);
    // Close to a collision h can drop below the resolution of t; such steps
    // replace the last sample so the stored times stay strictly increasing.
    if (t + h > t) {
      t += h;
      run.driver.times.push_back(t);
      run.driver.values.push_back(W);
      for (std::size_t j = 0; j < n; ++j) run.force_paths[j].push_back(V[j]);
    } else if (run.driver.times.size() > 1) {
      run.driver.values.back() = W;
      for (std::size_t j = 0; j < n; ++j) run.force_paths[j].back() = V[j];
    }

    if (collided < 0)
      for (std::size_t j = 0; j < n; ++j)
        if (watch[j] && std::abs(W - V[j]) < eps[j]) {
          collided = static_cast<int>(j);
          break;
        }
    if (collided >= 0) {
      bool in_interval = false;
      if (a_index >= 0) {
        double da = V[a_index] - W;
        in_interval = da <= 1e3 * eps[a_index];
      }
      finish(in_interval ? HitReason::hit_interval : HitReason::absorption, collided);
      break;
    }
    if (cfg.stop.kind == StopKind::hit_radius && (step % 32 == 0) &&
        std::abs(trace_tip(run.driver, run.driver.steps())) >= cfg.stop.radius) {
      finish(HitReason::hit_radius, -1);
      break;
    }
    if (cfg.observer && cfg.observer(t, W, V)) {
      finish(HitReason::observer, -1);
      break;
    }
  }
  return run;
}

// Real point where the stopped trace meets the target interval.
//
// A force point of weight <= kappa/2 - 4 whose image is within 1e-5 * scale
// of the driver is where the curve ends: the run can stop at the mouth of a
// near-closed pocket (a near-touch of the boundary on either side of it)
// while in the continuum the curve goes on to that point. Otherwise the
// landing point is the right end of the swallowed part of the interval,
// found by a bracketed root solve on the monotone real map q -> g_T(q) - W_T.
inline double landing_point(const SleRun& run, const SleRunConfig& cfg) {
  if (!run.hit) throw std::invalid_argument("landing_point: run did not stop");
  const auto& d = run.driver;
  const double W = d.values.back(), T = d.end_time();
  const double merge = 1e-5 * cfg.length_scale();
  for (std::size_t j = 0; j < cfg.forces.size(); ++j) {
    const auto& f = cfg.forces[j];
    if (f.side == Side::right && f.weight <= cfg.kappa / 2 - 4 &&
        run.force_paths[j].back() - W <= merge)
      return f.location;
  }
  const double thr = 10 * cfg.eps_coll * (1 + std::abs(W));
  auto f = [&](double q) { return forward_map(d, T, q) - W - thr; };
  double lo = cfg.stop.kind == StopKind::hit_interval ? cfg.stop.a : cfg.start;
  double step = cfg.length_scale(), hi = lo + step;
  for (int i = 0; i < 200 && f(hi) <= 0; ++i) hi = lo + (step *= 2);
  double flo = f(lo);
  if (flo > 0) return lo;
  std::uintmax_t iters = 100;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, f(hi),
                                             boost::math::tools::eps_tolerance<double>(26), iters);
  return 0.5 * (r.first + r.second);
}

struct FlowLineSample {
  SleRun run;
  TracePolyline trace;
  double landing = 0;  // real coordinate where the trace lands (stage coordinates)
  HitRecord hit;
};

struct FlowLineOptions {
  double dt = 1e-3;
  double rel_step = 0.1;
  double eps_coll = 1e-12;
  std::size_t trace_vertices = 0;  // 0: skip the polyline, only compute the landing point
  std::size_t max_steps = 20'000'000;
};

// Force list of the flow-line marginal of curve j (1-based) given hitting points.
inline std::vector<ForcePoint> flow_line_forces(int j, const MarkedConfig& cfg,
                                                const std::vector<double>& hits, Parity parity) {
  cfg.validate();
  int N = cfg.N();
  if (j < 1 || j > N) throw std::invalid_argument("flow line level out of range");
  if (static_cast<int>(hits.size()) != cfg.count(parity))
    throw std::invalid_argument("wrong number of hitting points for parity");
  for (std::size_t m = 0; m < hits.size(); ++m)
    if (!(hits[m] > (m == 0 ? cfg.x_next : hits[m - 1])))
      throw std::invalid_argument("hitting points must be increasing and exceed x_next");
  const double k = cfg.kappa;
  std::vector<ForcePoint> f;
  if (cfg.collapsed) {
    if (j != N) throw std::invalid_argument("collapsed mode samples the outermost curve only");
    if (N > 1) f.push_back({Side::left, cfg.x(0), 2.0 * (N - 1), true});
  } else {
    for (int i = j - 1; i >= 1; --i) f.push_back({Side::left, cfg.x(i - 1), 2.0, false});
    for (int i = j + 1; i <= N; ++i) f.push_back({Side::right, cfg.x(i - 1), 2.0, false});
  }
  f.push_back({Side::right, cfg.x_next, parity == Parity::odd ? (k - 6) / 2 : (k - 2) / 2, false});
  for (double h : hits) f.push_back({Side::right, h, -4.0, false});
  return f;
}

inline SleRunConfig flow_line_run_config(const MarkedConfig& cfg, double start,
                                         std::vector<ForcePoint> forces,
                                         const FlowLineOptions& opt = {}) {
  SleRunConfig rc;
  rc.kappa = cfg.kappa;
  rc.start = start;
  rc.forces = std::move(forces);
  rc.dt = opt.dt * cfg.scale() * cfg.scale();
  rc.scale = cfg.scale();
  rc.rel_step = opt.rel_step;
  rc.eps_coll = opt.eps_coll;
  rc.max_steps = opt.max_steps;
  rc.stop = StopRule::interval(cfg.x_next);
  return rc;
}

inline FlowLineSample run_flow_line(const SleRunConfig& rc, std::uint64_t seed,
                                    const FlowLineOptions& opt = {}) {
  FlowLineSample out;
  out.run = sample_driver(rc, seed);
  if (!out.run.hit) throw std::runtime_error("flow line did not terminate");
  out.hit = *out.run.hit;
  out.landing = landing_point(out.run, rc);
  if (opt.trace_vertices > 0) out.trace = trace_curve(out.run.driver, opt.trace_vertices);
  return out;
}

inline FlowLineSample sample_flow_line_marginal(int j, const MarkedConfig& cfg,
                                                const std::vector<double>& hits, Parity parity,
                                                std::uint64_t seed, const FlowLineOptions& opt = {}) {
  auto rc = flow_line_run_config(cfg, cfg.collapsed ? cfg.x(0) : cfg.x(j - 1),
                                 flow_line_forces(j, cfg, hits, parity), opt);
  return run_flow_line(rc, seed, opt);
}

// SLE_kappa(2,...,2; (kappa-6)/2) from x_N: left forces x_{N-1}..x_1, right
// force x_next, no hitting points.
inline FlowLineSample sample_base_curve(const MarkedConfig& cfg, std::uint64_t seed,
                                        const FlowLineOptions& opt = {}) {
  cfg.validate();
  if (cfg.collapsed) throw std::invalid_argument("base curve needs distinct marked points");
  int N = cfg.N();
  std::vector<ForcePoint> f;
  for (int i = N - 1; i >= 1; --i) f.push_back({Side::left, cfg.x(i - 1), 2.0, false});
  f.push_back({Side::right, cfg.x_next, (cfg.kappa - 6) / 2, false});
  return run_flow_line(flow_line_run_config(cfg, cfg.x(N - 1), std::move(f), opt), seed, opt);
}

}  // namespace msle
