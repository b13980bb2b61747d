#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <functional>
#include <map>
#include <vector>

namespace msle {

using cplx = std::complex<double>;

struct LoewnerError : std::runtime_error {
  std::size_t step;
  LoewnerError(const std::string& what, std::size_t k) : std::runtime_error(what), step(k) {}
};

// Driver samples on a capacity-time grid. On step k the driver is held at the
// midpoint value (values[k]+values[k+1])/2, or at values[k] when left_point
// is set, so every step is an exact vertical-slit map and the inverse is
// analytic. Sampled SDE paths use the left point: the held value must not
// depend on the noise of its own step.
struct DrivingPath {
  std::vector<double> times;
  std::vector<double> values;
  bool left_point = false;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  double dt(std::size_t k) const { return times[k + 1] - times[k]; }
  double held(std::size_t k) const { return left_point ? values[k] : 0.5 * (values[k] + values[k + 1]); }
  double end_time() const { return times.back(); }

  void validate() const {
    if (times.empty() || times.size() != values.size())
      throw std::invalid_argument("DrivingPath: size mismatch or empty");
    if (times[0] != 0.0) throw std::invalid_argument("DrivingPath: must start at t=0");
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (!std::isfinite(values[k])) throw LoewnerError("DrivingPath: non-finite driver", k);
      if (k > 0 && !(times[k] > times[k - 1]))
        throw std::invalid_argument("DrivingPath: times not strictly increasing");
    }
  }

  static DrivingPath from_function(double T, double dt, const auto& f) {
    DrivingPath p;
    std::size_t K = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
    for (std::size_t k = 0; k <= K; ++k) {
      double t = std::min(T, k * dt);
      p.times.push_back(t);
      p.values.push_back(f(t));
    }
    return p;
  }
};

// g(z) = W + sqrt((z-W)^2 + 4 dt), branch with g(z) ~ z at infinity.
inline cplx slit_forward(cplx z, double W, double dt) {
  cplx u = z - W;
  if (u.imag() <= 0.0) {
    double x = u.real();
    double r = std::sqrt(x * x + 4.0 * dt);
    return {W + (x < 0 ? -r : r), 0.0};
  }
  cplx g = W + u * std::sqrt(1.0 + 4.0 * dt / (u * u));
  if (g.imag() < 0) g.imag(0.0);
  return g;
}

inline double slit_forward(double x, double W, double dt) {
  double u = x - W, r = std::sqrt(u * u + 4.0 * dt);
  return W + (u < 0 ? -r : r);
}

// f(w) = W + sqrt((w-W)^2 - 4 dt) on the closure of H, landing in H.
inline cplx slit_inverse(cplx w, double W, double dt) {
  double b = 2.0 * std::sqrt(dt);
  cplx v = w - W;
  if (!(v.imag() > 0.0)) v.imag(0.0);
  cplx f = W + std::sqrt(v - b) * std::sqrt(v + b);
  if (f.imag() < 0) f.imag(0.0);
  return f;
}

inline double slit_inverse(double x, double W, double dt) {
  double u = x - W, r = std::sqrt(std::max(0.0, u * u - 4.0 * dt));
  return W + (u < 0 ? -r : r);
}

// Index k with times[k] <= t < times[k+1] (or the last step), plus the
// remaining fraction of capacity in that step.
inline std::pair<std::size_t, double> locate_time(const DrivingPath& p, double t) {
  if (t < 0 || t > p.end_time() * (1 + 1e-14) + 1e-300)
    throw std::invalid_argument("capacity time outside driving path");
  auto it = std::upper_bound(p.times.begin(), p.times.end(), t);
  std::size_t k = static_cast<std::size_t>(it - p.times.begin()) - 1;
  if (k >= p.steps()) return {p.steps(), 0.0};
  return {k, t - p.times[k]};
}

// g_t(z) for z in the closed upper half-plane (no swallowing bookkeeping).
inline cplx forward_map(const DrivingPath& p, double t, cplx z) {
  auto [k, rem] = locate_time(p, t);
  for (std::size_t j = 0; j < k; ++j) z = slit_forward(z, p.held(j), p.dt(j));
  if (rem > 0) z = slit_forward(z, p.held(k), rem);
  return z;
}

inline double forward_map(const DrivingPath& p, double t, double x) {
  auto [k, rem] = locate_time(p, t);
  for (std::size_t j = 0; j < k; ++j) x = slit_forward(x, p.held(j), p.dt(j));
  if (rem > 0) x = slit_forward(x, p.held(k), rem);
  return x;
}

struct Flow {
  cplx point;
  std::vector<cplx> image;             // g_{t_k}(point) for k = 0..last
  std::optional<double> swallowed_at;  // capacity time of swallowing
};

// Flows a point under the chain. A real point is swallowed when the driver
// passes it (or comes within eps); an interior point when it comes within eps
// of the driver or is hit by a slit.
inline Flow evolve_point(const DrivingPath& p, cplx z) {
  p.validate();
  if (z.imag() < 0) throw std::invalid_argument("evolve_point: z below the real axis");
  if (z.imag() == 0 && z.real() == p.values[0])
    throw std::invalid_argument("evolve_point: z equals the driver start");
  const double eps = 1e-6 * (1.0 + std::abs(z));
  Flow f{z, {z}, std::nullopt};
  bool real = z.imag() == 0;
  cplx g = z;
  for (std::size_t k = 0; k < p.steps(); ++k) {
    double W = p.held(k);
    if (real && (g.real() - p.values[k]) * (g.real() - W) <= 0) {
      f.swallowed_at = p.times[k];
      break;
    }
    g = slit_forward(g, W, p.dt(k));
    if (!std::isfinite(g.real()) || !std::isfinite(g.imag()))
      throw LoewnerError("evolve_point: non-finite image", k);
    f.image.push_back(g);
    bool hit = std::abs(g - p.values[k + 1]) < eps || (!real && g.imag() <= 0.0);
    if (hit) {
      f.swallowed_at = p.times[k + 1];
      break;
    }
  }
  return f;
}

// g_t^{-1}(w) by composing per-step inverses in reverse.
inline cplx invert_map(const DrivingPath& p, double t, cplx w) {
  if (w.imag() < 0) throw std::invalid_argument("invert_map: w below the real axis");
  auto [k, rem] = locate_time(p, t);
  const double floor = 1e-14 * (1.0 + std::abs(w));
  auto step = [&](cplx v, double W, double dt, std::size_t j) {
    double b = 2.0 * std::sqrt(dt);
    double dist = std::min(std::abs(v - (W - b)), std::abs(v - (W + b)));
    if (dist < floor && v.imag() > 0)
      throw LoewnerError("invert_map: point within " + std::to_string(dist) +
                             " of a slit base (ill-conditioned)", j);
    return slit_inverse(v, W, dt);
  };
  if (rem > 0) w = step(w, p.held(k), rem, k);
  for (std::size_t j = k; j-- > 0;) w = step(w, p.held(j), p.dt(j), j);
  return w;
}

inline double invert_map(const DrivingPath& p, double t, double x) {
  auto [k, rem] = locate_time(p, t);
  if (rem > 0) x = slit_inverse(x, p.held(k), rem);
  for (std::size_t j = k; j-- > 0;) x = slit_inverse(x, p.held(j), p.dt(j));
  return x;
}

struct TracePolyline {
  std::vector<cplx> vertices;
  std::vector<double> capacities;
};

// Point of the discrete trace at fractional step position s in [0, K]:
// step k = ceil(s) grown to the fraction tau = s - (k - 1) of its slit, then
// f_1^{-1} o ... o f_{k-1}^{-1}. Integer s gives the tip after s steps.
inline cplx trace_point(const DrivingPath& p, double s) {
  if (s <= 0) return {p.values[0], 0.0};
  std::size_t k = static_cast<std::size_t>(std::ceil(s));
  double tau = s - static_cast<double>(k - 1);
  double W = p.held(k - 1);
  cplx w = slit_inverse(cplx{W, 0.0}, W, tau * p.dt(k - 1));
  for (std::size_t j = k - 1; j-- > 0;) {
    w = slit_inverse(w, p.held(j), p.dt(j));
    if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
      throw LoewnerError("trace_curve: non-finite vertex", j);
  }
  return w;
}

inline cplx trace_tip(const DrivingPath& p, std::size_t k) { return trace_point(p, static_cast<double>(k)); }

// Polyline through the tips, optionally pushed through `map`. max_vertices = 0
// keeps exactly the K+1 tips. Otherwise all tips are kept if they fit, or else
// half are spaced evenly in step index and half evenly in capacity; chords
// longer than 4 diam / max_vertices (measured after `map`) are then bisected,
// inside a single slit if need be, until at most 4 max_vertices remain.
inline TracePolyline trace_curve(const DrivingPath& p, std::size_t max_vertices = 0,
                                 const std::function<cplx(cplx)>& map = {}) {
  p.validate();
  std::size_t K = p.steps();
  auto tip = [&](double s) { return map ? map(trace_point(p, s)) : trace_point(p, s); };
  std::map<double, cplx> v;
  if (max_vertices == 0 || K + 1 <= max_vertices) {
    for (std::size_t k = 0; k <= K; ++k) v[double(k)] = tip(double(k));
  }
  if (max_vertices > 0 && K + 1 > max_vertices) {
    std::size_t h = std::max<std::size_t>(max_vertices / 2, 2);
    const double T = p.end_time();
    for (std::size_t i = 0; i < h; ++i) {
      v.try_emplace(double(std::llround(double(i) * K / (h - 1))));
      double t = T * double(i) / (h - 1);
      auto it = std::lower_bound(p.times.begin(), p.times.end(), t);
      v.try_emplace(double(std::min<std::size_t>(static_cast<std::size_t>(it - p.times.begin()), K)));
    }
    for (auto& [s, z] : v) z = tip(s);
  }
  if (max_vertices > 0) {
    double diam = 0;
    for (auto& [s, z] : v) diam = std::max(diam, std::abs(z - v.begin()->second));
    const double tol = 4 * diam / static_cast<double>(max_vertices);
    const std::size_t budget = 4 * max_vertices;
    for (bool changed = true; changed && v.size() < budget;) {
      changed = false;
      for (auto a = v.begin(), b = std::next(a); b != v.end() && v.size() < budget; a = b++) {
        if (b->first - a->first < 1e-6 || std::abs(b->second - a->second) <= tol) continue;
        // split at a step boundary when one lies strictly inside
        double m = std::floor(0.5 * (a->first + b->first));
        if (!(m > a->first && m < b->first)) m = 0.5 * (a->first + b->first);
        b = v.emplace_hint(b, m, tip(m));
        changed = true;
      }
    }
  }
  TracePolyline out;
  for (auto& [s, z] : v) {
    out.vertices.push_back(z);
    std::size_t k = static_cast<std::size_t>(std::ceil(s));
    out.capacities.push_back(k == 0 ? p.times[0] : p.times[k - 1] + (s - double(k - 1)) * p.dt(k - 1));
  }
  return out;
}

// Vertical-slit unzipping of a polyline that starts on the real axis: returns
// the driver, sampled at the end of each slit step.
inline DrivingPath unzip_curve(const std::vector<cplx>& pts) {
  if (pts.empty()) throw std::invalid_argument("unzip_curve: empty polyline");
  DrivingPath out;
  out.times.push_back(0.0);
  out.values.push_back(pts[0].real());
  std::vector<cplx> rest(pts.begin() + 1, pts.end());
  double t = 0;
  for (std::size_t k = 0; k < rest.size(); ++k) {
    cplx q = rest[k];
    double W = q.real(), dt = 0.25 * q.imag() * q.imag();
    if (dt <= 0) continue;
    for (std::size_t j = k + 1; j < rest.size(); ++j) rest[j] = slit_forward(rest[j], W, dt);
    t += dt;
    out.times.push_back(t);
    out.values.push_back(W);
  }
  return out;
}

}  // namespace msle
