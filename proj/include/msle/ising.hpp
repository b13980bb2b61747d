#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "partition.hpp"
#include "rectmap.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace msle {

inline const double beta_c = -0.5 * std::log(std::sqrt(2.0) - 1);

enum class FaceKind : std::uint8_t { absent, spin, frozen };

// Faces of an nx x ny box of unit squares plus a one-face ring around it.
// Grid face (i, j) is the square [i-1, i] x [j-1, j] in lattice units, so the
// box proper is 1 <= i <= nx, 1 <= j <= ny. Ring faces are frozen (boundary
// spins) or absent (free boundary).
struct IsingGrid {
  int nx = 0, ny = 0;
  std::vector<FaceKind> kind;
  std::vector<std::int8_t> fixed;  // value of frozen faces

  int gx() const { return nx + 2; }
  int gy() const { return ny + 2; }
  int index(int i, int j) const { return j * gx() + i; }
  bool inside_grid(int i, int j) const { return i >= 0 && j >= 0 && i < gx() && j < gy(); }
  FaceKind at(int i, int j) const { return inside_grid(i, j) ? kind[index(i, j)] : FaceKind::absent; }

  static IsingGrid free_box(int nx, int ny) {
    IsingGrid g;
    g.nx = nx;
    g.ny = ny;
    g.kind.assign(std::size_t(g.gx()) * g.gy(), FaceKind::absent);
    g.fixed.assign(g.kind.size(), 0);
    for (int j = 1; j <= ny; ++j)
      for (int i = 1; i <= nx; ++i) g.kind[g.index(i, j)] = FaceKind::spin;
    return g;
  }
};

struct SpinConfig {
  std::vector<std::int8_t> spin;  // 0 on absent faces
  std::vector<std::uint8_t> frozen;
};

inline SpinConfig initial_config(const IsingGrid& g, std::int8_t value = 1) {
  SpinConfig c;
  c.spin.assign(g.kind.size(), 0);
  c.frozen.assign(g.kind.size(), 0);
  for (std::size_t f = 0; f < g.kind.size(); ++f) {
    if (g.kind[f] == FaceKind::frozen) {
      c.spin[f] = g.fixed[f];
      c.frozen[f] = 1;
    } else if (g.kind[f] == FaceKind::spin) {
      c.spin[f] = value;
    }
  }
  return c;
}

// Rectangle of nx x ny faces of side delta with marked boundary vertices
// x_1, ..., x_{N+2} counterclockwise. Arc (x_{j-1}, x_j) carries spin (-1)^j
// (x_0 = x_{N+2}) through a frozen layer of outside faces; the arc
// (x_{N+1}, x_{N+2}) is free.
struct LatticePolygon {
  double delta = 0;
  int N = 0;
  IsingGrid grid;
  std::vector<int> marks;      // perimeter vertex indices, counterclockwise from (0,0)
  std::vector<int> edge_arc;   // per perimeter edge: arc index 1..N+1, or 0 on the free arc
  std::vector<std::vector<int>> arc_faces;  // frozen faces of arc j (index j, 0 unused)
  std::vector<int> free_faces;              // box faces adjacent to free-arc edges
  bool free_arc_frozen = false;

  int perimeter() const { return 2 * (grid.nx + grid.ny); }
  static int arc_sign(int j) { return j % 2 == 0 ? 1 : -1; }

  std::array<int, 2> vertex(int p) const {
    int nx = grid.nx, ny = grid.ny;
    p = ((p % perimeter()) + perimeter()) % perimeter();
    if (p < nx) return {p, 0};
    if (p < nx + ny) return {nx, p - nx};
    if (p < 2 * nx + ny) return {nx - (p - nx - ny), ny};
    return {0, ny - (p - 2 * nx - ny)};
  }
  std::complex<double> point(int p) const {
    auto v = vertex(p);
    return {v[0] * delta, v[1] * delta};
  }
  // Ring face across perimeter edge e, and the box face on the inner side.
  std::array<int, 2> outer_face(int e) const {
    int nx = grid.nx, ny = grid.ny;
    if (e < nx) return {e + 1, 0};
    if (e < nx + ny) return {nx + 1, e - nx + 1};
    if (e < 2 * nx + ny) return {nx - (e - nx - ny), ny + 1};
    return {0, ny - (e - 2 * nx - ny)};
  }
  std::array<int, 2> inner_face(int e) const {
    int nx = grid.nx, ny = grid.ny;
    if (e < nx) return {e + 1, 1};
    if (e < nx + ny) return {nx, e - nx + 1};
    if (e < 2 * nx + ny) return {nx - (e - nx - ny), ny};
    return {1, ny - (e - 2 * nx - ny)};
  }
  int mark_at(int vx, int vy) const {
    for (std::size_t k = 0; k < marks.size(); ++k) {
      auto v = vertex(marks[k]);
      if (v[0] == vx && v[1] == vy) return static_cast<int>(k) + 1;
    }
    return 0;
  }
  std::vector<std::complex<double>> mark_points() const {
    std::vector<std::complex<double>> z;
    for (int m : marks) z.push_back(point(m));
    return z;
  }
};

// Marked points are snapped to the nearest boundary vertex. Corners are not
// allowed as marks, and consecutive marks must be at least 2 delta apart.
// free_arc_sign != 0 freezes the last arc to that value instead.
inline LatticePolygon build_polygon(double width, double height, int N,
                                    const std::vector<std::complex<double>>& marked, double delta,
                                    int free_arc_sign = 0) {
  if (N < 1) throw std::invalid_argument("build_polygon: need N >= 1");
  if (static_cast<int>(marked.size()) != N + 2)
    throw std::invalid_argument("build_polygon: need N+2 marked points");
  int nx = static_cast<int>(std::lround(width / delta)), ny = static_cast<int>(std::lround(height / delta));
  if (nx < 2 || ny < 2 || std::abs(nx * delta - width) > 1e-9 * width ||
      std::abs(ny * delta - height) > 1e-9 * height)
    throw std::invalid_argument("build_polygon: sides must be multiples of delta");
  LatticePolygon P;
  P.delta = delta;
  P.N = N;
  P.grid = IsingGrid::free_box(nx, ny);
  P.free_arc_frozen = free_arc_sign != 0;
  const int per = P.perimeter();
  for (auto z : marked) {
    double x = z.real() / delta, y = z.imag() / delta;
    double tol = 1e-6;
    int p;
    if (std::abs(y) < tol) p = static_cast<int>(std::lround(x));
    else if (std::abs(x - nx) < tol) p = nx + static_cast<int>(std::lround(y));
    else if (std::abs(y - ny) < tol) p = nx + ny + static_cast<int>(std::lround(nx - x));
    else if (std::abs(x) < tol) p = 2 * nx + ny + static_cast<int>(std::lround(ny - y));
    else throw std::invalid_argument("build_polygon: marked point off the boundary");
    p %= per;
    auto v = P.vertex(p);
    if ((v[0] == 0 || v[0] == nx) && (v[1] == 0 || v[1] == ny))
      throw std::invalid_argument("build_polygon: marked point at a corner");
    P.marks.push_back(p);
  }
  // counterclockwise starting anywhere: total winding exactly one turn
  int wind = 0;
  for (int k = 0; k < N + 2; ++k) {
    int gap = ((P.marks[(k + 1) % (N + 2)] - P.marks[k]) % per + per) % per;
    if (gap < 2) throw std::invalid_argument("build_polygon: marked points closer than 2 delta");
    wind += gap;
  }
  if (wind != per) throw std::invalid_argument("build_polygon: marked points not counterclockwise");

  P.edge_arc.assign(per, 0);
  P.arc_faces.assign(N + 2, {});
  for (int j = 1; j <= N + 2; ++j) {
    int from = P.marks[(j + N) % (N + 2)], to = P.marks[j - 1];  // arc (x_{j-1}, x_j)
    int arc = j == N + 2 ? 0 : j;
    for (int e = from; e != to; e = (e + 1) % per) P.edge_arc[e] = arc;
  }
  auto& g = P.grid;
  for (int e = 0; e < per; ++e) {
    int arc = P.edge_arc[e];
    auto o = P.outer_face(e);
    int f = g.index(o[0], o[1]);
    if (arc == 0) {
      auto in = P.inner_face(e);
      P.free_faces.push_back(g.index(in[0], in[1]));
      if (free_arc_sign == 0) continue;
    }
    g.kind[f] = FaceKind::frozen;
    g.fixed[f] = static_cast<std::int8_t>(arc == 0 ? free_arc_sign : LatticePolygon::arc_sign(arc));
    if (arc > 0) P.arc_faces[arc].push_back(f);
  }
  // corner ring faces take the arc through that corner
  for (int p : {0, nx, nx + ny, 2 * nx + ny}) {
    int arc = P.edge_arc[p];
    auto v = P.vertex(p);
    int ci = v[0] == 0 ? 0 : nx + 1, cj = v[1] == 0 ? 0 : ny + 1;
    int f = g.index(ci, cj);
    if (arc == 0 && free_arc_sign == 0) continue;
    g.kind[f] = FaceKind::frozen;
    g.fixed[f] = static_cast<std::int8_t>(arc == 0 ? free_arc_sign : LatticePolygon::arc_sign(arc));
    if (arc > 0) P.arc_faces[arc].push_back(f);
  }
  std::sort(P.free_faces.begin(), P.free_faces.end());
  P.free_faces.erase(std::unique(P.free_faces.begin(), P.free_faces.end()), P.free_faces.end());
  return P;
}

// ---------------------------------------------------------------------------
// Samplers

enum class IsingAlgorithm { metropolis, wolff, swendsen_wang };

inline const char* to_string(IsingAlgorithm a) {
  switch (a) {
    case IsingAlgorithm::metropolis: return "metropolis";
    case IsingAlgorithm::wolff: return "wolff";
    case IsingAlgorithm::swendsen_wang: return "swendsen-wang";
  }
  return "?";
}

class IsingSampler {
 public:
  IsingSampler(const IsingGrid& g, double beta = beta_c) : g_(g), beta_(beta) {
    p_bond_ = 1 - std::exp(-2 * beta);
    for (int s = -4; s <= 4; ++s) accept_[s + 4] = std::min(1.0, std::exp(-2 * beta * s));
    nbr_.assign(g.kind.size(), {-1, -1, -1, -1});
    for (int j = 0; j < g.gy(); ++j)
      for (int i = 0; i < g.gx(); ++i) {
        int f = g.index(i, j);
        if (g.kind[f] == FaceKind::absent) continue;
        if (g.kind[f] == FaceKind::spin) free_.push_back(f);
        const int di[4] = {1, 0, -1, 0}, dj[4] = {0, 1, 0, -1};
        for (int d = 0; d < 4; ++d)
          if (g.at(i + di[d], j + dj[d]) != FaceKind::absent) nbr_[f][d] = g.index(i + di[d], j + dj[d]);
      }
  }

  std::size_t free_count() const { return free_.size(); }

  void metropolis_sweep(SpinConfig& c, Rng& rng) const {
    for (int f : free_) {
      int h = 0;
      for (int n : nbr_[f])
        if (n >= 0) h += c.spin[n];
      int s = c.spin[f] * h;  // energy change is 2 beta s
      if (s <= 0 || uniform01(rng) < accept_[s + 4]) c.spin[f] = static_cast<std::int8_t>(-c.spin[f]);
    }
  }

  // One cluster move; a cluster bonded to a frozen face is not flipped.
  // Returns the number of faces visited.
  std::size_t wolff_step(SpinConfig& c, Rng& rng) const {
    if (free_.empty()) return 0;
    std::uniform_int_distribution<std::size_t> pick(0, free_.size() - 1);
    int seed = free_[pick(rng)];
    std::int8_t s = c.spin[seed];
    stack_.clear();
    member_.assign(c.spin.size(), 0);
    stack_.push_back(seed);
    member_[seed] = 1;
    bool blocked = false;
    std::size_t head = 0;
    while (head < stack_.size()) {
      int f = stack_[head++];
      for (int n : nbr_[f]) {
        if (n < 0 || member_[n] || c.spin[n] != s) continue;
        if (uniform01(rng) >= p_bond_) continue;
        if (c.frozen[n]) {
          blocked = true;
          continue;
        }
        member_[n] = 1;
        stack_.push_back(n);
      }
    }
    if (!blocked)
      for (int f : stack_) c.spin[f] = static_cast<std::int8_t>(-s);
    return stack_.size();
  }

  // A fixed number of moves: stopping on the accumulated cluster size would
  // make the move count depend on the state and break stationarity.
  void wolff_sweep(SpinConfig& c, Rng& rng) const {
    std::size_t moves = std::max<std::size_t>(1, (free_.size() + 15) / 16);
    for (std::size_t k = 0; k < moves; ++k) wolff_step(c, rng);
  }

  void sw_sweep(SpinConfig& c, Rng& rng) const {
    std::size_t n = c.spin.size();
    parent_.resize(n);
    std::iota(parent_.begin(), parent_.end(), 0);
    for (std::size_t f = 0; f < n; ++f) {
      if (g_.kind[f] == FaceKind::absent) continue;
      for (int d = 0; d < 2; ++d) {  // right and up neighbours
        int m = nbr_[f][d];
        if (m < 0 || c.spin[m] != c.spin[f] || (c.frozen[f] && c.frozen[m])) continue;
        if (uniform01(rng) < p_bond_) unite(static_cast<int>(f), m);
      }
    }
    flip_.assign(n, 0);  // 0 undecided, 1 keep, 2 flip
    for (std::size_t f = 0; f < n; ++f)
      if (c.frozen[f]) flip_[find(static_cast<int>(f))] = 1;
    for (int f : free_) {
      int r = find(f);
      if (flip_[r] == 0) flip_[r] = uniform01(rng) < 0.5 ? 2 : 1;
      if (flip_[r] == 2) c.spin[f] = static_cast<std::int8_t>(-c.spin[f]);
    }
  }

  void sweep(SpinConfig& c, Rng& rng, IsingAlgorithm a) const {
    switch (a) {
      case IsingAlgorithm::metropolis: metropolis_sweep(c, rng); break;
      case IsingAlgorithm::wolff: wolff_sweep(c, rng); break;
      case IsingAlgorithm::swendsen_wang:
        sw_sweep(c, rng);
        metropolis_sweep(c, rng);
        break;
    }
  }

 private:
  int find(int x) const {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(int a, int b) const {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

  const IsingGrid& g_;
  double beta_, p_bond_;
  std::array<double, 9> accept_{};
  std::vector<std::array<int, 4>> nbr_;
  std::vector<int> free_;
  mutable std::vector<int> stack_, parent_;
  mutable std::vector<std::uint8_t> member_, flip_;
};

inline SpinConfig sample_spins(const IsingGrid& g, std::size_t sweeps, IsingAlgorithm a,
                               std::uint64_t seed, std::optional<SpinConfig> start = std::nullopt) {
  Rng rng = make_rng(seed, 0x151);
  SpinConfig c = start ? *start : initial_config(g);
  if (!start)
    for (std::size_t f = 0; f < c.spin.size(); ++f)
      if (g.kind[f] == FaceKind::spin) c.spin[f] = uniform01(rng) < 0.5 ? 1 : -1;
  IsingSampler s(g);
  for (std::size_t k = 0; k < sweeps; ++k) s.sweep(c, rng, a);
  return c;
}

// ---------------------------------------------------------------------------
// Interfaces

enum class Termination { free_arc, marked_point };

struct InterfacePath {
  int j = 0;
  std::vector<std::array<int, 2>> vertices;  // lattice vertex coordinates
  Termination end = Termination::marked_point;
  int end_mark = 0;  // index k of x_k when end == marked_point
};

namespace detail {
// Grid face beside vertex v, `a` = +1 ahead / -1 behind along d, `b` = +1 left / -1 right.
inline std::array<int, 2> face_near(std::array<int, 2> v, std::array<int, 2> d, int a, int b) {
  int lx = -d[1], ly = d[0];
  int cx = a * d[0] + b * lx, cy = a * d[1] + b * ly;  // components are +-1
  return {v[0] + (cx - 1) / 2 + 1, v[1] + (cy - 1) / 2 + 1};
}
}  // namespace detail

// Walk from x_j along face edges with (-1)^j on the left and (-1)^{j+1} on the
// right, turning left whenever two continuations are possible. Absent faces
// count as the right-hand sign. The walk stops when its next edge would leave
// the box (at a marked point) or would run along the free arc.
inline InterfacePath trace_interface(const LatticePolygon& P, const SpinConfig& c, int j) {
  if (j < 1 || j > P.N) throw std::invalid_argument("trace_interface: j out of range");
  const auto& g = P.grid;
  const int s = LatticePolygon::arc_sign(j);
  auto val = [&](std::array<int, 2> f) -> int {
    if (g.at(f[0], f[1]) == FaceKind::absent) return 0;
    return c.spin[g.index(f[0], f[1])];
  };
  auto inside = [&](std::array<int, 2> v) {
    return v[0] >= 0 && v[1] >= 0 && v[0] <= g.nx && v[1] <= g.ny;
  };
  InterfacePath out;
  out.j = j;
  std::array<int, 2> v = P.vertex(P.marks[j - 1]), d;
  if (v[1] == 0) d = {0, 1};
  else if (v[0] == g.nx) d = {-1, 0};
  else if (v[1] == g.ny) d = {0, -1};
  else d = {1, 0};
  out.vertices.push_back(v);
  std::vector<std::uint8_t> seen(std::size_t(g.nx + 1) * (g.ny + 1) * 4, 0);
  auto dir_index = [](std::array<int, 2> e) { return e[0] == 1 ? 0 : e[1] == 1 ? 1 : e[0] == -1 ? 2 : 3; };
  for (;;) {
    auto FL = detail::face_near(v, d, 1, 1), FR = detail::face_near(v, d, 1, -1);
    auto LB = detail::face_near(v, d, -1, 1), RB = detail::face_near(v, d, -1, -1);
    std::array<int, 2> nd, left, right;
    if (val(FL) != s) {
      nd = {-d[1], d[0]};
      left = LB;
      right = FL;
    } else if (val(FR) != s) {
      nd = d;
      left = FL;
      right = FR;
    } else {
      nd = {d[1], -d[0]};
      left = FR;
      right = RB;
    }
    std::array<int, 2> w{v[0] + nd[0], v[1] + nd[1]};
    if (!inside(w)) {
      out.end = Termination::marked_point;
      out.end_mark = P.mark_at(v[0], v[1]);
      if (out.end_mark == 0) throw std::logic_error("trace_interface: left the box away from a marked point");
      return out;
    }
    if (val(left) == 0 || val(right) == 0) {
      out.end = Termination::free_arc;
      return out;
    }
    auto& flag = seen[(std::size_t(v[1]) * (g.nx + 1) + v[0]) * 4 + dir_index(nd)];
    if (flag) throw std::logic_error("trace_interface: directed edge revisited");
    flag = 1;
    v = w;
    d = nd;
    out.vertices.push_back(v);
  }
}

// ---------------------------------------------------------------------------
// Event A

namespace detail {
struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0); }
  int find(int x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) p[std::max(a, b)] = std::min(a, b);
  }
};

// Same-sign nearest-neighbour clusters of all present faces (frozen included).
inline UnionFind sign_clusters(const IsingGrid& g, const SpinConfig& c) {
  UnionFind uf(c.spin.size());
  for (int j = 0; j < g.gy(); ++j)
    for (int i = 0; i < g.gx(); ++i) {
      int f = g.index(i, j);
      if (g.kind[f] == FaceKind::absent) continue;
      if (g.at(i + 1, j) != FaceKind::absent && c.spin[f] == c.spin[f + 1]) uf.unite(f, f + 1);
      int u = g.index(i, j + 1);
      if (g.at(i, j + 1) != FaceKind::absent && c.spin[f] == c.spin[u]) uf.unite(f, u);
    }
  return uf;
}
}  // namespace detail

struct EventA {
  bool value = false;
  std::vector<InterfacePath> interfaces;
};

// Interface j ends on the free arc exactly when the cluster of arc j (the
// (-1)^j faces joined to its frozen layer through edges) reaches a face on
// the free arc and holds none of the frozen layers of arcs j+2, j+4, ...
// that come before the free arc counterclockwise from x_j.
inline std::vector<bool> cluster_criterion(const LatticePolygon& P, const SpinConfig& c) {
  auto uf = detail::sign_clusters(P.grid, c);
  std::vector<char> touches(c.spin.size(), 0);
  for (int f : P.free_faces) touches[uf.find(f)] = 1;
  std::vector<bool> ok(P.N + 1, false);
  for (int j = 1; j <= P.N; ++j) {
    int r = uf.find(P.arc_faces[j].front());
    bool good = touches[r];
    for (int k = j + 2; k <= P.N + 1; k += 2)
      if (uf.find(P.arc_faces[k].front()) == r) good = false;
    ok[j] = good;
  }
  return ok;
}

inline EventA detect_event_A(const LatticePolygon& P, const SpinConfig& c) {
  if (P.free_arc_frozen) throw std::invalid_argument("detect_event_A: free arc is frozen");
  EventA ev;
  ev.value = true;
  auto crit = cluster_criterion(P, c);
  for (int j = 1; j <= P.N; ++j) {
    ev.interfaces.push_back(trace_interface(P, c, j));
    bool walk = ev.interfaces.back().end == Termination::free_arc;
    if (walk != crit[j])
      throw std::logic_error("detect_event_A: interface and cluster criteria disagree for j=" +
                             std::to_string(j));
    ev.value = ev.value && walk;
  }
  return ev;
}

// Whether the sign-`s` cluster of arc j's frozen layer reaches a face on the
// free arc (with the free arc frozen this still uses the same faces).
inline bool arc_connects_to_free(const LatticePolygon& P, const SpinConfig& c, int j) {
  auto uf = detail::sign_clusters(P.grid, c);
  int r = uf.find(P.arc_faces.at(j).front());
  for (int f : P.free_faces)
    if (c.spin[f] == LatticePolygon::arc_sign(j) && uf.find(f) == r) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Estimation

struct PAOptions {
  IsingAlgorithm algorithm = IsingAlgorithm::swendsen_wang;
  std::size_t burn_in = 0;   // 0: 20 autocorrelation times of the pilot, at least 200
  std::size_t thin = 0;      // 0: ceil of the pilot autocorrelation time
  std::size_t pilot = 2000;
  unsigned chains = 4;
  bool compute_limit = true;
};

struct PAReport {
  double p_hat = 0, sigma = 0, ci_lo = 0, ci_hi = 0;
  std::size_t replicates = 0;
  double tau_pilot = 1, tau_thinned = 1;
  std::size_t burn_in = 0, thin = 1;
  std::vector<double> marked_images;  // phi(x_1) < ... < phi(x_{N+1})
  std::optional<LimitProbability> limit;
};

// Replicates are thinned states of `chains` independent chains. The CI is the
// i.i.d. bootstrap interval widened by the square root of the thinned
// series' integrated autocorrelation time.
inline PAReport estimate_pA(const LatticePolygon& P, std::size_t replicates, std::uint64_t seed,
                            const PAOptions& opt = {}) {
  PAReport rep;
  IsingSampler smp(P.grid);
  auto observe = [&](const SpinConfig& c) { return detect_event_A(P, c).value ? 1.0 : 0.0; };
  auto magnet = [&](const SpinConfig& c) {
    double m = 0;
    for (std::size_t f = 0; f < c.spin.size(); ++f)
      if (P.grid.kind[f] == FaceKind::spin) m += c.spin[f];
    return m / static_cast<double>(smp.free_count());
  };
  {
    Rng rng = make_rng(seed, 0x9170);
    SpinConfig c = sample_spins(P.grid, 0, opt.algorithm, seed);
    for (int k = 0; k < 200; ++k) smp.sweep(c, rng, opt.algorithm);
    std::vector<double> a(opt.pilot), m(opt.pilot);
    for (std::size_t k = 0; k < opt.pilot; ++k) {
      smp.sweep(c, rng, opt.algorithm);
      a[k] = observe(c);
      m[k] = magnet(c);
    }
    rep.tau_pilot = std::max(autocorrelation_time(a), autocorrelation_time(m));
  }
  rep.thin = opt.thin ? opt.thin : static_cast<std::size_t>(std::ceil(rep.tau_pilot));
  rep.burn_in = opt.burn_in ? opt.burn_in
                            : std::max<std::size_t>(200, static_cast<std::size_t>(std::ceil(20 * rep.tau_pilot)));
  unsigned chains = std::max(1u, opt.chains);
  std::size_t per = (replicates + chains - 1) / chains;
  std::vector<std::vector<double>> got(chains);
  parallel_for(chains, [&](std::size_t ch) {
    IsingSampler local(P.grid);
    Rng rng = make_rng(seed, ch + 1);
    SpinConfig c = sample_spins(P.grid, 0, opt.algorithm, replica_seed(seed, ch + 1));
    for (std::size_t k = 0; k < rep.burn_in; ++k) local.sweep(c, rng, opt.algorithm);
    for (std::size_t r = 0; r < per; ++r) {
      for (std::size_t k = 0; k < rep.thin; ++k) local.sweep(c, rng, opt.algorithm);
      got[ch].push_back(observe(c));
    }
  });
  std::vector<double> all;
  double tau = 0;
  for (auto& g : got) {
    tau = std::max(tau, autocorrelation_time(g));
    all.insert(all.end(), g.begin(), g.end());
  }
  all.resize(std::min(all.size(), replicates));
  rep.replicates = all.size();
  rep.tau_thinned = std::max(1.0, tau);
  auto bs = bootstrap(all, [](std::span<const double> x) { return mean(x); }, 1000, seed);
  double w = std::sqrt(rep.tau_thinned);
  rep.p_hat = bs.estimate;
  rep.sigma = bs.sigma * w;
  rep.ci_lo = rep.p_hat - (rep.p_hat - bs.lo) * w;
  rep.ci_hi = rep.p_hat + (bs.hi - rep.p_hat) * w;
  if (opt.compute_limit) {
    auto img = rectangle_to_halfplane(P.grid.nx * P.delta, P.grid.ny * P.delta, P.mark_points());
    rep.marked_images = img.marks;
    std::vector<double> ys(img.marks.begin(), img.marks.end() - 1);
    Budget b;
    b.seed = seed;
    rep.limit = limit_probability(ys, img.marks.back(), 3.0, Method::quadrature, b);
  }
  return rep;
}

}  // namespace msle
