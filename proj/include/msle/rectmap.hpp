#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/jacobi_elliptic.hpp>
#include <boost/math/tools/roots.hpp>

namespace msle {

// Arithmetic-geometric mean; iters = 0 iterates to convergence.
template <class T>
T agm(T a, T b, int iters = 0) {
  int n = iters > 0 ? iters : 64;
  for (int i = 0; i < n; ++i) {
    T an = (a + b) / 2, bn = std::sqrt(a * b);
    a = an;
    b = bn;
    if (iters == 0 && std::abs(a - b) <= std::numeric_limits<T>::epsilon() * a) break;
  }
  return (a + b) / 2;
}

// Conformal map of the rectangle [0,w] x [0,h] onto the upper half-plane,
// z -> sn(c (z - w/2), k) with K'(k)/(2 K(k)) = h/w and c = 2K/w. The
// boundary images are real; the midpoint of the top side goes to infinity.
// Tall rectangles are first rotated by -90 degrees so that w >= h; k, K, Kp
// refer to the rotated one.
template <class T = double>
struct RectangleMap {
  T width, height, k, kp, K, Kp;
  int agm_iters;
  bool rotated = false;

  RectangleMap(T w0, T h0, int iters = 0) : width(w0), height(h0), agm_iters(iters) {
    T aspect = w0 / h0;
    if (!(aspect >= T(0.1) && aspect <= T(10)))
      throw std::invalid_argument("rectangle aspect ratio outside [0.1, 10]");
    rotated = aspect < 1;
    const T w = rotated ? h0 : w0, h = rotated ? w0 : h0;
    const T pi = boost::math::constants::pi<T>();
    // k = 1/sqrt(1+e^{-2x}), k' = 1/sqrt(1+e^{2x}) keeps both accurate
    auto moduli = [](T x) {
      return std::pair{1 / std::sqrt(1 + std::exp(-2 * x)), 1 / std::sqrt(1 + std::exp(2 * x))};
    };
    auto target = std::log(2 * h / w);
    auto f = [&](T x) {
      auto [a, b] = moduli(x);
      return std::log(agm<T>(1, b, iters) / agm<T>(1, a, iters)) - target;
    };
    std::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(
        f, T(-60), T(60), boost::math::tools::eps_tolerance<T>(std::numeric_limits<T>::digits - 3), it);
    T x = (r.first + r.second) / 2;
    std::tie(k, kp) = moduli(x);
    K = pi / (2 * agm<T>(1, kp, iters));
    Kp = pi / (2 * agm<T>(1, k, iters));
  }

  // Image of a boundary point; +inf for the top midpoint.
  T image(std::complex<T> z) const {
    const T w = rotated ? height : width, h = rotated ? width : height;
    const T c = 2 * K / w;
    const T tol = 64 * std::numeric_limits<T>::epsilon() * (w + h);
    T x = z.real(), y = z.imag();
    if (rotated) std::tie(x, y) = std::pair{y, width - x};
    // boost's jacobi_dn loses digits near the quarter period; cn does not
    auto dn = [&](T u) {
      T cn = boost::math::jacobi_cn(kp, u);
      return std::sqrt(k * k + kp * kp * cn * cn);
    };
    if (std::abs(y) <= tol) return boost::math::jacobi_sn(k, c * (x - w / 2));
    if (std::abs(x - w) <= tol) return 1 / dn(c * y);
    if (std::abs(x) <= tol) return -1 / dn(c * y);
    if (std::abs(y - h) <= tol) {
      T s = boost::math::jacobi_sn(k, c * (x - w / 2));
      return s == 0 ? std::numeric_limits<T>::infinity() : 1 / (k * s);
    }
    throw std::invalid_argument("RectangleMap::image: point not on the boundary");
  }
};

struct HalfPlaneImages {
  std::vector<double> marks;    // phi(x_1) < ... < phi(x_{N+1})
  std::vector<double> corners;  // (0,0), (w,0), (w,h), (0,h); +inf if sent to infinity
};

// Boundary points listed counterclockwise; the last one is sent to infinity
// by a real Moebius map.
inline HalfPlaneImages rectangle_to_halfplane(double width, double height,
                                              const std::vector<std::complex<double>>& marks,
                                              int agm_iters = 0) {
  if (marks.size() < 2) throw std::invalid_argument("need at least two boundary points");
  RectangleMap<double> m(width, height, agm_iters);
  const double inf = std::numeric_limits<double>::infinity();
  double t_inf = m.image(marks.back());
  // w -> -1/(w - t_inf) maps H to H and t_inf to infinity
  auto mob = [&](double w) {
    if (std::isinf(t_inf)) return w;
    if (std::isinf(w)) return 0.0;
    if (w == t_inf) return inf;
    return -1 / (w - t_inf);
  };
  HalfPlaneImages out;
  for (std::size_t i = 0; i + 1 < marks.size(); ++i) out.marks.push_back(mob(m.image(marks[i])));
  for (auto z : {std::complex<double>(0, 0), {width, 0}, {width, height}, {0, height}})
    out.corners.push_back(mob(m.image(z)));
  for (std::size_t i = 1; i < out.marks.size(); ++i)
    if (!(out.marks[i] > out.marks[i - 1]))
      throw std::invalid_argument("rectangle_to_halfplane: marks not counterclockwise");
  return out;
}

}  // namespace msle
