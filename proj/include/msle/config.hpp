#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace msle {

enum class Parity { odd, even };

inline Parity flip(Parity p) { return p == Parity::odd ? Parity::even : Parity::odd; }
inline const char* to_string(Parity p) { return p == Parity::odd ? "odd" : "even"; }

// Boundary marked points x_1 < ... < x_N < x_next. In collapsed mode xs holds
// the single common start point and n is the number of curves.
struct MarkedConfig {
  double kappa = 8.0 / 3.0;
  std::vector<double> xs;
  double x_next = 0;
  bool collapsed = false;
  int n = 0;  // only read in collapsed mode

  int N() const { return collapsed ? n : static_cast<int>(xs.size()); }
  int M() const { return N() / 2; }
  int count(Parity p) const { return p == Parity::odd ? M() : N() - M(); }
  double x(int i) const { return collapsed ? xs.at(0) : xs.at(i); }  // 0-based
  double scale() const { return x_next - x(0); }

  void validate() const {
    if (!(kappa > 0 && kappa < 4)) throw std::invalid_argument("kappa must lie in (0,4)");
    if (xs.empty()) throw std::invalid_argument("no marked points");
    if (collapsed) {
      if (xs.size() != 1 || n < 1) throw std::invalid_argument("collapsed config needs one point and n>=1");
    }
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("marked points must be strictly increasing");
    if (!(x_next > xs.back())) throw std::invalid_argument("x_next must exceed all marked points");
  }

  static MarkedConfig spread(double kappa, std::vector<double> xs, double x_next) {
    MarkedConfig c;
    c.kappa = kappa;
    c.xs = std::move(xs);
    c.x_next = x_next;
    c.validate();
    return c;
  }
  static MarkedConfig same_point(double kappa, int n, double x, double x_next) {
    MarkedConfig c;
    c.kappa = kappa;
    c.xs = {x};
    c.x_next = x_next;
    c.collapsed = true;
    c.n = n;
    c.validate();
    return c;
  }
};

}  // namespace msle
