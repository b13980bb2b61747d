#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "config.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace msle {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double beta_fn(double a, double b) { return boost::math::beta(a, b); }
inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

struct DensityExponents {
  double marked;  // exponent on (z - x_i); collapsed: on (z - x), already times N
  double next;    // exponent on (z - x_next)
  double pair;    // exponent on (z_j - z_i)
};

inline DensityExponents exponents(const MarkedConfig& cfg, Parity p) {
  double k = cfg.kappa;
  double m = -4.0 / k * (cfg.collapsed ? cfg.N() : 1);
  return {m, p == Parity::odd ? (6 - k) / k : (2 - k) / k, 8.0 / k};
}

// Unnormalized log density of the hitting points (r for odd, rho for even).
inline double log_density(const MarkedConfig& cfg, Parity p, const std::vector<double>& z) {
  cfg.validate();
  if (static_cast<int>(z.size()) != cfg.count(p))
    throw std::invalid_argument("log_density: wrong number of hitting points");
  auto e = exponents(cfg, p);
  double s = 0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (!(z[j] > (j == 0 ? cfg.x_next : z[j - 1]))) return neg_inf;
    for (double x : cfg.xs) s += e.marked * std::log(z[j] - x);
    s += e.next * std::log(z[j] - cfg.x_next);
    for (std::size_t i = 0; i < j; ++i) s += e.pair * std::log(z[j] - z[i]);
  }
  return s;
}

inline double log_density_r(const MarkedConfig& cfg, const std::vector<double>& z) {
  return log_density(cfg, Parity::odd, z);
}
inline double log_density_rho(const MarkedConfig& cfg, const std::vector<double>& w) {
  return log_density(cfg, Parity::even, w);
}

enum class Method { closed_form, quadrature, monte_carlo };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::closed_form: return "closed-form";
    case Method::quadrature: return "quadrature";
    case Method::monte_carlo: return "monte-carlo";
  }
  return "?";
}

struct PartitionEval {
  double log_value = 0;
  int sign = 1;
  double std_error = 0;  // absolute, on the value scale
  Method method = Method::closed_form;

  double value() const { return sign * std::exp(log_value); }
  double rel_error() const { return std_error / std::exp(log_value); }
};

// Throws if the hitting-point integral diverges, judged from the algebraic
// exponents at x_next and along every tail window (top k points to infinity).
inline void check_integrable(const MarkedConfig& cfg, Parity p) {
  auto e = exponents(cfg, p);
  int c = cfg.count(p);
  if (c == 0) return;
  if (!(e.next > -1)) throw std::domain_error("non-integrable: singularity at x_next");
  double per = e.marked * static_cast<double>(cfg.xs.size()) + e.next;
  for (int k = 1; k <= c; ++k) {
    double deg = k * per + e.pair * (k * (k - 1) / 2.0 + k * (c - k)) + k;
    if (!(deg < 0))
      throw std::domain_error("non-integrable: tail window of " + std::to_string(k) +
                              " points has degree " + std::to_string(deg));
  }
}

namespace detail {

// Integrates exp(f(z) - shift) over x_next < z_1 < ... < z_c with nested
// tanh-sinh rules in the variables s = t/(L+t), t = z - x_next.
inline double nested_quadrature(const MarkedConfig& cfg, Parity p, double shift, double tol,
                                double* err) {
  int c = cfg.count(p);
  double L = cfg.scale();
  boost::math::quadrature::tanh_sinh<double> ts(12);
  std::vector<double> z(c);
  double total_err = 0;
  std::function<double(int, double)> level = [&](int j, double s_lo) -> double {
    auto f = [&](double s) -> double {
      if (s <= s_lo || s >= 1) return 0.0;
      double t = L * s / (1 - s);
      z[j] = cfg.x_next + t;
      if (j + 1 < c) {
        if (j > 0 && !(z[j] > z[j - 1])) return 0.0;
        double inner = level(j + 1, s);
        return inner * L / ((1 - s) * (1 - s));
      }
      double ld = log_density(cfg, p, z);
      if (ld == neg_inf) return 0.0;
      return std::exp(ld - shift) * L / ((1 - s) * (1 - s));
    };
    double e = 0;
    double v = ts.integrate(f, s_lo, 1.0, tol, &e);
    if (j == 0) total_err = e;
    return v;
  };
  double v = level(0, 0.0);
  if (err) *err = total_err;
  return v;
}

}  // namespace detail

struct Budget {
  std::size_t samples = 1'000'000;  // Monte Carlo
  double tol = 1e-10;               // quadrature relative tolerance
  std::uint64_t seed = 1;
};

// Z_N (odd) or W_N (even).
inline PartitionEval normalize(const MarkedConfig& cfg, Parity p, Method method,
                               const Budget& budget = {}) {
  cfg.validate();
  int c = cfg.count(p);
  if (c == 0) return {0.0, 1, 0.0, Method::closed_form};
  check_integrable(cfg, p);
  if (method == Method::closed_form) {
    // the only closed form available: one curve, one hitting point
    if (cfg.N() != 1) throw std::invalid_argument("closed form only available for N = 1");
    double k = cfg.kappa;
    return {log_beta_fn(2 / k, 2 / k) - 2 / k * std::log(cfg.x_next - cfg.x(0)), 1, 0.0,
            Method::closed_form};
  }
  auto e = exponents(cfg, p);
  double L = cfg.scale();
  // reference point to keep exponentials in range
  std::vector<double> zr(c);
  for (int j = 0; j < c; ++j) zr[j] = cfg.x_next + L * (j + 1);
  double shift = log_density(cfg, p, zr) + c * std::log(L);

  if (method == Method::quadrature) {
    if (c > 3) throw std::invalid_argument("quadrature supports at most 3 hitting points");
    double err = 0;
    double v = detail::nested_quadrature(cfg, p, shift, budget.tol, &err);
    return {std::log(v) + shift, 1, err * std::exp(shift), Method::quadrature};
  }

  // importance sampling: each t = z - x_next drawn from a scaled beta-prime law
  // matching the density's exponent at x_next and its single-point tail
  double alpha = e.next + 1;
  double tail = e.marked * static_cast<double>(cfg.xs.size()) + e.next + e.pair * (c - 1);
  double beta = -tail - 1;
  if (!(beta > 0)) beta = 0.5;
  double lb = log_beta_fn(alpha, beta);
  double log_cfact = std::lgamma(c + 1.0);
  const std::size_t block = 1 << 14;
  std::size_t nblocks = (budget.samples + block - 1) / block;
  std::vector<double> sums(nblocks), sq(nblocks);
  std::vector<std::size_t> counts(nblocks);
  parallel_for(nblocks, [&](std::size_t b) {
    Rng rng = make_rng(budget.seed, b);
    std::size_t n = std::min(block, budget.samples - b * block);
    std::vector<double> t(c), z(c), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      double lq = log_cfact;
      for (int j = 0; j < c; ++j) {
        double s = beta_variate(rng, alpha, beta);
        s = std::clamp(s, 1e-300, 1 - 1e-16);
        t[j] = L * s / (1 - s);
        lq += (alpha - 1) * std::log(s) + (beta - 1) * std::log1p(-s) - lb + std::log(L) -
              2 * std::log(L + t[j]);
      }
      std::sort(t.begin(), t.end());
      for (int j = 0; j < c; ++j) z[j] = cfg.x_next + t[j];
      double ld = log_density(cfg, p, z);
      w[i] = ld == neg_inf ? 0.0 : std::exp(ld - shift - lq);
    }
    sums[b] = pairwise_sum(w);
    for (auto& v : w) v *= v;
    sq[b] = pairwise_sum(w);
    counts[b] = n;
  });
  double n = static_cast<double>(budget.samples);
  double m = pairwise_sum(sums) / n;
  double var = pairwise_sum(sq) / n - m * m;
  double se = std::sqrt(std::max(var, 0.0) / n);
  return {std::log(m) + shift, 1, se * std::exp(shift), Method::monte_carlo};
}

struct IdentityCheck {
  PartitionEval Z, W;
  double lhs, rhs, rel_err, rel_sigma;  // rel_sigma: combined standard error relative to rhs
};

// | B^{1{N odd}} Z_N - prod (x_next - x_i)^{2/kappa} W_N | / RHS
inline IdentityCheck check_partition_identity(const MarkedConfig& cfg, Method method,
                                              const Budget& budget = {}) {
  cfg.validate();
  const double k = cfg.kappa;
  int N = cfg.N();
  IdentityCheck out;
  Budget b2 = budget;
  b2.seed = budget.seed ^ 0x9e3779b97f4a7c15ULL;
  out.Z = normalize(cfg, Parity::odd, method, budget);
  out.W = normalize(cfg, Parity::even, method, b2);
  double B = (N % 2 == 1) ? beta_fn(2 / k, 2 / k) : 1.0;
  double lpre = 0;
  for (int i = 0; i < N; ++i) lpre += 2 / k * std::log(cfg.x_next - cfg.x(i));
  // compare in a common scale to avoid overflow
  double ref = out.W.log_value + lpre;
  out.lhs = B * std::exp(out.Z.log_value - ref);
  out.rhs = 1.0;
  out.rel_err = std::abs(out.lhs - out.rhs);
  double sl = B * out.Z.std_error / std::exp(ref);
  double sr = out.W.rel_error();
  out.rel_sigma = std::sqrt(sl * sl + sr * sr);
  out.lhs *= std::exp(ref);
  out.rhs = std::exp(ref);
  return out;
}

// ---- Ising partition functions ----

struct PairPartition {
  std::vector<std::pair<int, int>> pairs;  // (a, b), a < b, sorted by a; 1-based
  int sign = 1;
};

inline int pairing_sign(const std::vector<std::pair<int, int>>& w) {
  int neg = 0;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = i + 1; j < w.size(); ++j) {
      auto [ai, bi] = w[i];
      auto [aj, bj] = w[j];
      neg += (ai < aj) + (ai < bj) + (bi < aj) + (bi < bj);
    }
  return neg % 2 == 0 ? 1 : -1;
}

// All pair partitions of {1..2n}, generated by pairing the smallest unpaired index.
inline std::vector<PairPartition> pair_partitions(int n) {
  std::vector<PairPartition> out;
  std::vector<bool> used(2 * n + 1, false);
  std::vector<std::pair<int, int>> cur;
  std::function<void()> rec = [&] {
    int a = 1;
    while (a <= 2 * n && used[a]) ++a;
    if (a > 2 * n) {
      out.push_back({cur, pairing_sign(cur)});
      return;
    }
    used[a] = true;
    for (int b = a + 1; b <= 2 * n; ++b) {
      if (used[b]) continue;
      used[b] = true;
      cur.emplace_back(a, b);
      rec();
      cur.pop_back();
      used[b] = false;
    }
    used[a] = false;
  };
  rec();
  return out;
}

inline double eval_R(const std::vector<double>& ys, double y_next) {
  int N = static_cast<int>(ys.size());
  if (N < 1) throw std::invalid_argument("eval_R: need N >= 1");
  if (N > 12)
    throw std::invalid_argument("eval_R: N > 12 rejected (the pairing sum has (2n-1)!! terms); "
                                "split the configuration or use N <= 12");
  for (int i = 1; i < N; ++i)
    if (!(ys[i] > ys[i - 1])) throw std::invalid_argument("eval_R: ys must be strictly increasing");
  if (!(y_next > ys.back())) throw std::invalid_argument("eval_R: y_next must exceed ys");
  // y(1..N) = ys, y(N+1) = y_next
  auto y = [&](int i) { return i <= N ? ys[i - 1] : y_next; };
  int n = (N % 2 == 0) ? N / 2 : (N + 1) / 2;
  int excl = (N % 2 == 0) ? -1 : N + 1;
  double pre = 1;
  for (int k = 1; k <= N; ++k) pre /= std::sqrt(y_next - y(k));
  double sum = 0;
  for (auto& w : pair_partitions(n)) {
    double prod = 1;
    for (auto [a, b] : w.pairs) {
      if (b == excl) continue;
      prod *= (2 * y_next - y(a) - y(b)) / (y(b) - y(a));
    }
    sum += w.sign * prod;
  }
  return pre * sum;
}

// Residual of the second-order PDE at kappa = 3, h = 1/2 (central differences),
// normalized by |R|. i is 1-based.
inline double bpz_residual(const std::vector<double>& ys, double y_next, int i, double h) {
  int N = static_cast<int>(ys.size());
  if (i < 1 || i > N) throw std::invalid_argument("bpz_residual: index out of range");
  double span = y_next - ys.front();
  if (h < 1e-6 * span)
    throw std::invalid_argument("bpz_residual: step too small, round-off would dominate the "
                                "second difference");
  std::vector<double> all(ys);
  all.push_back(y_next);
  auto R = [&](const std::vector<double>& v) {
    return eval_R(std::vector<double>(v.begin(), v.end() - 1), v.back());
  };
  auto shifted = [&](int j, double d) {
    auto v = all;
    v[j - 1] += d;
    return v;
  };
  double R0 = R(all);
  double yi = all[i - 1];
  double d2 = (R(shifted(i, h)) - 2 * R0 + R(shifted(i, -h))) / (h * h);
  double res = 1.5 * d2;
  for (int j = 1; j <= N + 1; ++j) {
    if (j == i) continue;
    double dj = (R(shifted(j, h)) - R(shifted(j, -h))) / (2 * h);
    res += 2.0 / (all[j - 1] - yi) * dj;
    if (j <= N) res -= R0 / ((all[j - 1] - yi) * (all[j - 1] - yi));
  }
  res -= 0.125 * R0 / ((y_next - yi) * (y_next - yi));
  return res / std::abs(R0);
}

struct LimitProbability {
  double via_Z, via_W, value, sigma;
};

// Both expressions of the limiting crossing probability F_N.
inline LimitProbability limit_probability(const std::vector<double>& ys, double y_next,
                                          double kappa = 3.0, Method method = Method::quadrature,
                                          const Budget& budget = {}) {
  auto cfg = MarkedConfig::spread(kappa, ys, y_next);
  int N = cfg.N();
  double R = eval_R(ys, y_next);
  if (!(R > 0)) throw std::domain_error("limit_probability: R_N not positive at this point");
  double lB = log_beta_fn(2 / kappa, 2 / kappa);
  double lv = 0, l1 = 0, l2 = 0;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) lv += 2 / kappa * std::log(ys[j] - ys[i]);
  for (int i = 0; i < N; ++i) {
    l1 += (kappa - 6) / (2 * kappa) * std::log(y_next - ys[i]);
    l2 += (kappa - 2) / (2 * kappa) * std::log(y_next - ys[i]);
  }
  Budget b2 = budget;
  b2.seed ^= 0x51ed;
  auto Z = normalize(cfg, Parity::odd, method, budget);
  auto W = normalize(cfg, Parity::even, method, b2);
  LimitProbability out;
  out.via_Z = std::exp(-(N / 2) * lB + lv + l1 + Z.log_value - std::log(R));
  out.via_W = std::exp(-((N + 1) / 2) * lB + lv + l2 + W.log_value - std::log(R));
  out.value = 0.5 * (out.via_Z + out.via_W);
  out.sigma = std::hypot(out.via_Z * Z.rel_error(), out.via_W * W.rel_error());
  double tol = std::max(5 * out.sigma, 1e-6 * out.value);
  if (std::abs(out.via_Z - out.via_W) > tol)
    throw std::runtime_error("limit_probability: the two expressions disagree (" +
                             std::to_string(out.via_Z) + " vs " + std::to_string(out.via_W) + ")");
  return out;
}

}  // namespace msle
