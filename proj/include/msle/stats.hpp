#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace msle {

// Pairwise summation: the result depends only on the order of the input.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0;
    for (double v : x) s += v;
    return s;
  }
  std::size_t h = x.size() / 2;
  return pairwise_sum(x.subspan(0, h)) + pairwise_sum(x.subspan(h));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of empty sample");
  return pairwise_sum(x) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  double m = mean(x);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - m) * (x[i] - m);
  return pairwise_sum(d) / static_cast<double>(x.size() - 1);
}

inline double std_error(std::span<const double> x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

// Two-sided one-sample KS statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(x.begin(), x.end());
  double n = static_cast<double>(x.size()), d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// Two-sample KS statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

// Asymptotic two-sided KS critical value (Smirnov) for significance alpha.
inline double ks_critical(double alpha, std::size_t n, std::size_t m = 0) {
  double c = std::sqrt(-0.5 * std::log(alpha / 2));
  double ne = m == 0 ? n : static_cast<double>(n) * m / static_cast<double>(n + m);
  return c / std::sqrt(ne);
}

struct BootstrapResult {
  double estimate;
  double sigma;  // bootstrap standard deviation of the statistic
  double lo, hi; // 95% percentile interval
};

inline BootstrapResult bootstrap(std::span<const double> x,
                                 const std::function<double(std::span<const double>)>& stat,
                                 std::size_t reps, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xb007);
  std::vector<double> vals(reps), buf(x.size());
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& v : buf) v = x[pick(rng)];
    vals[r] = stat(buf);
  }
  std::sort(vals.begin(), vals.end());
  BootstrapResult out;
  out.estimate = stat(x);
  out.sigma = std::sqrt(variance(vals));
  out.lo = vals[static_cast<std::size_t>(0.025 * (reps - 1))];
  out.hi = vals[static_cast<std::size_t>(0.975 * (reps - 1))];
  return out;
}

// Discrete Frechet distance between vertex sequences. Upper bound for the
// infimum over reparametrizations of the sup distance.
inline double frechet_distance(const std::vector<std::complex<double>>& a,
                               const std::vector<std::complex<double>>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("frechet_distance: empty curve");
  std::size_t n = a.size(), m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double d = std::abs(a[i] - b[j]);
      if (i == 0 && j == 0) cur[j] = d;
      else if (i == 0) cur[j] = std::max(cur[j - 1], d);
      else if (j == 0) cur[j] = std::max(prev[j], d);
      else cur[j] = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

// Normalized weighted histogram on fixed edges; mass outside goes to the end bins.
inline std::vector<double> histogram(std::span<const double> x, std::span<const double> w,
                                     const std::vector<double>& edges) {
  std::size_t nb = edges.size() - 1;
  std::vector<std::vector<double>> parts(nb);
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto it = std::upper_bound(edges.begin(), edges.end(), x[i]);
    std::size_t k = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    k = std::min(k, nb - 1);
    parts[k].push_back(w.empty() ? 1.0 : w[i]);
  }
  std::vector<double> h(nb);
  for (std::size_t k = 0; k < nb; ++k) h[k] = pairwise_sum(parts[k]);
  double tot = pairwise_sum(h);
  for (auto& v : h) v /= tot;
  return h;
}

inline double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

// Potential scale reduction factor over equal-length chains.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  std::size_t m = chains.size(), n = chains.front().size();
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean(chains[c]);
    vars[c] = variance(chains[c]);
  }
  double W = mean(vars), B = n * variance(means);
  if (W <= 0) return 1.0;
  double vhat = (n - 1.0) / n * W + B / n;
  return std::sqrt(vhat / W);
}

// Integrated autocorrelation time with Sokal's automatic window.
inline double autocorrelation_time(std::span<const double> x) {
  std::size_t n = x.size();
  if (n < 8) return 1.0;
  double m = mean(x), v = 0;
  for (double a : x) v += (a - m) * (a - m);
  if (v <= 0) return 1.0;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < n / 2; ++lag) {
    double c = 0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - m) * (x[i + lag] - m);
    tau += 2.0 * c / v;
    if (static_cast<double>(lag) >= 5.0 * tau) break;
  }
  return std::max(1.0, tau);
}

}  // namespace msle
