#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rng.hpp"
#include "stats.hpp"

namespace msle {

struct McmcReport {
  std::vector<std::vector<double>> draws;
  double gelman_rubin = 1;
  double tau = 1;  // integrated autocorrelation time of the mean coordinate
  std::size_t thin = 1, burn_in = 0;
  bool converged = true;
};

using LogTarget = std::function<double(const std::vector<double>&)>;

// Random-walk Metropolis on the ordered simplex 0 < y_1 < ... < y_n < 1
// (the target returns -inf off its support), 4 chains with single-site
// updates. Burn-in is ten integrated autocorrelation times of a pilot run;
// chains are thinned by one autocorrelation time.
inline McmcReport ordered_simplex_mcmc(int n, const LogTarget& logp, std::size_t draws,
                                       std::uint64_t seed) {
  const int chains = 4;
  McmcReport rep;
  std::vector<Rng> rngs;
  std::vector<std::vector<double>> state(chains);
  std::vector<double> lp(chains);
  for (int c = 0; c < chains; ++c) {
    rngs.push_back(make_rng(seed, 1000 + c));
    state[c].resize(n);
    for (int j = 0; j < n; ++j) state[c][j] = (j + 0.5 + 0.4 * (uniform01(rngs[c]) - 0.5)) / n;
    lp[c] = logp(state[c]);
  }
  double step = 0.3 / n;
  auto sweep = [&](int c) {
    auto& y = state[c];
    int acc = 0;
    for (int j = 0; j < n; ++j) {
      double old = y[j];
      y[j] = old + step * normal(rngs[c]);
      double l = (y[j] > 0 && y[j] < 1) ? logp(y) : -INFINITY;
      if (std::log(uniform01(rngs[c])) < l - lp[c]) {
        lp[c] = l;
        ++acc;
      } else {
        y[j] = old;
      }
    }
    return acc;
  };
  // tune the step towards ~40% acceptance on chain 0
  for (int it = 0; it < 20; ++it) {
    int acc = 0;
    for (int s = 0; s < 200; ++s) acc += sweep(0);
    step *= std::exp(double(acc) / (200.0 * n) - 0.4);
  }
  std::vector<double> trace(20000);
  for (auto& v : trace) {
    sweep(0);
    double s = 0;
    for (double a : state[0]) s += a;
    v = s / n;
  }
  rep.tau = autocorrelation_time(trace);
  rep.burn_in = static_cast<std::size_t>(std::ceil(10 * rep.tau));
  rep.thin = static_cast<std::size_t>(std::ceil(rep.tau));
  std::size_t per = (draws + chains - 1) / chains;
  std::vector<std::vector<double>> means(chains);
  std::vector<std::vector<std::vector<double>>> got(chains);
  parallel_for(chains, [&](std::size_t c) {
    for (std::size_t s = 0; s < rep.burn_in; ++s) sweep(int(c));
    for (std::size_t d = 0; d < per; ++d) {
      for (std::size_t s = 0; s < rep.thin; ++s) sweep(int(c));
      got[c].push_back(state[c]);
      double m = 0;
      for (double a : state[c]) m += a;
      means[c].push_back(m / n);
    }
  });
  rep.gelman_rubin = per > 1 ? gelman_rubin(means) : 1.0;
  rep.converged = rep.gelman_rubin <= 1.05;
  for (std::size_t d = 0; d < per; ++d)
    for (int c = 0; c < chains; ++c)
      if (rep.draws.size() < draws) rep.draws.push_back(got[c][d]);
  return rep;
}

}  // namespace msle
