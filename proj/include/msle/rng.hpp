#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <algorithm>
#include <thread>
#include <vector>
#include <functional>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/beta_distribution.hpp>

namespace msle {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used to decorrelate (master, index) pairs
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for replica `index` of a run with master seed `master`.
inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(replica_seed(master, index)),
                    static_cast<std::uint32_t>(replica_seed(master, index) >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  // 53-bit uniform on (0,1)
  double u;
  do {
    u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  } while (u == 0.0);
  return u;
}

inline double normal(Rng& rng) {
  boost::random::normal_distribution<double> d;
  return d(rng);
}

inline double beta_variate(Rng& rng, double a, double b) {
  boost::random::beta_distribution<double> d(a, b);
  return d(rng);
}

inline unsigned worker_count() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs body(i) for i in [0,n). Each index owns its own output slot, so the
// result does not depend on the number of threads.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                         unsigned threads = 0) {
  if (threads == 0) threads = worker_count();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) body(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace msle
