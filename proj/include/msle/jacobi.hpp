#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "config.hpp"
#include "mcmc.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace msle {

// Density on 0<y_1<...<y_n<1 proportional to prod|y_j-y_i|^beta prod y^a (1-y)^b.
struct JacobiParams {
  int n = 1;
  double beta = 2;
  double a = 0, b = 0;

  void validate() const {
    if (n < 1) throw std::invalid_argument("Jacobi: n must be >= 1");
    if (!(beta > 0)) throw std::invalid_argument("Jacobi: beta must be positive");
    if (!(a > -1 && b > -1)) throw std::invalid_argument("Jacobi: a, b must exceed -1");
  }
};

using Spectrum = std::vector<double>;

inline double log_density(const JacobiParams& p, const Spectrum& y) {
  p.validate();
  if (static_cast<int>(y.size()) != p.n) throw std::invalid_argument("Jacobi: wrong spectrum size");
  double s = 0;
  for (int j = 0; j < p.n; ++j) {
    if (!(y[j] > 0 && y[j] < 1)) return -INFINITY;
    if (j > 0 && !(y[j] > y[j - 1])) return -INFINITY;
    s += p.a * std::log(y[j]) + p.b * std::log1p(-y[j]);
    for (int i = 0; i < j; ++i) s += p.beta * std::log(y[j] - y[i]);
  }
  return s;
}

// Killip-Nenciu model: Verblunsky coefficients alpha_k with independent
// Beta-type laws on (-1,1), mapped by the Geronimus relations to a Jacobi
// matrix whose eigenvalues lambda in (-2,2) give y = (2 - lambda)/4.
inline Spectrum sample_tridiag(const JacobiParams& p, Rng& rng) {
  p.validate();
  int n = p.n;
  // B(s,t) on (-1,1): density ~ (1-x)^{s-1} (1+x)^{t-1}, i.e. x = 1 - 2*Beta(s,t)
  auto draw = [&](double s, double t) { return 1.0 - 2.0 * beta_variate(rng, s, t); };
  std::vector<double> alpha(2 * n + 2);
  auto A = [&](int k) -> double& { return alpha[k + 2]; };  // A(-2), A(-1) allowed
  A(-2) = A(-1) = -1;
  for (int k = 0; k <= 2 * n - 2; ++k) {
    double m = 2.0 * n - k - 2;
    if (k % 2 == 0)
      A(k) = draw(m * p.beta / 4 + p.a + 1, m * p.beta / 4 + p.b + 1);
    else
      A(k) = draw((m - 1) * p.beta / 4 + p.a + p.b + 2, (m + 1) * p.beta / 4);
  }
  A(2 * n - 1) = -1;
  Eigen::VectorXd diag(n), off(std::max(n - 1, 1));
  for (int k = 0; k < n; ++k) {
    diag(k) = (1 - A(2 * k - 1)) * A(2 * k) - (1 + A(2 * k - 1)) * A(2 * k - 2);
    if (k + 1 < n)
      off(k) = std::sqrt(std::max(0.0, (1 - A(2 * k - 1)) * (1 - A(2 * k) * A(2 * k)) *
                                           (1 + A(2 * k + 1))));
  }
  Spectrum y(n);
  if (n == 1) {
    y[0] = (2 - diag(0)) / 4;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off.head(n - 1), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("Jacobi: eigen-solver failed");
    for (int k = 0; k < n; ++k) y[k] = (2 - es.eigenvalues()(k)) / 4;
  }
  std::sort(y.begin(), y.end());
  for (auto& v : y) v = std::clamp(v, 1e-300, 1 - 1e-16);
  return y;
}

inline std::vector<Spectrum> sample_tridiag(const JacobiParams& p, std::size_t draws,
                                            std::uint64_t seed) {
  std::vector<Spectrum> out(draws);
  const std::size_t block = 4096;
  std::size_t nb = (draws + block - 1) / block;
  parallel_for(nb, [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    for (std::size_t i = b * block; i < std::min(draws, (b + 1) * block); ++i)
      out[i] = sample_tridiag(p, rng);
  });
  return out;
}

inline McmcReport sample_mcmc(const JacobiParams& p, std::size_t draws, std::uint64_t seed) {
  p.validate();
  return ordered_simplex_mcmc(p.n, [&](const Spectrum& y) { return log_density(p, y); }, draws, seed);
}

// Parameters as printed in the same-point hitting-law statement:
// odd: Jacobi(M; 8/kappa, (2N-4M+1)/2, 3/2); even: Jacobi(N-M; 8/kappa, (4M-2N+3)/2, 1/2).
inline JacobiParams stated_link_params(int N, double kappa, Parity p) {
  int M = N / 2;
  if (p == Parity::odd) return {M, 8 / kappa, (2.0 * N - 4 * M + 1) / 2, 1.5};
  return {N - M, 8 / kappa, (4.0 * M - 2 * N + 3) / 2, 0.5};
}

// Exponents obtained by pushing the same-point hitting density through y = 1/z:
// y^{(beta/2) a - 1} (1-y)^{(beta/2) b - 1} with (a, b) the stated parameters.
inline JacobiParams derived_link_params(int N, double kappa, Parity p) {
  auto s = stated_link_params(N, kappa, p);
  return {s.n, s.beta, s.beta / 2 * s.a - 1, s.beta / 2 * s.b - 1};
}

}  // namespace msle
