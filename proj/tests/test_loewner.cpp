#include <gtest/gtest.h>

#include <msle/loewner.hpp>
#include <msle/rng.hpp>

using namespace msle;

namespace {

DrivingPath zero_driver(double T, double dt) {
  return DrivingPath::from_function(T, dt, [](double) { return 0.0; });
}

DrivingPath sqrt_driver(double c, double T, double dt) {
  return DrivingPath::from_function(T, dt, [c](double t) { return c * std::sqrt(t); });
}

DrivingPath brownian(double kappa, double T, double dt, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  DrivingPath p;
  double w = 0;
  std::size_t K = static_cast<std::size_t>(std::ceil(T / dt));
  for (std::size_t k = 0; k <= K; ++k) {
    p.times.push_back(k * dt);
    p.values.push_back(w);
    w += std::sqrt(kappa * dt) * normal(rng);
  }
  return p;
}

// Reference solver for dg/dt = 2/(g - W(t)) with a continuous driver: RK4 on a
// fine grid, independent of the slit maps.
cplx rk4_flow(const std::function<double(double)>& W, cplx z, double T, std::size_t steps) {
  double h = T / steps;
  auto f = [&](double t, cplx g) { return 2.0 / (g - W(t)); };
  cplx g = z;
  for (std::size_t k = 0; k < steps; ++k) {
    double t = k * h;
    cplx k1 = f(t, g), k2 = f(t + h / 2, g + h / 2 * k1), k3 = f(t + h / 2, g + h / 2 * k2),
         k4 = f(t + h, g + h * k3);
    g += h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return g;
}

}  // namespace

TEST(Loewner, ZeroDriverBoundaryFlowMatchesClosedForm) {
  auto p = zero_driver(1.0, 1e-3);
  auto f = evolve_point(p, {1.0, 0.0});
  EXPECT_FALSE(f.swallowed_at.has_value());
  for (std::size_t k = 0; k < f.image.size(); ++k)
    EXPECT_NEAR(f.image[k].real(), std::sqrt(1.0 + 4 * p.times[k]), 1e-12);
  EXPECT_NEAR(f.image.back().real(), 2.2360680, 1e-7);
}

TEST(Loewner, ZeroDriverSwallowsInteriorPointAtCapacityOne) {
  auto p = zero_driver(1.5, 1e-3);
  auto f = evolve_point(p, {0.0, 2.0});
  ASSERT_TRUE(f.swallowed_at.has_value());
  EXPECT_NEAR(*f.swallowed_at, 1.0, 1e-3);
}

TEST(Loewner, SqrtDriverMatchesFineReferenceSolve) {
  double c = 1.3;
  auto W = [c](double t) { return c * std::sqrt(t); };
  auto coarse = sqrt_driver(c, 1.0, 1e-4);
  auto fine = sqrt_driver(c, 1.0, 1e-5);
  for (cplx z : {cplx(2.0, 0.0), cplx(-1.5, 0.0), cplx(0.5, 1.5), cplx(-0.3, 2.0)}) {
    auto a = evolve_point(coarse, z), b = evolve_point(fine, z);
    for (std::size_t k = 0; k < a.image.size(); k += 1000)
      EXPECT_LT(std::abs(a.image[k] - b.image[10 * k]), 1e-6) << z << " k=" << k;
    // and the continuous ODE itself
    EXPECT_LT(std::abs(a.image.back() - rk4_flow(W, z, 1.0, 200000)), 1e-5) << z;
  }
}

TEST(Loewner, ZeroDriverTraceIsVerticalSlit) {
  auto tr = trace_curve(zero_driver(1.0, 1e-3));
  EXPECT_EQ(tr.vertices.front(), cplx(0.0, 0.0));
  EXPECT_LT(std::abs(tr.vertices.back() - cplx(0, 2)), 1e-2);
  for (auto v : tr.vertices) {
    EXPECT_GE(v.imag(), 0.0);
    EXPECT_NEAR(v.real(), 0.0, 1e-12);
  }
}

TEST(Loewner, ConstantDriverTranslatesTrace) {
  double c = 0.7;
  auto a = trace_curve(zero_driver(1.0, 1e-2));
  auto b = trace_curve(DrivingPath::from_function(1.0, 1e-2, [c](double) { return c; }));
  ASSERT_EQ(a.vertices.size(), b.vertices.size());
  for (std::size_t k = 0; k < a.vertices.size(); ++k)
    EXPECT_LT(std::abs(a.vertices[k] + c - b.vertices[k]), 1e-12);
}

TEST(Loewner, SqrtDriverTipSelfConverges) {
  auto tip = [](double dt) {
    auto p = sqrt_driver(1.0, 1.0, dt);
    return trace_tip(p, p.steps());
  };
  cplx a = tip(1e-3), b = tip(1e-4);
  EXPECT_LT(std::abs(a - b) / std::abs(b), 1e-3);
}

TEST(Loewner, SelfConvergenceRateOnSmoothDriver) {
  // smooth driver: refinement error ratio per halving should approach 4 (midpoint rule)
  auto drv = [](double dt) {
    return DrivingPath::from_function(1.0, dt, [](double t) { return std::sin(3 * t); });
  };
  auto tip = [&](double dt) {
    auto p = drv(dt);
    return trace_tip(p, p.steps());
  };
  cplx ref = tip(1.0 / 25600);
  double e1 = std::abs(tip(1.0 / 100) - ref);
  double e2 = std::abs(tip(1.0 / 200) - ref);
  EXPECT_GE(e1 / e2, 1.8);
}

TEST(Loewner, InvertMapIdentityAndClosedForm) {
  auto p = zero_driver(1.0, 1e-3);
  cplx w(0.3, 0.9);
  EXPECT_EQ(invert_map(p, 0.0, w), w);
  EXPECT_NEAR(invert_map(p, 1.0, std::sqrt(5.0)), 1.0, 1e-10);
}

TEST(Loewner, RoundTripOnRandomDriver) {
  auto p = brownian(8.0 / 3.0, 1.0, 1e-3, 7);
  cplx z(0.3, 0.7);
  auto f = evolve_point(p, z);
  ASSERT_FALSE(f.swallowed_at.has_value());
  cplx back = invert_map(p, 1.0, f.image.back());
  EXPECT_LT(std::abs(back - z), 1e-8);
}

TEST(Loewner, CapacityAdditivity) {
  auto p = brownian(3.0, 1.0, 1e-3, 11);
  std::size_t j = 400;
  DrivingPath first, rest;
  first.times.assign(p.times.begin(), p.times.begin() + j + 1);
  first.values.assign(p.values.begin(), p.values.begin() + j + 1);
  for (std::size_t k = j; k < p.times.size(); ++k) {
    rest.times.push_back(p.times[k] - p.times[j]);
    rest.values.push_back(p.values[k]);
  }
  for (cplx z : {cplx(2, 0.5), cplx(-1, 3), cplx(0.1, 0.8)}) {
    cplx full = forward_map(p, 1.0, z);
    cplx two = forward_map(rest, rest.end_time(), forward_map(first, first.end_time(), z));
    EXPECT_LT(std::abs(full - two), 1e-8);
  }
}

TEST(Loewner, HullCapacityIsTwiceTime) {
  // g_t(z) = z + 2t/z + O(1/z^2) at infinity
  auto p = brownian(8.0 / 3.0, 0.5, 1e-3, 3);
  for (std::size_t k : {100u, 250u, 500u}) {
    double t = p.times[k];
    cplx z(0, 1e4);
    cplx g = forward_map(p, t, z);
    // subtract translation part: g(z) - z ~ 2t/z
    double cap = ((g - z) * z).real();
    cplx z2(0, 2e4);
    double cap2 = ((forward_map(p, t, z2) - z2) * z2).real();
    EXPECT_NEAR(2 * cap2 - cap, 2 * t, 1e-3 * (1 + t)) << k;
  }
}

TEST(Loewner, MonotoneBoundaryOrder) {
  auto p = brownian(3.0, 1.0, 1e-3, 5);
  std::vector<double> xs = {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0};
  std::vector<Flow> fl;
  for (double x : xs) fl.push_back(evolve_point(p, {x, 0}));
  for (std::size_t k = 0; k < p.times.size(); ++k)
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      auto& a = fl[i];
      auto& b = fl[i + 1];
      if (k < a.image.size() && k < b.image.size()) {
        EXPECT_LT(a.image[k].real(), b.image[k].real());
      }
    }
}

TEST(Loewner, ScalingCovariance) {
  double lam = 2.0;
  auto base = brownian(3.0, 1.0, 1e-3, 21);
  DrivingPath scaled;
  for (std::size_t k = 0; k < base.times.size(); ++k) {
    scaled.times.push_back(lam * lam * base.times[k]);
    scaled.values.push_back(lam * base.values[k]);
  }
  auto a = trace_curve(base, 200), b = trace_curve(scaled, 200);
  for (std::size_t k = 0; k < a.vertices.size(); ++k)
    EXPECT_LT(std::abs(lam * a.vertices[k] - b.vertices[k]), 1e-9);
}

TEST(Loewner, UnzipRecoversDriver) {
  auto p = DrivingPath::from_function(1.0, 1e-3, [](double t) { return std::sin(2 * t); });
  auto tr = trace_curve(p);
  auto back = unzip_curve(tr.vertices);
  EXPECT_NEAR(back.end_time(), 1.0, 1e-6);
  EXPECT_NEAR(back.values.back(), std::sin(2.0), 1e-3);
}

TEST(Loewner, RejectsBadInput) {
  DrivingPath p;
  p.times = {0, 0.1, 0.1};
  p.values = {0, 0, 0};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  auto q = zero_driver(1.0, 0.1);
  EXPECT_THROW(evolve_point(q, {0.0, -1.0}), std::invalid_argument);
  EXPECT_THROW(invert_map(q, 1.0, {0.0, -1.0}), std::invalid_argument);
}
