#include <gtest/gtest.h>

#include <msle/sde.hpp>
#include <msle/stats.hpp>

#include <boost/math/distributions/beta.hpp>

using namespace msle;

TEST(Driver, VarianceIsKappaT) {
  const double kappa = 3.0, T = 0.5;
  std::vector<double> wT(10000);
  for (std::size_t r = 0; r < wT.size(); ++r) {
    SleRunConfig c;
    c.kappa = kappa;
    c.dt = 0.05;
    c.max_time = T;
    wT[r] = sample_driver(c, replica_seed(17, r)).driver.values.back();
  }
  double v = variance(wT);
  // sd of the sample variance of a Gaussian: sigma^2 sqrt(2/(n-1))
  double se = kappa * T * std::sqrt(2.0 / (wT.size() - 1));
  EXPECT_LT(std::abs(v - kappa * T), 3 * se);
}

TEST(Driver, IncrementsHaveVarianceKappaDt) {
  SleRunConfig c;
  c.kappa = 8.0 / 3.0;
  c.dt = 1e-3;
  c.max_time = 10.0;
  auto run = sample_driver(c, 3);
  std::vector<double> inc;
  for (std::size_t k = 1; k < run.driver.values.size(); ++k)
    inc.push_back((run.driver.values[k] - run.driver.values[k - 1]) / std::sqrt(c.kappa * c.dt));
  EXPECT_LT(std::abs(mean(inc)), 3 / std::sqrt(double(inc.size())));
  EXPECT_LT(std::abs(variance(inc) - 1), 3 * std::sqrt(2.0 / inc.size()));
  auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  EXPECT_LT(ks_statistic(inc, cdf), ks_critical(0.01, inc.size()));
}

TEST(Driver, GridSizeAndStart) {
  SleRunConfig c;
  c.start = 0.4;
  c.dt = 0.003;
  c.max_time = 1.0;
  auto run = sample_driver(c, 1);
  EXPECT_EQ(run.driver.times.size(), static_cast<std::size_t>(std::ceil(1.0 / 0.003)) + 1);
  EXPECT_EQ(run.driver.values.front(), 0.4);
  EXPECT_NEAR(run.driver.times.back(), 1.0, 1e-12);
  EXPECT_FALSE(run.hit.has_value());
}

TEST(Driver, Reproducible) {
  SleRunConfig c;
  c.forces = {{Side::right, 1.0, (c.kappa - 6) / 2, false}};
  c.stop = StopRule::interval(1.0);
  auto a = sample_driver(c, 99), b = sample_driver(c, 99);
  EXPECT_EQ(a.driver.values, b.driver.values);
  EXPECT_EQ(a.hit->hit_point, b.hit->hit_point);
}

TEST(Driver, HitsTargetIntervalAlways) {
  const double k = 8.0 / 3.0;
  int hits = 0;
  for (int r = 0; r < 1000; ++r) {
    SleRunConfig c;
    c.kappa = k;
    c.forces = {{Side::right, 1.0, (k - 6) / 2, false}};
    c.stop = StopRule::interval(1.0);
    auto run = sample_driver(c, replica_seed(5, r));
    if (run.hit && run.hit->reason == HitReason::hit_interval) ++hits;
  }
  EXPECT_EQ(hits, 1000);
}

TEST(Driver, ForcePointsStayOrdered) {
  const double k = 3.0;
  SleRunConfig c;
  c.kappa = k;
  c.start = 0.0;
  c.forces = {{Side::left, -0.5, 2, false}, {Side::right, 0.3, 2, false},
              {Side::right, 1.0, (k - 2) / 2, false}, {Side::right, 2.0, -4, false}};
  c.stop = StopRule::interval(1.0);
  for (int r = 0; r < 50; ++r) {
    auto run = sample_driver(c, replica_seed(8, r));
    for (std::size_t s = 0; s < run.driver.values.size(); ++s) {
      double W = run.driver.values[s];
      ASSERT_LE(run.force_paths[0][s], W);
      for (std::size_t j = 1; j < 4; ++j) ASSERT_GE(run.force_paths[j][s], W);
      for (std::size_t j = 1; j + 1 < 4; ++j)
        ASSERT_LE(run.force_paths[j][s], run.force_paths[j + 1][s]);
    }
  }
}

TEST(Driver, RejectsMisorderedForces) {
  SleRunConfig c;
  c.forces = {{Side::right, 2.0, 2, false}, {Side::right, 1.0, 2, false}};
  EXPECT_THROW(sample_driver(c, 1), std::invalid_argument);
  c.forces = {{Side::left, -1.0, 2, false}, {Side::left, -0.5, 2, false}};
  EXPECT_THROW(sample_driver(c, 1), std::invalid_argument);
  c.forces = {};
  c.kappa = 4.5;
  EXPECT_THROW(sample_driver(c, 1), std::invalid_argument);
}

TEST(FlowLine, SingleCurveForceList) {
  auto cfg = MarkedConfig::spread(8.0 / 3.0, {0.0}, 1.0);
  auto f = flow_line_forces(1, cfg, {}, Parity::odd);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].side, Side::right);
  EXPECT_EQ(f[0].location, 1.0);
  EXPECT_DOUBLE_EQ(f[0].weight, (8.0 / 3.0 - 6) / 2);
  for (int r = 0; r < 100; ++r) {
    auto s = sample_flow_line_marginal(1, cfg, {}, Parity::odd, replica_seed(2, r));
    EXPECT_GT(s.landing, 1.0 - 1e-6);
    EXPECT_EQ(s.hit.reason, HitReason::hit_interval);
  }
}

TEST(FlowLine, ForceListsByParity) {
  double k = 3.0;
  auto cfg = MarkedConfig::spread(k, {0.0, 1.0, 2.0}, 3.0);
  auto f = flow_line_forces(2, cfg, {4.0}, Parity::odd);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0].side, Side::left);
  EXPECT_EQ(f[0].location, 0.0);
  EXPECT_EQ(f[1].location, 2.0);
  EXPECT_DOUBLE_EQ(f[2].weight, (k - 6) / 2);
  EXPECT_EQ(f[3].weight, -4.0);
  auto g = flow_line_forces(3, cfg, {4.0, 5.0}, Parity::even);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g[0].location, 1.0);
  EXPECT_EQ(g[1].location, 0.0);
  EXPECT_DOUBLE_EQ(g[2].weight, (k - 2) / 2);
  EXPECT_THROW(flow_line_forces(1, cfg, {4.0}, Parity::even), std::invalid_argument);
  EXPECT_THROW(flow_line_forces(1, cfg, {2.5}, Parity::odd), std::invalid_argument);
  auto col = MarkedConfig::same_point(k, 3, 0.0, 1.0);
  auto h = flow_line_forces(3, col, {2.0}, Parity::odd);
  EXPECT_TRUE(h[0].prime_end);
  EXPECT_EQ(h[0].weight, 4.0);
}

TEST(FlowLine, EvenTwoCurvesLandsAtHittingPoint) {
  auto cfg = MarkedConfig::spread(8.0 / 3.0, {0.0, 0.5}, 1.0);
  double w1 = 1.7;
  for (int r = 0; r < 1000; ++r) {
    auto s = sample_flow_line_marginal(2, cfg, {w1}, Parity::even, replica_seed(4, r));
    EXPECT_EQ(s.landing, w1) << r;
  }
}

TEST(FlowLine, OddLandingBetweenNextAndFirstHit) {
  auto cfg = MarkedConfig::spread(3.0, {0.0, 0.5, 0.8}, 1.0);
  double z1 = 1.6;
  for (int r = 0; r < 200; ++r) {
    auto s = sample_flow_line_marginal(3, cfg, {z1}, Parity::odd, replica_seed(6, r));
    EXPECT_GT(s.landing, 1.0 - 1e-6);
    EXPECT_LT(s.landing, z1 + 1e-6);
  }
}

TEST(FlowLine, StepRefinementKeepsLandingLaw) {
  auto cfg = MarkedConfig::spread(8.0 / 3.0, {0.0}, 1.0);
  const int n = 10000;
  std::vector<double> a(n), b(n);
  FlowLineOptions coarse, fine;
  fine.dt = coarse.dt / 2;
  parallel_for(n, [&](std::size_t r) {
    a[r] = sample_flow_line_marginal(1, cfg, {}, Parity::odd, replica_seed(31, r), coarse).landing;
    b[r] = sample_flow_line_marginal(1, cfg, {}, Parity::odd, replica_seed(32, r), fine).landing;
  });
  EXPECT_LE(ks_statistic(a, b), 0.02);
}

// For a single curve, (x2 - x1)/(p - x1) ~ Beta(2/kappa, 2/kappa); this follows
// from the scale-invariant harmonic function of (V_x - W)/(V_y - W).
TEST(FlowLine, SingleCurveLandingLaw) {
  for (double k : {8.0 / 3.0, 3.0}) {
    auto cfg = MarkedConfig::spread(k, {-0.5}, 1.0);
    const int n = 2000;
    std::vector<double> s(n);
    parallel_for(n, [&](std::size_t r) {
      double p = sample_flow_line_marginal(1, cfg, {}, Parity::odd, replica_seed(41, r)).landing;
      s[r] = 1.5 / (p + 0.5);
    });
    boost::math::beta_distribution<> B(2 / k, 2 / k);
    double ks = ks_statistic(s, [&](double x) { return boost::math::cdf(B, std::clamp(x, 0.0, 1.0)); });
    EXPECT_LE(ks, 0.05) << k;
  }
}
