#include <gtest/gtest.h>

#include <msle/multisle.hpp>

#include <boost/math/distributions/beta.hpp>

using namespace msle;

namespace {
constexpr double k83 = 8.0 / 3.0;

std::vector<double> first(const std::vector<std::vector<double>>& d) {
  std::vector<double> v;
  for (auto& x : d) v.push_back(x.at(0));
  return v;
}
}  // namespace

TEST(HittingPoints, CountZeroGivesEmptyTuples) {
  auto cfg = MarkedConfig::spread(k83, {0.0}, 1.0);
  EXPECT_TRUE(sample_hitting_points(cfg, Parity::odd, 1).empty());
  auto b = sample_hitting_batch(cfg, Parity::odd, 5, 1);
  ASSERT_EQ(b.draws.size(), 5u);
  for (auto& d : b.draws) EXPECT_TRUE(d.empty());
}

TEST(HittingPoints, SingleCurveRhoIsBetaInReciprocalCoordinate) {
  // (x_2 - x_1)/(w - x_1) ~ Beta(2/kappa, 2/kappa)
  for (double k : {k83, 3.0}) {
    auto cfg = MarkedConfig::spread(k, {-0.5}, 1.0);
    auto w = first(sample_hitting_batch(cfg, Parity::even, 20000, 3).draws);
    std::vector<double> s;
    for (double v : w) s.push_back(1.5 / (v + 0.5));
    boost::math::beta_distribution<> B(2 / k, 2 / k);
    EXPECT_LT(ks_statistic(s, [&](double x) { return boost::math::cdf(B, std::clamp(x, 0.0, 1.0)); }),
              ks_critical(0.01, s.size()));
    SingleHitSampler smp(cfg, Parity::even);
    for (double x : {1.2, 2.0, 5.0, 40.0})
      EXPECT_NEAR(smp.cdf(x), 1 - boost::math::cdf(B, 1.5 / (x + 0.5)), 1e-9) << x;
  }
}

TEST(HittingPoints, SupportRespected) {
  auto cfg = MarkedConfig::spread(3.0, {0.0, 0.4, 0.7}, 1.0);
  auto b = sample_hitting_batch(cfg, Parity::even, 2000, 4);
  EXPECT_TRUE(b.used_mcmc);
  EXPECT_TRUE(b.converged);
  for (auto& d : b.draws) {
    ASSERT_EQ(d.size(), 2u);
    ASSERT_GT(d[0], 1.0);
    ASSERT_GT(d[1], d[0]);
  }
}

TEST(HittingPoints, McmcAgreesWithInverseCdf) {
  auto cfg = MarkedConfig::spread(k83, {0.0, 0.5}, 1.0);
  auto a = first(sample_hitting_batch(cfg, Parity::odd, 10000, 5).draws);
  auto m = sample_hitting_batch(cfg, Parity::odd, 10000, 6, true);
  EXPECT_TRUE(m.used_mcmc);
  EXPECT_TRUE(m.converged);
  EXPECT_LE(ks_statistic(a, first(m.draws)), 0.02);
}

TEST(HittingPoints, CollapsedLimit) {
  auto col = MarkedConfig::same_point(3.0, 2, 0.0, 1.0);
  auto near = MarkedConfig::spread(3.0, {0.0, 1e-4}, 1.0);
  for (Parity p : {Parity::odd, Parity::even}) {
    auto a = first(sample_hitting_batch(col, p, 10000, 7).draws);
    auto b = first(sample_hitting_batch(near, p, 10000, 8).draws);
    EXPECT_LE(ks_statistic(a, b), 0.05) << to_string(p);
  }
}

TEST(System, SingleCurveLandsBeyondNext) {
  auto cfg = MarkedConfig::spread(k83, {0.0}, 1.0);
  for (int r = 0; r < 200; ++r) {
    auto s = sample_system(cfg, replica_seed(1, r));
    ASSERT_EQ(s.endpoints.size(), 1u);
    EXPECT_GT(s.endpoints[0], 1.0);
  }
}

TEST(System, EndpointsInterlace) {
  for (auto cfg : {MarkedConfig::spread(k83, {0.0, 0.5}, 1.0),
                   MarkedConfig::spread(3.0, {-1.0, 0.0, 0.5}, 1.2)}) {
    auto ens = sample_ensemble(cfg, 1000, 2);
    EXPECT_EQ(ens.discarded, 0u);
    for (auto& s : ens.systems) ASSERT_TRUE(s.interlaced(cfg.x_next));
  }
}

TEST(System, EvenStartInterlaces) {
  auto cfg = MarkedConfig::spread(3.0, {-1.0, 0.0, 0.5}, 1.2);
  SystemOptions o;
  o.start = Parity::even;
  for (int r = 0; r < 100; ++r) {
    auto s = sample_system(cfg, replica_seed(3, r), o);
    ASSERT_TRUE(s.interlaced(cfg.x_next));
    EXPECT_EQ(s.parity_history, (std::vector<Parity>{Parity::even, Parity::odd, Parity::even}));
    // the outermost curve of the even construction lands on its first hitting point
    EXPECT_EQ(s.endpoints[2], s.hits[0][0]);
  }
}

TEST(System, PolylinesStartAtMarkedPointsAndDoNotCross) {
  // nesting checked up to the polyline resolution (longest chord)
  auto check = [](const MarkedConfig& cfg, std::size_t n, std::uint64_t seed, Ensemble& ens) {
    SystemOptions o;
    o.flow.trace_vertices = 120;
    ens = sample_ensemble(cfg, n, seed, o);
    EXPECT_EQ(ens.discarded, 0u);
    int N = cfg.N();
    for (auto& s : ens.systems) {
      ASSERT_EQ(s.curves.size(), std::size_t(N));
      for (int j = 0; j < N; ++j) {
        EXPECT_NEAR(s.curves[j].vertices.front().real(), cfg.xs[j], 1e-9);
        EXPECT_NEAR(s.curves[j].vertices.front().imag(), 0.0, 1e-9);
        for (auto v : s.curves[j].vertices) ASSERT_GE(v.imag(), -1e-9);
      }
      for (int j = 0; j + 1 < N; ++j) {
        double res = std::max(trace_resolution(s.curves[j]), trace_resolution(s.curves[j + 1]));
        ASSERT_LE(crossing_depth(s.curves[j], s.curves[j + 1]), res) << j;
      }
    }
  };
  Ensemble ens, ens3;
  check(MarkedConfig::spread(k83, {0.0, 0.5}, 1.0), 1000, 4, ens);
  if (HasFatalFailure()) return;
  check(MarkedConfig::spread(3.0, {-1.0, 0.0, 0.5}, 1.2), 100, 6, ens3);
  if (HasFatalFailure()) return;
  // negative control: the outer curve is not inside the inner one
  int flagged = 0;
  for (std::size_t r = 0; r < 50; ++r) {
    auto& s = ens.systems[r];
    double res = std::max(trace_resolution(s.curves[0]), trace_resolution(s.curves[1]));
    flagged += crossing_depth(s.curves[1], s.curves[0]) > res;
  }
  EXPECT_GE(flagged, 45);
}

TEST(System, CollapsedCurvesShareStart) {
  auto cfg = MarkedConfig::same_point(k83, 2, 0.0, 1.0);
  SystemOptions o;
  o.flow.trace_vertices = 60;
  for (int r = 0; r < 50; ++r) {
    auto s = sample_system(cfg, replica_seed(5, r), o);
    EXPECT_TRUE(s.interlaced(1.0));
    for (auto& c : s.curves) EXPECT_NEAR(std::abs(c.vertices.front()), 0.0, 1e-6);
  }
}

TEST(System, Reproducible) {
  auto cfg = MarkedConfig::spread(3.0, {-1.0, 0.0, 0.5}, 1.2);
  auto a = sample_system(cfg, 77), b = sample_system(cfg, 77);
  EXPECT_EQ(a.endpoints, b.endpoints);
}

TEST(System, ScalingCovariance) {
  auto a = MarkedConfig::spread(k83, {0.0, 0.5}, 1.0);
  auto b = MarkedConfig::spread(k83, {0.0, 1.5}, 3.0);
  auto ea = sample_ensemble(a, 1500, 8), eb = sample_ensemble(b, 1500, 9);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> u, v;
    for (auto& s : ea.systems) u.push_back(s.endpoints[j]);
    for (auto& s : eb.systems) v.push_back(s.endpoints[j] / 3);
    EXPECT_LE(ks_statistic(u, v), 0.05) << j;
  }
}

TEST(HittingLaw, SingleCurveAgainstQuadratureCdf) {
  auto cfg = MarkedConfig::spread(k83, {0.0}, 1.0);
  auto ens = sample_ensemble(cfg, 2000, 10);
  SingleHitSampler smp(cfg, Parity::even);
  std::vector<double> e;
  for (auto& s : ens.systems) e.push_back(s.endpoints[0]);
  EXPECT_LE(ks_statistic(e, [&](double x) { return smp.cdf(x); }), 0.05);
}

TEST(HittingLaw, TwoCurvesBothTypes) {
  auto cfg = MarkedConfig::spread(k83, {0.0, 0.5}, 1.0);
  auto rep = verify_hitting_law(cfg, 2000, 11);
  ASSERT_EQ(rep.marginals.size(), 2u);
  EXPECT_EQ(rep.interlaced, rep.replicates);
  for (auto& m : rep.marginals) {
    EXPECT_LE(m.ks, 0.05) << m.name;
    EXPECT_GE(m.mean_s_ref, m.mean_s_ci.lo - 0.01) << m.name;
    EXPECT_LE(m.mean_s_ref, m.mean_s_ci.hi + 0.01) << m.name;
  }
}

TEST(JacobiLink, ImagesInUnitInterval) {
  auto rep = verify_jacobi_link(2, k83, 300, 12);
  for (auto& g : rep.groups) EXPECT_TRUE(g.in_unit_interval) << g.group;
}

// The reciprocal images follow Jacobi with exponents (beta/2) a - 1 and
// (beta/2) b - 1 in terms of the printed parameters (a, b).
TEST(JacobiLink, ThreeCurvesMatchPulledBackDensity) {
  auto rep = verify_jacobi_link(3, 3.0, 2000, 13);
  for (auto& g : rep.groups)
    for (double ks : g.ks_derived) EXPECT_LE(ks, 0.05) << g.group;
}

TEST(JacobiLink, PrintedParametersDisagreeWithPulledBackDensity) {
  // N=2, kappa=8/3, w-type: printed Jacobi(1; 3, 3/2, 1/2) has mean 0.625,
  // the pulled-back density y^{5/4} (1-y)^{-1/4} has mean 3/4.
  auto rep = verify_jacobi_link(2, k83, 2000, 14);
  for (auto& g : rep.groups) {
    if (g.group != "w-type") continue;
    EXPECT_NEAR(g.mean_stated, 0.625, 0.01);
    EXPECT_NEAR(g.mean_derived, 0.75, 0.01);
    EXPECT_GT(std::abs(g.mean - 0.625), 3 * g.mean_se);
    EXPECT_LE(g.ks_derived[0], 0.05);
  }
}

TEST(CascadeWeight, PositiveWithUnitMean) {
  auto cfg = MarkedConfig::spread(3.0, {0.0, 0.5}, 1.0);
  for (auto w : {CascadeWeight::ell, CascadeWeight::eta}) {
    auto rep = verify_cascade_weight(cfg, w, 2000, 15);
    EXPECT_EQ(rep.nonpositive, 0u);
    EXPECT_GT(rep.weight_min, 0.0);
    EXPECT_LT(std::abs(rep.weight_mean - 1), 3 * rep.weight_se);
  }
}

TEST(CascadeWeight, SingleCurveWeightIsOne) {
  auto cfg = MarkedConfig::spread(k83, {0.2}, 1.0);
  for (auto w : {CascadeWeight::ell, CascadeWeight::eta}) {
    auto rep = verify_cascade_weight(cfg, w, 50, 16);
    EXPECT_NEAR(rep.weight_mean, 1.0, 1e-12);
    EXPECT_NEAR(rep.weight_se, 0.0, 1e-12);
  }
}

TEST(CascadeWeight, WeightedBaseMatchesDirect) {
  auto cfg = MarkedConfig::spread(3.0, {0.0, 0.5}, 1.0);
  auto rep = verify_cascade_weight(cfg, CascadeWeight::ell, 2000, 17, {}, 5);
  EXPECT_LE(rep.tv, 0.08);
}

TEST(Martingale, StartsAtOne) {
  MartingaleOptions o;
  o.times = {0.0, 0.01};
  auto rep = verify_martingale({0.0, 0.5}, 1.0, 100, 18, o);
  EXPECT_EQ(rep.mean[0], 1.0);
}

TEST(Martingale, StoppedMeanIsConstant) {
  auto rep = verify_martingale({0.0, 0.5}, 1.0, 10000, 19);
  EXPECT_EQ(rep.times.size(), 20u);
  EXPECT_LE(rep.max_z, 3.0);
}

TEST(Martingale, ThreeCurves) {
  auto rep = verify_martingale({-1.0, 0.0, 0.5}, 1.2, 4000, 20);
  EXPECT_LE(rep.max_z, 3.0);
}

TEST(Martingale, UnstoppedNegativeControl) {
  MartingaleOptions o;
  o.stopping = false;
  auto rep = verify_martingale({0.0, 0.5}, 1.0, 4000, 21, o);
  EXPECT_GT(rep.hit, 0.5);
  EXPECT_GT(rep.max_z, 3.0);
}
