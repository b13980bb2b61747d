// Desk-scale acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
// Subcommand reports land in $MSLE_OUTPUT_DIR (default ./acceptance_out).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <msle/harness.hpp>

using namespace msle;

namespace {

std::filesystem::path out_dir;
int failures = 0;

json cli_json(std::vector<std::string> args) {
  args.insert(args.end(), {"--out", out_dir.string()});
  std::ostringstream o, e;
  int rc = cli::run(args, o, e);
  if (rc != cli::ok && rc != cli::tolerance_failure)
    throw std::runtime_error(args[0] + " exited " + std::to_string(rc) + ": " + e.str());
  return json::parse(o.str());
}

const json& metric(const json& rep, const std::string& name) {
  for (auto& m : rep["metrics"])
    if (m["name"] == name) return m;
  throw std::runtime_error("no metric " + name);
}
double value(const json& rep, const std::string& name) { return metric(rep, name)["value"].get<double>(); }

template <class F>
void criterion(const std::string& label, F&& body) {
  auto t0 = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail << "error: " << e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (label.back() != '*') failures += !ok;  // starred lines are supplementary
  std::printf("%s %-4s %s  [%.1f s]\n", ok ? "PASS" : "FAIL", label.c_str(), detail.str().c_str(), secs);
  std::fflush(stdout);
}

std::string f(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", x);
  return b;
}

const std::string k83 = format17(8.0 / 3.0);

double max_marginal_ks(const std::vector<Spectrum>& a, const std::vector<Spectrum>& b) {
  auto column = [](const std::vector<Spectrum>& s, std::size_t j) {
    std::vector<double> v;
    for (auto& y : s) v.push_back(y[j]);
    return v;
  };
  double m = 0;
  for (std::size_t j = 0; j < a[0].size(); ++j) m = std::max(m, ks_statistic(column(a, j), column(b, j)));
  return m;
}

}  // namespace

int main() {
  const char* env = std::getenv("MSLE_OUTPUT_DIR");
  out_dir = env && *env ? env : "acceptance_out";
  std::filesystem::create_directories(out_dir);

  criterion("1", [](std::ostream& d) {
    auto p = DrivingPath::from_function(1.0, 1e-3, [](double) { return 0.0; });
    double err = 0;
    for (double x : {-2.0, -0.5, 0.3, 1.0, 3.0}) {
      auto fl = evolve_point(p, {x, 0.0});
      for (std::size_t k = 0; k < fl.image.size(); ++k)
        err = std::max(err, std::abs(fl.image[k].real() - std::copysign(std::sqrt(x * x + 4 * p.times[k]), x)));
    }
    double tip = std::abs(trace_curve(p).vertices.back() - cplx(0, 2));
    d << "max|g_t(x)-sqrt(x^2+4t)|=" << f(err) << " (<=1e-8), |tip-2i|=" << f(tip) << " (<=1e-2)";
    return err <= 1e-8 && tip <= 1e-2;
  });

  criterion("2", [](std::ostream& d) {
    bool ok = true;
    auto one = cli_json({"verify-partition", "--N", "1"});
    double e1 = value(one, "identity_rel_err");
    ok &= e1 <= 1e-10;
    d << "N=1 rel_err=" << f(e1) << " (<=1e-10)";
    for (std::string N : {"2", "3"})
      for (std::string k : {k83, std::string("3")}) {
        auto r = cli_json({"verify-partition", "--N", N, "--kappa", k, "--method", "monte-carlo", "--samples",
                           "1000000", "--seed", "1"});
        auto& m = metric(r, "identity_rel_err");
        ok &= m["pass"].get<bool>();
        d << "; N=" << N << " kappa=" << f(std::stod(k)) << " rel_err=" << f(m["value"].get<double>())
          << " (<=3se=" << f(m["tolerance"]["max"].get<double>()) << ")";
      }
    return ok;
  });

  criterion("3", [](std::ostream& d) {
    bool ok = true;
    for (std::string N : {"1", "2", "3"}) {
      auto r = cli_json({"verify-pde", "--N", N});
      ok &= r["pass"].get<bool>();
      double res = 0, lo = INFINITY, hi = -INFINITY;
      for (auto& m : r["metrics"]) {
        std::string n = m["name"];
        double v = m["value"].get<double>();
        if (n.rfind("residual", 0) == 0) res = std::max(res, v);
        else lo = std::min(lo, v), hi = std::max(hi, v);
      }
      d << (N == "1" ? "" : "; ") << "N=" << N << " max residual=" << f(res);
      if (N != "1") d << " ratios in [" << f(lo) << "," << f(hi) << "]";
    }
    d << " (N=1 <=1e-7; else <=1e-4, ratio in [3.5,4.5])";
    return ok;
  });

  criterion("4", [](std::ostream& d) {
    auto r = cli_json({"verify-martingale", "--N", "2", "--paths", "10000", "--seed", "1"});
    d << "max_z=" << f(value(r, "max_z")) << " (<=3), max rel dev=" << f(value(r, "max_rel_dev"));
    return r["pass"].get<bool>();
  });

  // interlacing fractions are collected here and checked in criterion 10
  std::vector<std::pair<std::string, double>> interlace;

  criterion("5", [&](std::ostream& d) {
    auto r = cli_json({"verify-hitting", "--N", "2", "--kappa", k83, "--replicates", "2000", "--seed", "1"});
    bool ok = true;
    for (auto& m : r["metrics"]) {
      std::string n = m["name"];
      if (n.rfind("ks_", 0) != 0) continue;
      ok &= m["pass"].get<bool>();
      d << n << "=" << f(m["value"].get<double>()) << " ";
    }
    d << "(<=0.05)";
    interlace.emplace_back("hitting N=2", value(r, "interlaced_fraction"));
    return ok;
  });

  criterion("6", [](std::ostream& d) {
    auto r = cli_json({"verify-jacobi-link", "--N", "2", "--kappa", k83, "--replicates", "2000", "--seed", "1"});
    for (auto& g : r["results"]["groups"]) {
      if (g["group"] != "w-type") continue;
      double m = g["mean"], se = g["mean_se"], ks = g["ks_stated"][0];
      double z = std::abs(m - 0.625) / se;
      d << "even-index mean=" << f(m) << " z vs 0.625=" << f(z) << " (<=3), KS vs Jacobi(1,3,3/2,1/2)=" << f(ks)
        << " (<=0.05)";
      return z <= 3 && ks <= 0.05;
    }
    throw std::runtime_error("no w-type group");
  });

  // not a criterion: the same run scored against the parameters the SDE drift implies
  criterion("6*", [](std::ostream& d) {
    auto r = cli_json({"verify-jacobi-link", "--N", "2", "--kappa", k83, "--replicates", "2000", "--seed", "1",
                       "--params", "derived"});
    for (auto& g : r["results"]["groups"]) {
      auto& p = g["derived"];
      d << g["group"].get<std::string>() << " Jacobi(" << p["n"] << "," << f(p["beta"]) << "," << f(p["a"]) << ","
        << f(p["b"]) << ") KS=" << f(g["ks_derived"][0]) << " ";
    }
    d << "(supplementary)";
    return r["pass"].get<bool>();
  });

  criterion("7", [](std::ostream& d) {
    double worst = 0;
    for (int n : {1, 2, 3})
      for (double beta : {2.0, 8.0 / 3.0, 3.0})
        for (auto [a, b] : {std::pair{0.5, 1.5}, {1.5, 0.5}}) {
          JacobiParams p{n, beta, a, b};
          auto t = sample_tridiag(p, 10000, 100 + n);
          auto m = sample_mcmc(p, 10000, 200 + n);
          worst = std::max(worst, max_marginal_ks(t, m.draws));
        }
    // exact law of the free 3x3 box
    std::vector<double> exact(512);
    for (int s = 0; s < 512; ++s) {
      auto sp = [&](int x, int y) { return (s >> (y * 3 + x) & 1) ? 1.0 : -1.0; };
      double E = 0;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
          if (x < 2) E += sp(x, y) * sp(x + 1, y);
          if (y < 2) E += sp(x, y) * sp(x, y + 1);
        }
      exact[s] = std::exp(beta_c * E);
    }
    double Z = pairwise_sum(exact);
    for (auto& v : exact) v /= Z;
    auto g = IsingGrid::free_box(3, 3);
    IsingSampler smp(g);
    Rng rng = make_rng(5);
    auto c = initial_config(g);
    std::vector<double> h(512);
    const int sweeps = 1000000;
    for (int k = 0; k < sweeps; ++k) {
      smp.sweep(c, rng, IsingAlgorithm::metropolis);
      int id = 0;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
          if (c.spin[g.index(x + 1, y + 1)] > 0) id |= 1 << (y * 3 + x);
      h[id] += 1.0 / sweeps;
    }
    double tv = tv_distance(h, exact);
    d << "worst tridiag/MCMC KS over 18 parameter sets=" << f(worst) << " (<=0.03), Metropolis 3x3 TV=" << f(tv)
      << " (<=0.02)";
    return worst <= 0.03 && tv <= 0.02;
  });

  criterion("8", [](std::ostream& d) {
    std::vector<double> p;
    for (std::string delta : {"0.0625", "0.03125", "0.015625"}) {
      auto r = cli_json({"estimate-ising", "--N", "1", "--delta", delta, "--replicates", "2000", "--seed", "1"});
      p.push_back(r["results"]["pA_hat"].get<double>());
    }
    bool up = p[0] < p[1] && p[1] < p[2] && p[2] >= 0.9;
    d << "N=1 pA at 1/16,1/32,1/64 = " << f(p[0]) << "," << f(p[1]) << "," << f(p[2]) << " (increasing, last>=0.9)";
    auto r = cli_json({"estimate-ising", "--N", "2", "--delta", "0.0078125", "--marks", "0.25,0;0.75,0;1,0.5;0,0.5",
                       "--replicates", "10000", "--seed", "1"});
    double pa = r["results"]["pA_hat"], F = r["results"]["F_N"];
    d << "; N=2 pA at 1/128=" << f(pa) << " vs F_2=" << f(F) << " (|diff|<=0.05)";
    return up && std::abs(pa - F) <= 0.05;
  });

  criterion("9", [](std::ostream& d) {
    auto r = cli_json({"verify-cascade", "--N", "2", "--kappa", "3", "--which", "ell", "--replicates", "2000",
                       "--seed", "1"});
    d << "TV=" << f(value(r, "tv")) << " (<=0.08), nonpositive weights=" << value(r, "nonpositive_weights");
    return r["pass"].get<bool>();
  });

  criterion("10", [&](std::ostream& d) {
    auto add = [&](const std::string& label, std::vector<std::string> args) {
      auto r = cli_json(args);
      interlace.emplace_back(label, value(r, "interlaced_fraction"));
    };
    add("N=1", {"sample-multisle", "--N", "1", "--replicates", "500", "--trace", "0", "--seed", "2"});
    add("N=3", {"sample-multisle", "--N", "3", "--replicates", "1000", "--trace", "0", "--seed", "3"});
    add("N=3 same-point", {"sample-multisle", "--N", "3", "--mode", "collapsed", "--replicates", "500", "--trace", "0",
                           "--seed", "4"});
    bool ok = true;
    for (auto& [label, frac] : interlace) {
      ok &= frac >= 1.0;
      d << label << "=" << f(frac) << " ";
    }
    d << "(all 1)";
    return ok;
  });

  std::printf("%d criterion line(s) failed\n", failures);
  return failures ? 1 : 0;
}
