#pragma once

#include <algorithm>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "io.hpp"
#include "ising.hpp"
#include "jacobi.hpp"
#include "loewner.hpp"
#include "multisle.hpp"
#include "partition.hpp"
#include "sde.hpp"

namespace msle::cli {

// exit codes
constexpr int ok = 0, tolerance_failure = 1, usage_error = 2, runtime_failure = 3;

namespace detail {

// Marked points for N curves when none are given: the configurations used
// throughout the test suite.
inline std::pair<std::vector<double>, double> default_marks(int N) {
  switch (N) {
    case 1: return {{0.0}, 1.0};
    case 2: return {{0.0, 0.5}, 1.0};
    case 3: return {{-1.0, 0.0, 0.5}, 1.2};
    default: {
      std::vector<double> x(N);
      for (int i = 0; i < N; ++i) x[i] = double(i) / N;
      return {x, 1.0};
    }
  }
}

struct Marks {
  int N = 2;
  double kappa = 8.0 / 3.0;
  std::vector<double> xs;
  double x_next = NAN;

  void add(CLI::App* c, double default_kappa = 8.0 / 3.0, int default_N = 2) {
    kappa = default_kappa;
    N = default_N;
    c->add_option("--N", N, "number of curves")->check(CLI::Range(1, 8))->capture_default_str();
    c->add_option("--kappa", kappa, "SLE parameter in (0,4)")->capture_default_str();
    c->add_option("--marks", xs, "x_1,...,x_N (comma separated)")->delimiter(',');
    c->add_option("--x-next", x_next, "x_{N+1}");
  }
  MarkedConfig config() {
    if (xs.empty()) {
      auto [d, n] = default_marks(N);
      xs = d;
      if (std::isnan(x_next)) x_next = n;
    }
    if (static_cast<int>(xs.size()) != N) throw std::invalid_argument("--marks needs exactly N values");
    if (std::isnan(x_next)) throw std::invalid_argument("--x-next is required with --marks");
    return MarkedConfig::spread(kappa, xs, x_next);
  }
  json to_json() const { return {{"N", N}, {"kappa", kappa}, {"marks", xs}, {"x_next", x_next}}; }
};

inline FlowLineOptions flow_options(CLI::App* c, FlowLineOptions& f) {
  c->add_option("--dt,--resolution", f.dt, "base step in units of scale^2")->capture_default_str();
  c->add_option("--rel-step", f.rel_step, "diffusion step relative to nearest distance")
      ->capture_default_str();
  return f;
}

inline json flow_json(const FlowLineOptions& f) { return {{"dt", f.dt}, {"rel_step", f.rel_step}}; }

template <class E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table) {
  for (auto& [k, v] : table)
    if (s == k) return v;
  throw std::invalid_argument("unknown value '" + s + "'");
}

// CLI11 reads INI leniently; reject anything that is not [section], key=value,
// a comment or blank, and any section that is not a subcommand.
inline void check_config_syntax(const std::string& path, const std::vector<std::string>& sections) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#' || line[b] == ';') continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string t = line.substr(b, e - b + 1);
    auto bad = [&] { throw std::invalid_argument(path + ":" + std::to_string(n) + ": malformed line '" + t + "'"); };
    if (t.front() == '[') {
      if (t.back() != ']') bad();
      std::string sec = t.substr(1, t.size() - 2);
      if (sec != "default" && std::find(sections.begin(), sections.end(), sec) == sections.end())
        throw std::invalid_argument(path + ":" + std::to_string(n) + ": unknown section [" + sec + "]");
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos) bad();
    std::string key = t.substr(0, t.find_last_not_of(" \t", eq - 1) + 1);
    if (eq == 0 || key.empty() || key.find_first_of(" \t[]") != std::string::npos) bad();
  }
}

}  // namespace detail

struct Context {
  std::string out_flag;
  std::filesystem::path out() const { return output_dir(out_flag); }
};

using Runner = std::function<StatReport(const Context&)>;

// Builds the command tree; the selected subcommand stores its runner in `selected`.
inline void build(CLI::App& app, Runner& selected, Context& ctx, std::vector<std::shared_ptr<void>>& keep) {
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "key=value file, one [section] per subcommand");
  app.add_option("--out", ctx.out_flag, "output directory (default $MSLE_OUTPUT_DIR or .)");

  auto hold = [&](auto p) {
    keep.push_back(p);
    return p.get();
  };
  auto seed_opt = [](CLI::App* c, std::uint64_t& s) {
    c->add_option("--seed", s, "master seed")->required();
  };

  // ---- sample-sle
  {
    struct O {
      double kappa = 8.0 / 3.0, T = 1, dt = 1e-3;
      std::size_t trace = 200;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("sample-sle", "chordal SLE_kappa driver and trace up to time T");
    c->add_option("--kappa", o->kappa)->capture_default_str();
    c->add_option("--T", o->T, "capacity time horizon")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--dt", o->dt)->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--trace", o->trace, "trace vertices (0: none)")->capture_default_str();
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context& ctx) {
        SleRunConfig rc;
        rc.kappa = o->kappa;
        rc.dt = o->dt;
        rc.max_time = o->T;
        auto run = sample_driver(rc, o->seed);
        StatReport r;
        r.subcommand = "sample-sle";
        r.seed = o->seed;
        r.config = {{"kappa", o->kappa}, {"T", o->T}, {"dt", o->dt}, {"trace", o->trace}};
        auto dir = ctx.out();
        CsvWriter d(dir / "driver.csv", {"t", "W"});
        const auto& p = run.driver;
        double qv = 0;
        for (std::size_t k = 0; k < p.times.size(); ++k) {
          d.row({p.times[k], p.values[k]});
          if (k) qv += (p.values[k] - p.values[k - 1]) * (p.values[k] - p.values[k - 1]);
        }
        if (o->trace > 0) {
          auto tr = trace_curve(p, o->trace);
          CsvWriter t(dir / "trace.csv", {"x", "y"});
          for (auto z : tr.vertices) t.row({z.real(), z.imag()});
        }
        r.results = {{"steps", p.steps()}, {"end_time", p.end_time()}, {"W_end", p.values.back()}};
        r.info("quadratic_variation_over_kappa_t", qv / (o->kappa * p.end_time()));
        return r;
      };
    });
  }

  // ---- sample-multisle
  {
    struct O {
      detail::Marks m;
      std::string mode = "spread";
      std::size_t replicates = 1, trace = 0;
      std::string parity = "odd";
      FlowLineOptions flow;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("sample-multisle", "curve systems by the cascade construction");
    o->m.add(c);
    c->add_option("--mode", o->mode, "collapsed: all N curves start at x_1")
        ->check(CLI::IsMember({"spread", "collapsed"}))
        ->capture_default_str();
    c->add_option("--replicates", o->replicates)->capture_default_str();
    c->add_option("--trace", o->trace, "polyline vertices per curve (0: endpoints only)")
        ->capture_default_str();
    c->add_option("--parity", o->parity, "construction of the outermost curve")
        ->check(CLI::IsMember({"odd", "even"}))
        ->capture_default_str();
    detail::flow_options(c, o->flow);
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context& ctx) {
        MarkedConfig cfg;
        if (o->mode == "collapsed") {
          double x = o->m.xs.empty() ? 0.0 : o->m.xs.at(0);
          double xn = std::isnan(o->m.x_next) ? 1.0 : o->m.x_next;
          cfg = MarkedConfig::same_point(o->m.kappa, o->m.N, x, xn);
        } else {
          cfg = o->m.config();
        }
        SystemOptions so;
        so.start = o->parity == "odd" ? Parity::odd : Parity::even;
        so.flow = o->flow;
        so.flow.trace_vertices = o->trace;
        auto ens = sample_ensemble(cfg, o->replicates, o->seed, so);
        StatReport r;
        r.subcommand = "sample-multisle";
        r.seed = o->seed;
        r.config = o->m.to_json();
        r.config["mode"] = o->mode;
        r.config["replicates"] = o->replicates;
        r.config["parity"] = o->parity;
        r.config["flow"] = detail::flow_json(o->flow);
        auto dir = ctx.out();
        CsvWriter e(dir / "endpoints.csv", {"replicate", "curve_index", "endpoint"});
        std::unique_ptr<CsvWriter> poly;
        if (o->trace > 0)
          poly = std::make_unique<CsvWriter>(dir / "polylines.csv",
                                             std::vector<std::string>{"replicate", "curve_index", "vertex", "x", "y"});
        std::size_t inter = 0;
        for (std::size_t k = 0; k < ens.systems.size(); ++k) {
          const auto& s = ens.systems[k];
          inter += s.interlaced(cfg.x_next);
          for (int j = 0; j < s.N; ++j) e.row({double(k), double(j + 1), s.endpoints[j]});
          if (poly)
            for (int j = 0; j < s.N; ++j)
              for (std::size_t v = 0; v < s.curves[j].vertices.size(); ++v)
                poly->row({double(k), double(j + 1), double(v), s.curves[j].vertices[v].real(),
                           s.curves[j].vertices[v].imag()});
        }
        r.results = {{"replicates", ens.systems.size()}, {"discarded", ens.discarded}};
        double n = std::max<std::size_t>(ens.systems.size(), 1);
        r.at_least("interlaced_fraction", "endpoint interlacing", inter / n, 1.0);
        return r;
      };
    });
  }

  // ---- sample-jacobi
  {
    struct O {
      JacobiParams p;
      std::size_t draws = 1000;
      std::string method = "tridiag";
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("sample-jacobi", "beta-Jacobi ensemble draws");
    c->add_option("--n", o->p.n)->capture_default_str();
    c->add_option("--beta", o->p.beta)->capture_default_str();
    c->add_option("--a", o->p.a)->capture_default_str();
    c->add_option("--b", o->p.b)->capture_default_str();
    c->add_option("--draws", o->draws)->capture_default_str();
    c->add_option("--method", o->method)->check(CLI::IsMember({"tridiag", "mcmc"}))->capture_default_str();
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context& ctx) {
        StatReport r;
        r.subcommand = "sample-jacobi";
        r.seed = o->seed;
        r.config = {{"n", o->p.n}, {"beta", o->p.beta}, {"a", o->p.a}, {"b", o->p.b},
                    {"draws", o->draws}, {"method", o->method}};
        std::vector<Spectrum> d;
        if (o->method == "tridiag") {
          d = sample_tridiag(o->p, o->draws, o->seed);
        } else {
          auto rep = sample_mcmc(o->p, o->draws, o->seed);
          d = rep.draws;
          r.results = {{"tau", rep.tau}, {"thin", rep.thin}, {"burn_in", rep.burn_in}};
          r.at_most("gelman_rubin", "mcmc convergence", rep.gelman_rubin, 1.1);
        }
        std::vector<std::string> head{"draw"};
        for (int i = 1; i <= o->p.n; ++i) head.push_back("y" + std::to_string(i));
        CsvWriter w(ctx.out() / "jacobi.csv", head);
        std::vector<double> first;
        for (std::size_t k = 0; k < d.size(); ++k) {
          std::vector<double> row{double(k)};
          row.insert(row.end(), d[k].begin(), d[k].end());
          w.row(row);
          first.push_back(d[k][0]);
        }
        r.info("mean_y1", mean(first));
        return r;
      };
    });
  }

  // ---- estimate-ising
  {
    struct O {
      int N = 1;
      double delta = 1.0 / 32, width = 1, height = 1;
      std::string marks = "0.5,0;1,0.5;0,0.5";
      std::size_t sweeps = 0, thin = 0, replicates = 1000;
      std::string algorithm = "swendsen-wang", interfaces;
      int free_sign = 0;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("estimate-ising", "crossing event probability in a rectangle");
    c->add_option("--N", o->N)->check(CLI::Range(1, 8))->capture_default_str();
    c->add_option("--delta", o->delta, "mesh")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--width", o->width)->capture_default_str();
    c->add_option("--height", o->height)->capture_default_str();
    c->add_option("--marks", o->marks, "x_1..x_{N+2} as 'x,y;x,y;...', counterclockwise")
        ->capture_default_str();
    c->add_option("--sweeps", o->sweeps, "burn-in sweeps (0: from the pilot run)")->capture_default_str();
    c->add_option("--thin", o->thin, "sweeps between replicates (0: from the pilot run)")
        ->capture_default_str();
    c->add_option("--replicates", o->replicates)->capture_default_str();
    c->add_option("--algorithm", o->algorithm)
        ->check(CLI::IsMember({"metropolis", "wolff", "swendsen-wang"}))
        ->capture_default_str();
    c->add_option("--free-sign", o->free_sign, "freeze the free arc to this sign (0: free)")
        ->check(CLI::IsMember({-1, 0, 1}));
    c->add_option("--interfaces", o->interfaces, "write interfaces of one sample to this CSV file");
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context& ctx) {
        auto pts = parse_points(o->marks);
        auto P = build_polygon(o->width, o->height, o->N, pts, o->delta, o->free_sign);
        PAOptions po;
        po.algorithm = detail::parse_enum<IsingAlgorithm>(
            o->algorithm, {{"metropolis", IsingAlgorithm::metropolis},
                           {"wolff", IsingAlgorithm::wolff},
                           {"swendsen-wang", IsingAlgorithm::swendsen_wang}});
        po.burn_in = o->sweeps;
        po.thin = o->thin;
        po.compute_limit = o->free_sign == 0;
        auto rep = estimate_pA(P, o->replicates, o->seed, po);
        StatReport r;
        r.subcommand = "estimate-ising";
        r.seed = o->seed;
        json mk = json::array();
        for (auto z : pts) mk.push_back({z.real(), z.imag()});
        r.config = {{"N", o->N}, {"delta", o->delta}, {"width", o->width}, {"height", o->height},
                    {"marks", mk}, {"replicates", o->replicates}, {"algorithm", o->algorithm},
                    {"free_sign", o->free_sign}};
        r.results = {{"pA_hat", rep.p_hat},          {"sigma", rep.sigma},
                     {"ci", {rep.ci_lo, rep.ci_hi}}, {"marked_images", rep.marked_images},
                     {"burn_in", rep.burn_in},       {"thin", rep.thin},
                     {"tau_pilot", rep.tau_pilot},   {"tau_thinned", rep.tau_thinned}};
        r.info("pA_hat", rep.p_hat).ci = std::pair{rep.ci_lo, rep.ci_hi};
        if (rep.limit) {
          r.results["F_N"] = rep.limit->value;
          r.info("F_N", rep.limit->value);
        }
        if (!o->interfaces.empty()) {
          auto cfg = sample_spins(P.grid, std::max<std::size_t>(rep.burn_in, 200), po.algorithm, o->seed);
          auto ev = detect_event_A(P, cfg);
          CsvWriter w(ctx.out() / o->interfaces, {"curve", "vertex", "x", "y", "ends_free"});
          for (auto& path : ev.interfaces)
            for (std::size_t v = 0; v < path.vertices.size(); ++v)
              w.row({double(path.j), double(v), P.delta * path.vertices[v][0], P.delta * path.vertices[v][1],
                     path.end == Termination::free_arc ? 1.0 : 0.0});
        }
        return r;
      };
    });
  }

  // ---- verify-partition
  {
    struct O {
      detail::Marks m;
      std::string method = "auto";
      std::size_t samples = 1'000'000;
      std::uint64_t seed = 1;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("verify-partition", "relation between the two normalizations");
    o->m.add(c, 8.0 / 3.0, 1);
    c->add_option("--method", o->method)
        ->check(CLI::IsMember({"auto", "closed-form", "quadrature", "monte-carlo"}))
        ->capture_default_str();
    c->add_option("--samples", o->samples, "Monte Carlo samples")->capture_default_str();
    c->add_option("--seed", o->seed, "seed for Monte Carlo")->capture_default_str();
    c->callback([&selected, o] {
      selected = [o](const Context&) {
        auto cfg = o->m.config();
        Method meth = o->method == "auto"
                          ? (cfg.N() == 1 ? Method::closed_form : Method::quadrature)
                          : detail::parse_enum<Method>(o->method, {{"closed-form", Method::closed_form},
                                                                   {"quadrature", Method::quadrature},
                                                                   {"monte-carlo", Method::monte_carlo}});
        Budget b;
        b.samples = o->samples;
        b.seed = o->seed;
        auto chk = check_partition_identity(cfg, meth, b);
        StatReport r;
        r.subcommand = "verify-partition";
        if (meth == Method::monte_carlo) r.seed = o->seed;
        r.config = o->m.to_json();
        r.config["method"] = to_string(meth);
        r.results = {{"lhs", chk.lhs}, {"rhs", chk.rhs}, {"rel_sigma", chk.rel_sigma},
                     {"log_Z", chk.Z.log_value}, {"log_W", chk.W.log_value}};
        double tol = meth == Method::closed_form ? 1e-10
                     : meth == Method::quadrature ? 1e-8
                                                  : 3 * chk.rel_sigma;
        r.at_most("identity_rel_err", "partition identity", chk.rel_err, tol);
        return r;
      };
    });
  }

  // ---- verify-pde
  {
    struct O {
      detail::Marks m;
      double h = 0;  // 0: 1e-4 for N = 1, else 1e-3
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("verify-pde", "second-order PDE for R_N at kappa = 3");
    o->m.add(c, 3.0, 2);
    c->add_option("--step", o->h, "finite-difference step (default 1e-4 for N=1, else 1e-3)");
    c->callback([&selected, o] {
      selected = [o](const Context&) {
        if (o->m.xs.empty() && o->m.N == 2) {
          o->m.xs = {-0.8, 0.35};
          o->m.x_next = 1.6;
        }
        auto cfg = o->m.config();
        if (o->h <= 0) o->h = cfg.N() == 1 ? 1e-4 : 1e-3;
        StatReport r;
        r.subcommand = "verify-pde";
        r.config = o->m.to_json();
        r.config["h"] = o->h;
        for (int i = 1; i <= cfg.N(); ++i) {
          std::string tag = "_" + std::to_string(i);
          double res = bpz_residual(cfg.xs, cfg.x_next, i, o->h);
          if (cfg.N() == 1) {
            r.at_most("residual" + tag, "second-order PDE", std::abs(res), 1e-7);
            continue;
          }
          r.at_most("residual" + tag, "second-order PDE", std::abs(res), 1e-4);
          double r1 = bpz_residual(cfg.xs, cfg.x_next, i, 10 * o->h);
          double r2 = bpz_residual(cfg.xs, cfg.x_next, i, 5 * o->h);
          r.within("halving_ratio" + tag, "second-order PDE", r1 / r2, 3.5, 4.5);
        }
        return r;
      };
    });
  }

  // ---- verify-martingale
  {
    struct O {
      detail::Marks m;
      std::size_t paths = 10000;
      MartingaleOptions mo;
      bool no_stop = false;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("verify-martingale", "Ising partition-function ratio along the curve");
    o->m.add(c, 3.0, 2);
    c->add_option("--paths", o->paths)->capture_default_str();
    c->add_option("--eps", o->mo.eps, "stop when g(x_next) - W <= eps * scale")->capture_default_str();
    c->add_option("--horizon", o->mo.horizon, "in units of scale^2")->capture_default_str();
    c->add_flag("--no-stop", o->no_stop, "run to the hitting time (negative control)");
    detail::flow_options(c, o->mo.flow);
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context& ctx) {
        o->m.kappa = 3.0;
        auto cfg = o->m.config();
        o->mo.stopping = !o->no_stop;
        auto rep = verify_martingale(cfg.xs, cfg.x_next, o->paths, o->seed, o->mo);
        StatReport r;
        r.subcommand = "verify-martingale";
        r.seed = o->seed;
        r.config = o->m.to_json();
        r.config["paths"] = o->paths;
        r.config["eps"] = o->mo.eps;
        r.config["horizon"] = o->mo.horizon;
        r.config["stopping"] = o->mo.stopping;
        r.config["flow"] = detail::flow_json(o->mo.flow);
        CsvWriter w(ctx.out() / "martingale.csv", {"t", "mean_ratio", "sigma"});
        for (std::size_t g = 0; g < rep.times.size(); ++g) w.row({rep.times[g], rep.mean[g], rep.sigma[g]});
        r.results = {{"stopped_eps", rep.stopped_eps}, {"stopped_K", rep.stopped_K}, {"hit", rep.hit}};
        r.info("max_rel_dev", rep.max_dev);
        r.at_most("max_z", "martingale property", rep.max_z, 3.0);
        return r;
      };
    });
  }

  // ---- verify-cascade
  {
    struct O {
      detail::Marks m;
      std::string which = "ell";
      std::size_t replicates = 2000, direct_factor = 5;
      double tol = 0.08;
      FlowLineOptions flow;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("verify-cascade", "weighted base curve vs direct outermost curve");
    o->m.add(c, 3.0, 2);
    c->add_option("--which", o->which)->check(CLI::IsMember({"ell", "eta"}))->capture_default_str();
    c->add_option("--replicates", o->replicates)->capture_default_str();
    c->add_option("--direct-factor", o->direct_factor, "direct samples per weighted replicate")
        ->capture_default_str();
    c->add_option("--tol", o->tol, "TV tolerance")->capture_default_str();
    detail::flow_options(c, o->flow);
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context&) {
        auto cfg = o->m.config();
        auto w = o->which == "ell" ? CascadeWeight::ell : CascadeWeight::eta;
        auto rep = verify_cascade_weight(cfg, w, o->replicates, o->seed, o->flow, o->direct_factor);
        StatReport r;
        r.subcommand = "verify-cascade";
        r.seed = o->seed;
        r.config = o->m.to_json();
        r.config["which"] = o->which;
        r.config["replicates"] = o->replicates;
        r.config["direct_factor"] = o->direct_factor;
        r.config["flow"] = detail::flow_json(o->flow);
        r.results = {{"weight_mean", rep.weight_mean}, {"weight_se", rep.weight_se},
                     {"weight_min", rep.weight_min},   {"ess", rep.ess},
                     {"direct", rep.direct}};
        std::string id = "cascade weight (" + o->which + ")";
        r.at_most("tv", id, rep.tv, o->tol);
        r.at_most("nonpositive_weights", id, double(rep.nonpositive), 0);
        return r;
      };
    });
  }

  // ---- verify-hitting
  {
    struct O {
      detail::Marks m;
      std::size_t replicates = 2000, ref_factor = 10;
      double tol = 0.05;
      FlowLineOptions flow;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("verify-hitting", "cascade endpoints vs hitting-point densities");
    o->m.add(c);
    c->add_option("--replicates", o->replicates)->capture_default_str();
    c->add_option("--ref-factor", o->ref_factor, "density draws per replicate")->capture_default_str();
    c->add_option("--tol", o->tol, "KS tolerance")->capture_default_str();
    detail::flow_options(c, o->flow);
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context&) {
        auto cfg = o->m.config();
        SystemOptions so;
        so.flow = o->flow;
        auto rep = verify_hitting_law(cfg, o->replicates, o->seed, so, o->ref_factor);
        StatReport r;
        r.subcommand = "verify-hitting";
        r.seed = o->seed;
        r.config = o->m.to_json();
        r.config["replicates"] = o->replicates;
        r.config["ref_factor"] = o->ref_factor;
        r.config["flow"] = detail::flow_json(o->flow);
        json marg = json::array();
        for (auto& mc : rep.marginals) {
          marg.push_back({{"name", mc.name}, {"ks", mc.ks}, {"mean_s", mc.mean_s},
                          {"mean_s_ref", mc.mean_s_ref}, {"mean_s_ci", {mc.mean_s_ci.lo, mc.mean_s_ci.hi}}});
          r.at_most("ks_" + mc.name, "hitting law", mc.ks, o->tol);
        }
        r.results = {{"marginals", marg}, {"replicates", rep.replicates}, {"discarded", rep.discarded}};
        double n = std::max<std::size_t>(rep.replicates, 1);
        r.at_least("interlaced_fraction", "endpoint interlacing", rep.interlaced / n, 1.0);
        return r;
      };
    });
  }

  // ---- verify-jacobi-link
  {
    struct O {
      int N = 2;
      double kappa = 8.0 / 3.0, tol = 0.05;
      std::size_t replicates = 2000, ref_factor = 10;
      std::string params = "stated";
      FlowLineOptions flow;
      std::uint64_t seed = 0;
    };
    auto* o = hold(std::make_shared<O>());
    auto* c = app.add_subcommand("verify-jacobi-link", "same-point endpoints vs Jacobi ensembles");
    c->add_option("--N", o->N)->check(CLI::Range(1, 8))->capture_default_str();
    c->add_option("--kappa", o->kappa)->capture_default_str();
    c->add_option("--replicates", o->replicates)->capture_default_str();
    c->add_option("--ref-factor", o->ref_factor)->capture_default_str();
    c->add_option("--tol", o->tol, "KS tolerance")->capture_default_str();
    c->add_option("--params", o->params, "Jacobi parameters the tolerances apply to")
        ->check(CLI::IsMember({"stated", "derived"}))
        ->capture_default_str();
    detail::flow_options(c, o->flow);
    seed_opt(c, o->seed);
    c->callback([&selected, o] {
      selected = [o](const Context&) {
        SystemOptions so;
        so.flow = o->flow;
        auto rep = verify_jacobi_link(o->N, o->kappa, o->replicates, o->seed, so, o->ref_factor);
        StatReport r;
        r.subcommand = "verify-jacobi-link";
        r.seed = o->seed;
        r.config = {{"N", o->N}, {"kappa", o->kappa}, {"replicates", o->replicates},
                    {"ref_factor", o->ref_factor}, {"params", o->params}, {"flow", detail::flow_json(o->flow)}};
        bool stated = o->params == "stated";
        json groups = json::array();
        for (auto& g : rep.groups) {
          auto pj = [](const JacobiParams& p) {
            return json{{"n", p.n}, {"beta", p.beta}, {"a", p.a}, {"b", p.b}};
          };
          groups.push_back({{"group", g.group}, {"stated", pj(g.stated)}, {"derived", pj(g.derived)},
                            {"ks_stated", g.ks_stated}, {"ks_derived", g.ks_derived},
                            {"mean", g.mean}, {"mean_se", g.mean_se},
                            {"mean_stated", g.mean_stated}, {"mean_derived", g.mean_derived}});
          const auto& ks = stated ? g.ks_stated : g.ks_derived;
          for (std::size_t k = 0; k < ks.size(); ++k)
            r.at_most("ks_" + g.group + "_" + std::to_string(k + 1), "same-point hitting law", ks[k], o->tol);
          double ref = stated ? g.mean_stated : g.mean_derived;
          double se = std::hypot(g.mean_se, stated ? g.se_stated : g.se_derived);
          r.at_most("mean_z_" + g.group, "same-point hitting law", std::abs(g.mean - ref) / se, 3.0);
          r.at_least("in_unit_interval_" + g.group, "same-point hitting law", g.in_unit_interval, 1.0);
        }
        r.results = {{"groups", groups}, {"replicates", rep.replicates}, {"discarded", rep.discarded}};
        return r;
      };
    });
  }
}

// Parses args (without the program name), runs the subcommand, writes
// <out>/<subcommand>.json and echoes it to `out`.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"multiple SLE and critical Ising experiments"};
  Runner selected;
  Context ctx;
  std::vector<std::shared_ptr<void>> keep;
  build(app, selected, ctx, keep);
  try {
    std::vector<std::string> names;
    for (auto* c : app.get_subcommands({})) names.push_back(c->get_name());
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) detail::check_config_syntax(args[i + 1], names);
      if (args[i].rfind("--config=", 0) == 0) detail::check_config_syntax(args[i].substr(9), names);
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return usage_error;
  }
  try {
    StatReport r = selected(ctx);
    auto j = r.to_json();
    write_json(ctx.out() / (r.subcommand + ".json"), j);
    out << dump17(j) << '\n';
    return r.pass() ? ok : tolerance_failure;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return usage_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return runtime_failure;
  }
}

}  // namespace msle::cli
