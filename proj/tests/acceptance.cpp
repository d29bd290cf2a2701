// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <dwlab/cli.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

using namespace dwlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void info(const std::string& s) { std::printf("      %s\n", s.c_str()); }

double rel_l2(const Field& a, const Field& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    num += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    den += b.values[i] * b.values[i];
  }
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------

Outcome kernel_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid g(1, 1 << 15, 600.0);
  const auto r = kernel_identity_sweep(g, 100.0, 0.01);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double gap = kernel_branch_gap(100.0);
  info(fmt("%zu evaluations, worst at t=%g |xi|^2=%g, branch gap %.2e", r.evaluations, r.worst_t, r.worst_xi_sq, gap));
  return {r.max_residual < 1e-9 && secs < 30.0, fmt("max residual %.3e (< 1e-9), %.1f s (< 30 s)", r.max_residual, secs)};
}

Outcome linear_decay() {
  bool ok = true;
  std::string detail;
  struct Case {
    int dim, points;
    double L, lo, hi, tol;
  };
  for (const Case c : {Case{1, 1 << 14, 1200.0, 50.0, 400.0, 0.05}, Case{2, 512, 160.0, 20.0, 120.0, 0.07}}) {
    const auto g = make_grid(c.dim, c.points, c.L);
    const auto phi = to_spectral(make_initial({IcKind::gaussian, 1.0, 1.0}, g).u);
    const auto ts = log_times(c.lo, c.hi, 40);
    const double rk = -0.25 * c.dim, rkt = rk - 1.0;
    const auto fk = fit_decay(kernel_norm_series(phi, ts, false), c.lo, c.hi, rk);
    const auto fkt = fit_decay(kernel_norm_series(phi, ts, true), c.lo, c.hi, rkt);
    const bool pass = std::abs(fk.deviation) <= c.tol && std::abs(fkt.deviation) <= c.tol;
    ok = ok && pass;
    detail += fmt("n=%d: K %+.4f (%+.2f), dtK %+.4f (%+.2f) ±%.2f over [%g, %g]%s", c.dim, fk.slope, rk, fkt.slope, rkt,
                  c.tol, c.lo, c.hi, c.dim == 1 ? "; " : "");
  }
  return {ok, detail};
}

Outcome nonlinear_decay() {
  bool ok = true;
  std::string detail;
  struct Case {
    int dim, points;
    double L, T, s;
    bool check_hs;
  };
  for (const Case c : {Case{1, 4096, 512.0, 400.0, 1.0, true}, Case{2, 512, 128.0, 120.0, 1.25, false}}) {
    const auto params = derive_params(c.dim, 2.0, {.s = c.s});
    SolveConfig cfg;
    cfg.T = c.T;
    cfg.dt = 0.1;
    const auto ex = decay_experiment(params, {IcKind::gaussian, 0.01, 1.0}, make_grid(c.dim, c.points, c.L), cfg);
    const bool l2_ok = std::abs(ex.l_alpha.deviation) <= 0.1 + 0.05 * (c.dim == 2);
    const bool hs_ok = !c.check_hs || std::abs(ex.hs.deviation) <= 0.15;
    ok = ok && l2_ok && hs_ok;
    detail += fmt("n=%d: L2 %+.4f (%+.2f)", c.dim, ex.l_alpha.slope, ex.l_alpha.theoretical);
    if (c.check_hs) detail += fmt(", H%g %+.4f (%+.2f); ", c.s, ex.hs.slope, ex.hs.theoretical);
    info(fmt("n=%d log-time window [%.3f, %g]: L2 %+.4f, H^s %+.4f (theory %+.2f, %+.2f)", c.dim, ex.l_alpha.t_lo, c.T,
             ex.l_alpha.slope, ex.hs.slope, ex.l_alpha.theoretical, ex.hs.theoretical));
    const auto lin = column(ex.trajectory.records, &NormRecord::l_alpha);
    const auto hs = column(ex.trajectory.records, &NormRecord::hs_dot_v);
    const auto a = fit_decay(lin, c.T / 4, c.T, ex.l_alpha.theoretical);
    const auto b = fit_decay(hs, c.T / 4, c.T, ex.hs.theoretical);
    info(fmt("n=%d window [T/4, T]:           L2 %+.4f, H^s %+.4f", c.dim, a.slope, b.slope));
  }
  return {ok, detail + " over the last three quarters of log(1+t)"};
}

double certified_eps = 0.0;

Outcome picard_contraction() {
  const auto g = make_grid(1, 512, 32.0);
  const auto params = derive_params(1, 2.0);
  PicardConfig cfg;
  cfg.T = 20.0;
  cfg.nodes = 512;
  const InitialCondition ic{IcKind::gaussian, 0.01, 1.0};
  const auto cert = certify_epsilon(g, ic, params, cfg, 0.01, 0.1);
  certified_eps = cert.eps;
  const auto& r = cert.report;
  double worst = 0.0;
  for (double x : r.ratios) worst = std::max(worst, x);
  info(fmt("%zu bisection trials; at eps=%.5g: %d iterates, quadrature error %.2e", cert.trials.size(), cert.eps,
           r.iterates, r.quadrature_error));

  InitialCondition at = ic;
  at.amplitude = cert.eps;
  const auto s0 = make_initial(at, g);
  const auto res = picard_solve(s0, params, cfg);
  const double h = cfg.T / (cfg.nodes - 1);
  double first_gap = 0.0;
  for (int k = 0; k < cfg.nodes; k += 17) {
    const auto lin = propagate_linear(s0, k * h);
    const auto v1 = to_physical(res.first_iterate_v[k]);
    double d = 0.0;
    for (std::size_t i = 0; i < v1.values.size(); ++i) d = std::max(d, std::abs(v1.values[i] - lin.v.values[i]));
    first_gap = std::max(first_gap, d / s0.v.max_abs());
  }
  const bool ok = cert.eps > 0.0 && picard_certifies(r, 12) && worst <= 0.55 && first_gap < 1e-11;
  return {ok, fmt("certified eps %.5g, %d iterates (<= 12), max ratio %.4f (<= 0.55), first iterate gap %.2e", cert.eps,
                  r.iterates, worst, first_gap)};
}

Outcome cross_method() {
  if (!(certified_eps > 0.0)) return {false, "no certified eps available"};
  const double eps = 0.5 * certified_eps;
  const auto g = make_grid(1, 512, 32.0);
  const auto params = derive_params(1, 2.0);
  const auto s0 = make_initial({IcKind::gaussian, eps, 1.0}, g);
  PicardConfig pc;
  pc.T = 10.0;
  pc.nodes = 512;
  const auto pr = picard_solve(s0, params, pc);
  SolveConfig sc;
  sc.T = 10.0;
  sc.dt = pc.T / (pc.nodes - 1);
  sc.snapshot_times = {10.0};
  const auto traj = solve(s0, params, sc);
  const auto v_picard = to_physical(pr.v_hat.back());
  const double gap = rel_l2(v_picard, traj.snapshots.back().state.v);
  return {pr.report.converged && gap < 1e-4, fmt("eps %.5g, relative L2 gap of u_t at T=10: %.3e (< 1e-4)", eps, gap)};
}

Outcome single_mode() {
  double worst = 0.0;
  struct Case {
    double L;
    int k;
  };
  // |xi| = k pi / L: 1/4 (sinh branch), 1/2 (critical), 3/2 and 4 (oscillatory)
  for (const Case c : {Case{4.0 * std::numbers::pi, 1}, Case{2.0 * std::numbers::pi, 1}, Case{2.0 * std::numbers::pi, 3},
                       Case{std::numbers::pi, 4}}) {
    const auto g = make_grid(1, 64, c.L);
    const double xi = c.k * std::numbers::pi / c.L;
    const double z = 0.25 - xi * xi;
    const auto s0 = make_initial({IcKind::single_mode, 1.0, 1.0, {xi, 0.0}}, g);
    for (double t : {0.5, 1.0, 5.0, 20.0}) {
      // y'' + y' + xi^2 y = 0, y(0) = 1, y'(0) = 0
      double y, dy;
      const double e = std::exp(-0.5 * t);
      if (z > 0) {
        const double m = std::sqrt(z);
        y = e * (std::cosh(m * t) + std::sinh(m * t) / (2 * m));
        dy = e * (z - 0.25) * std::sinh(m * t) / m;
      } else if (z == 0) {
        y = e * (1.0 + 0.5 * t);
        dy = -0.25 * t * e;
      } else {
        const double w = std::sqrt(-z);
        y = e * (std::cos(w * t) + std::sin(w * t) / (2 * w));
        dy = -e * xi * xi * std::sin(w * t) / w;
      }
      const auto s = propagate_linear(s0, t);
      double du = 0.0, dv = 0.0;
      for (int i = 0; i < 64; ++i) {
        const double c0 = std::cos(xi * g->coordinate(i));
        du = std::max(du, std::abs(s.u.values[i] - y * c0));
        dv = std::max(dv, std::abs(s.v.values[i] - dy * c0));
      }
      worst = std::max({worst, du / std::abs(y), dv / std::abs(dy)});
    }
  }
  return {worst < 1e-11, fmt("max relative error %.3e (< 1e-11) over 4 modes x 4 times", worst)};
}

Outcome admissibility_sweep() {
  int passed = 0, total = 0;
  for (int n : {1, 2}) {
    for (int i = 1; i <= 60; ++i) {
      const double p = 1.0 + 0.05 * i;
      ++total;
      try {
        if (validate(derive_params(n, p)).ok()) ++passed;
      } catch (const AdmissibilityError& e) {
        info(fmt("n=%d p=%.2f rejected: %s", n, p, e.what()));
      }
    }
  }
  int rejected = 0;
  for (auto [n, p] : {std::pair{2, 0.9}, std::pair{3, 1.2}}) {
    try {
      derive_params(n, p);
    } catch (const AdmissibilityError&) {
      ++rejected;
    }
  }
  return {passed == total && rejected == 2, fmt("%d/%d lattice points valid, %d/2 out-of-scope records rejected", passed, total, rejected)};
}

Outcome inequality_ensembles() {
  bool ok = true;
  std::string detail;
  EnsembleSpec spec;
  for (auto kind : {InequalityKind::gagliardo_nirenberg, InequalityKind::fractional_powers,
                    InequalityKind::sobolev_embedding, InequalityKind::chain_rule}) {
    InequalityParams ip;
    if (kind == InequalityKind::chain_rule) {
      ip.s = 0.75;
      ip.power = 2.0;
    }
    const auto r = verify_inequality(kind, spec, ip);
    const bool pass = std::isfinite(r.max_ratio) && r.max_ratio > 0.0 && r.resolution_stable;
    ok = ok && pass;
    detail += fmt("%s %.4g (x%.3f) ", r.case_id.c_str(), r.max_ratio, r.resolution_change);
  }
  InequalityParams deg;
  deg.theta = 0.0;
  deg.p = deg.p0 = 3.0;
  std::mt19937_64 rng(spec.seed);
  const auto g = make_grid(1, spec.points, spec.half_length);
  double dev = 0.0;
  for (int m = 0; m < spec.members; ++m) {
    dev = std::max(dev, std::abs(inequality_ratio(InequalityKind::gagliardo_nirenberg, deg, realize(draw_spectrum(spec, rng), g)) - 1.0));
  }
  ok = ok && dev <= 1e-10;
  return {ok, detail + fmt("; GN theta=0 |ratio-1| %.1e", dev)};
}

Outcome integrator_order() {
  const auto g = make_grid(1, 1024, 40.0);
  const auto s0 = make_initial({IcKind::gaussian, 0.5, 1.0}, g);
  auto run = [&](double dt) {
    State s = s0;
    const int steps = static_cast<int>(std::lround(5.0 / dt));
    for (int i = 0; i < steps; ++i) s = step(s, dt, 2.0);
    return s;
  };
  const auto ref = run(0.1 / 64);
  std::vector<double> err;
  for (double dt : {0.1, 0.05, 0.025}) err.push_back(rel_l2(run(dt).v, ref.v));
  const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
  return {o1 >= 1.9 && o2 >= 1.9, fmt("orders %.3f, %.3f (>= 1.9); errors %.2e %.2e %.2e", o1, o2, err[0], err[1], err[2])};
}

Outcome reproducibility() {
  const auto base = fs::temp_directory_path() / "dwlab_acceptance_repro";
  fs::remove_all(base);
  auto run_to = [&](const std::string& sub) {
    const std::string out = (base / sub).string();
    return cli::run_cli(std::vector<std::string>{"dwlab", "solve", "--set", "points=1024", "--set", "L=64", "--set",
                                                 "T=40", "--set", "dt=0.05", "--set", "s=1", "--seed", "7", "--out", out},
                        std::cout, std::cerr);
  };
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int a = run_to("a"), b = run_to("b");
  std::cout.rdbuf(old);
  if (a != 0 || b != 0) return {false, fmt("runs exited %d and %d", a, b)};
  const auto ra = load_run(base / "a"), rb = load_run(base / "b");
  const bool same = read_text(base / "a" / "norms.csv") == read_text(base / "b" / "norms.csv");
  const auto bytes = read_text(base / "a" / "norms.csv").size();
  fs::remove_all(base);
  return {same && ra.meta["config_hash"] == rb.meta["config_hash"],
          fmt("norms.csv %s (%zu bytes, config %s)", same ? "byte-identical" : "DIFFERS", bytes,
              ra.meta["config_hash"].get<std::string>().c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"kernel identity", kernel_identity},
      {"linear decay rates", linear_decay},
      {"nonlinear decay rates", nonlinear_decay},
      {"Picard contraction", picard_contraction},
      {"Picard vs time stepping", cross_method},
      {"single-mode closed form", single_mode},
      {"admissibility sweep", admissibility_sweep},
      {"inequality ensembles", inequality_ensembles},
      {"integrator order", integrator_order},
      {"reproducibility", reproducibility}};
  int failures = 0;
  int id = 0;
  for (const auto& [name, fn] : criteria) {
    ++id;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %-24s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
