#pragma once

// dwlab command line: one subcommand per experiment, configured by a flat
// key = value file plus --set overrides.

#include <dwlab/io.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dwlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitUsage = 64;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"admissible",    "linear",       "solve",       "picard",
                                          "kernel-verify", "lemma-verify", "ineq-verify", "decay-fit"};
  return s;
}

inline std::string usage() {
  return "usage: dwlab <subcommand> [--config PATH] [--out DIR] [--seed N] [--set key=value ...]\n"
         "subcommands:\n"
         "  admissible     derive and validate the exponent record for (n, p)\n"
         "  linear         linear damped wave run, norms.csv + decay fits\n"
         "  solve          nonlinear run with |u_t|^p forcing\n"
         "  picard         Picard recurrence with contraction report\n"
         "  kernel-verify  kernel ODE identity and branch continuity\n"
         "  lemma-verify   linear decay estimate ratios over an ensemble\n"
         "  ineq-verify    fractional inequality ensembles\n"
         "  decay-fit      refit a finished run directory\n";
}

struct Context {
  std::string command;
  RunConfig cfg;
  std::optional<fs::path> out_dir;
  std::uint64_t seed = 0;
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------
// Config readers

inline GridPtr grid_from(const RunConfig& c, int def_points, double def_L) {
  const int dim = static_cast<int>(c.get_int("grid.dim", 1));
  return make_grid(dim, static_cast<int>(c.get_int("grid.points", def_points)), c.get_double("grid.half_length", def_L));
}

inline AdmissibleParams params_from(const RunConfig& c) {
  ParamOverrides o;
  if (c.has("model.s")) o.s = c.get_double("model.s", 0.0);
  if (c.has("model.kappa")) o.kappa = c.get_double("model.kappa", 0.0);
  if (c.has("model.inv_gamma")) o.inv_gamma = c.get_double("model.inv_gamma", 0.0);
  return derive_params(static_cast<int>(c.get_int("grid.dim", 1)), c.get_double("model.p", 2.0), o);
}

inline InitialCondition ic_from(const RunConfig& c) {
  InitialCondition ic;
  ic.kind = parse_ic_kind(c.get_string("ic.kind", "gaussian"));
  ic.amplitude = c.get_double("ic.amplitude", ic.amplitude);
  ic.width = c.get_double("ic.width", ic.width);
  ic.mode = {c.get_double("ic.k1", 1.0), c.get_double("ic.k2", 0.0)};
  return ic;
}

inline std::vector<double> number_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "' in list");
    }
  }
  return out;
}

inline SolveConfig solve_config_from(const RunConfig& c, bool nonlinear) {
  SolveConfig s;
  s.T = c.get_double("run.T", 100.0);
  s.dt = c.get_double("run.dt", 0.05);
  s.p = c.get_double("model.p", 2.0);
  s.dt_max = c.get_double("run.dt_max", kDefaultDtMax);
  s.nonlinear = nonlinear;
  s.check_box = c.get_bool("run.check_box", true);
  const std::string kind = c.get_string("run.schedule", "log");
  if (kind == "log") {
    s.schedule.kind = SampleSchedule::Kind::log;
  } else if (kind == "uniform") {
    s.schedule.kind = SampleSchedule::Kind::uniform;
  } else {
    throw ConfigError("run.schedule must be log or uniform, got '" + kind + "'");
  }
  s.schedule.per_decade = static_cast<int>(c.get_int("run.per_decade", 64));
  s.schedule.count = static_cast<int>(c.get_int("run.samples", 0));
  s.snapshot_times = number_list(c.get_string("run.snapshots", ""));
  return s;
}

inline std::pair<double, double> fit_window_from(const RunConfig& c, double t_end) {
  auto w = default_fit_window(t_end);
  w.first = c.get_double("fit.t_lo", w.first);
  w.second = c.get_double("fit.t_hi", w.second);
  return w;
}

// ---------------------------------------------------------------------------
// Output helpers

inline void print_fit(std::ostream& os, const std::string& label, const DecayFit& f) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-10s slope %+.6f  theory %+.6f  dev %.2e  R2 %.6f  [%g, %g] n=%d\n", label.c_str(),
                f.slope, f.theoretical, f.deviation, f.r_squared, f.t_lo, f.t_hi, f.samples);
  os << buf;
}

inline void print_ratio(std::ostream& os, const RatioReport& r) {
  char buf[260];
  if (r.max_ratio_refined > 0.0) {
    std::snprintf(buf, sizeof buf, "%-24s max %.6g  refined %.6g  change %.3f  %s%s\n", r.case_id.c_str(), r.max_ratio,
                  r.max_ratio_refined, r.resolution_change, r.resolution_stable && r.bounded_verdict ? "bounded" : "UNBOUNDED",
                  r.note.empty() ? "" : ("  (" + r.note + ")").c_str());
  } else {
    std::snprintf(buf, sizeof buf, "%-24s max %.6g  c %.4f  rate %.4f  lhs slope %+.4f  %s%s\n", r.case_id.c_str(),
                  r.max_ratio, r.fitted_c, r.rate, r.lhs_slope, r.bounded_verdict ? "bounded" : "UNBOUNDED",
                  r.note.empty() ? "" : ("  (" + r.note + ")").c_str());
  }
  os << buf;
}

/// Fits of both u_t columns; fewer than the minimal sample count is reported, not fatal.
inline nlohmann::ordered_json fit_run(std::ostream& os, std::span<const NormRecord> recs, const AdmissibleParams& a,
                                      std::pair<double, double> window) {
  nlohmann::ordered_json j;
  const std::pair<const char*, std::pair<double NormRecord::*, double>> cols[] = {
      {"l_alpha", {&NormRecord::l_alpha, theoretical_lalpha_rate(a)}},
      {"hs_dot_v", {&NormRecord::hs_dot_v, theoretical_hs_rate(a)}}};
  for (const auto& [name, spec] : cols) {
    try {
      const auto f = fit_decay(column(recs, spec.first), window.first, window.second, spec.second);
      print_fit(os, name, f);
      j[name] = to_json(f);
    } catch (const std::invalid_argument& e) {
      os << name << ": fit skipped: " << e.what() << "\n";
      j[name] = nullptr;
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_admissible(Context& ctx) {
  const int n = static_cast<int>(ctx.cfg.get_int("grid.dim", 1));
  const double p = ctx.cfg.get_double("model.p", 2.0);
  const auto params = params_from(ctx.cfg);
  const auto report = validate(params);
  ctx.out << format_params(params) << "\n" << format_report(report);
  if (ctx.out_dir) {
    ensure_directory(*ctx.out_dir);
    write_report(*ctx.out_dir / "admissible.json",
                 {{"n", n}, {"p", p}, {"params", to_json(params)}, {"validation", to_json(report)}, {"seed", ctx.seed}},
                 ctx.cfg);
  }
  return kExitOk;
}

inline int write_run(Context& ctx, Trajectory& traj, double p) {
  traj.meta["subcommand"] = ctx.command;
  if (ctx.out_dir) write_trajectory(traj, *ctx.out_dir, ctx.cfg, ctx.seed, p);
  return kExitOk;
}

inline int cmd_evolve(Context& ctx, bool nonlinear) {
  const auto params = params_from(ctx.cfg);
  const auto grid = grid_from(ctx.cfg, 2048, 256.0);
  const auto ic = ic_from(ctx.cfg);
  const auto scfg = solve_config_from(ctx.cfg, nonlinear);
  const State s0 = make_initial(ic, grid);
  Trajectory traj;
  try {
    traj = solve(s0, params, scfg);
  } catch (const SolveFailure& f) {
    ctx.err << "error: " << f.what() << "\n";
    Trajectory partial = f.trajectory;
    partial.meta["failure"] = f.what();
    if (!partial.records.empty()) write_run(ctx, partial, scfg.p);
    return kExitRuntime;
  }
  write_run(ctx, traj, scfg.p);
  ctx.out << traj.records.size() << " samples, t in [0, " << traj.records.back().t << "]\n";
  const auto fits = fit_run(ctx.out, traj.records, params, fit_window_from(ctx.cfg, scfg.T));
  if (ctx.out_dir) write_report(*ctx.out_dir / "fits.json", {{"fits", fits}, {"seed", ctx.seed}}, ctx.cfg);
  return kExitOk;
}

inline PicardConfig picard_config_from(const RunConfig& c) {
  PicardConfig p;
  p.T = c.get_double("run.T", p.T);
  p.nodes = static_cast<int>(c.get_int("picard.nodes", p.nodes));
  p.p = c.get_double("model.p", p.p);
  p.max_iter = static_cast<int>(c.get_int("picard.max_iter", p.max_iter));
  p.tol = c.get_double("picard.tol", p.tol);
  p.quad_tol = c.get_double("picard.quad_tol", p.quad_tol);
  p.check_box = c.get_bool("run.check_box", p.check_box);
  return p;
}

inline int cmd_picard(Context& ctx) {
  auto params = params_from(ctx.cfg);
  const auto grid = grid_from(ctx.cfg, 512, 32.0);
  auto ic = ic_from(ctx.cfg);
  const auto pcfg = picard_config_from(ctx.cfg);
  nlohmann::ordered_json report;

  if (ctx.cfg.get_bool("picard.certify", false)) {
    const auto cert = certify_epsilon(grid, ic, params, pcfg, ctx.cfg.get_double("picard.eps_lo", 0.01),
                                      ctx.cfg.get_double("picard.eps_hi", 0.1),
                                      static_cast<int>(ctx.cfg.get_int("picard.rounds", 12)));
    ctx.out << "certified eps " << format_double(cert.eps) << " after " << cert.trials.size() << " trials\n";
    nlohmann::ordered_json trials = nlohmann::ordered_json::array();
    for (const auto& [e, ok] : cert.trials) trials.push_back({{"eps", e}, {"certified", ok}});
    report["certified_eps"] = cert.eps;
    report["trials"] = trials;
    params.eps0 = cert.eps;
    ic.amplitude = cert.eps;
  }

  const auto res = picard_solve(make_initial(ic, grid), params, pcfg);
  const auto& r = res.report;
  ctx.out << "iterates " << r.iterates << "  converged " << (r.converged ? "yes" : "no") << "  quadrature error "
          << r.quadrature_error << "\n";
  for (std::size_t j = 0; j < r.y_diffs.size(); ++j) {
    ctx.out << "  j=" << j + 1 << "  ||v_j - v_{j-1}||_Y = " << format_double(r.y_diffs[j]);
    if (j >= 1) ctx.out << "  ratio " << r.ratios[j - 1];
    ctx.out << "\n";
  }
  report["amplitude"] = ic.amplitude;
  report["picard"] = to_json(r);
  if (r.y_diffs.size() >= 3) {
    const auto v = contraction_report(r);
    ctx.out << "contraction: " << (v.pass ? "pass" : "fail") << " (" << v.reason << ")\n";
    report["contraction"] = {{"pass", v.pass}, {"worst_ratio", v.worst_ratio}, {"monotone", v.monotone}, {"reason", v.reason}};
  }
  report["seed"] = ctx.seed;
  if (ctx.out_dir) {
    Trajectory traj = res.trajectory;
    write_run(ctx, traj, pcfg.p);
    write_report(*ctx.out_dir / "picard.json", report, ctx.cfg);
  }
  return r.converged ? kExitOk : kExitRuntime;
}

inline int cmd_kernel_verify(Context& ctx) {
  const auto grid = grid_from(ctx.cfg, 1 << 15, 600.0);
  const double T = ctx.cfg.get_double("run.T", 100.0);
  const double dt = ctx.cfg.get_double("run.dt", 0.01);
  const double tol = ctx.cfg.get_double("kernel.tol", 1e-9);
  const auto res = kernel_identity_sweep(*grid, T, dt);
  const double gap = kernel_branch_gap(T);
  const bool pass = res.max_residual < tol && gap < 1e-12;
  ctx.out << "identity residual " << res.max_residual << " at t=" << res.worst_t << " |xi|^2=" << res.worst_xi_sq << " ("
          << res.evaluations << " evaluations)\n"
          << "branch gap " << gap << "\n"
          << (pass ? "pass" : "FAIL") << "\n";
  if (ctx.out_dir) {
    ensure_directory(*ctx.out_dir);
    write_report(*ctx.out_dir / "kernel_verify.json",
                 {{"max_residual", res.max_residual}, {"worst_t", res.worst_t}, {"worst_xi_sq", res.worst_xi_sq},
                  {"evaluations", res.evaluations}, {"branch_gap", gap}, {"pass", pass}, {"seed", ctx.seed}},
                 ctx.cfg);
  }
  return pass ? kExitOk : kExitRuntime;
}

inline std::vector<LinearEstimateCase> default_cases() {
  return {{1.0, 2.0, 0.0, 0.0, false}, {1.0, 2.0, 0.0, 0.0, true}, {2.0, 2.0, 0.0, 0.0, false},
          {1.0, 2.0, 1.0, 0.0, false}, {2.0, 2.0, 1.0, 1.0, false}, {1.0, 4.0, 0.0, 0.0, false}};
}

/// Gaussian data with seeded random widths and centres.
inline std::vector<Field> lemma_ensemble(const GridPtr& grid, int members, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> width(0.5, 2.0), shift(-2.0, 2.0);
  std::vector<Field> out;
  for (int m = 0; m < members; ++m) {
    const double w = width(rng);
    const double c1 = shift(rng), c2 = shift(rng);
    if (grid->dim() == 1) {
      out.push_back(sample(grid, [&](double x) { return std::exp(-(x - c1) * (x - c1) / (w * w)); }));
    } else {
      out.push_back(sample(grid, [&](double x, double y) {
        return std::exp(-((x - c1) * (x - c1) + (y - c2) * (y - c2)) / (w * w));
      }));
    }
  }
  return out;
}

inline int cmd_lemma_verify(Context& ctx) {
  const auto grid = grid_from(ctx.cfg, 4096, 400.0);
  const double T = ctx.cfg.get_double("run.T", 200.0);
  const auto ensemble = lemma_ensemble(grid, static_cast<int>(ctx.cfg.get_int("lemma.members", 4)), ctx.seed);
  const auto times = log_times(0.0, T, static_cast<int>(ctx.cfg.get_int("lemma.times", 64)));
  kernel::CutoffSpec cut;
  cut.eps_star = ctx.cfg.get_double("lemma.eps_star", cut.eps_star);
  const auto cases = default_cases();
  const auto reports = verify_linear_estimates(cases, ensemble, times, cut);
  bool all = true;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    print_ratio(ctx.out, r);
    all = all && r.bounded_verdict;
    arr.push_back(to_json(r));
  }
  if (ctx.out_dir) {
    ensure_directory(*ctx.out_dir);
    write_report(*ctx.out_dir / "lemma_verify.json", {{"cases", arr}, {"seed", ctx.seed}}, ctx.cfg);
  }
  return all ? kExitOk : kExitRuntime;
}

inline InequalityParams inequality_params_for(InequalityKind kind, const RunConfig& c) {
  InequalityParams ip;
  if (kind == InequalityKind::chain_rule) {
    ip.s = 0.75;
    ip.power = 2.0;
  }
  const std::string pre = "ineq." + to_string(kind) + ".";
  ip.theta = c.get_double(pre + "theta", ip.theta);
  ip.a = c.get_double(pre + "a", ip.a);
  ip.p = c.get_double(pre + "p", ip.p);
  ip.p0 = c.get_double(pre + "p0", ip.p0);
  ip.p1 = c.get_double(pre + "p1", ip.p1);
  ip.power = c.get_double(pre + "power", ip.power);
  ip.r = c.get_double(pre + "r", ip.r);
  ip.s = c.get_double(pre + "s", ip.s);
  ip.q = c.get_double(pre + "q", ip.q);
  ip.s1 = c.get_double(pre + "s1", ip.s1);
  ip.s2 = c.get_double(pre + "s2", ip.s2);
  ip.r1 = c.get_double(pre + "r1", ip.r1);
  ip.r2 = c.get_double(pre + "r2", ip.r2);
  return ip;
}

inline int cmd_ineq_verify(Context& ctx) {
  EnsembleSpec spec;
  spec.seed = ctx.seed;
  spec.members = static_cast<int>(ctx.cfg.get_int("ineq.members", spec.members));
  spec.dim = static_cast<int>(ctx.cfg.get_int("grid.dim", spec.dim));
  spec.points = static_cast<int>(ctx.cfg.get_int("grid.points", spec.points));
  spec.half_length = ctx.cfg.get_double("grid.half_length", spec.half_length);
  spec.k_max = static_cast<int>(ctx.cfg.get_int("ineq.k_max", spec.k_max));
  spec.decay = ctx.cfg.get_double("ineq.decay", spec.decay);

  std::vector<InequalityKind> kinds;
  const std::string which = ctx.cfg.get_string("ineq.kind", "all");
  if (which == "all") {
    kinds = {InequalityKind::gagliardo_nirenberg, InequalityKind::fractional_powers, InequalityKind::sobolev_embedding,
             InequalityKind::chain_rule};
  } else {
    kinds = {parse_inequality(which)};
  }
  bool all = true;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (auto k : kinds) {
    const auto r = verify_inequality(k, spec, inequality_params_for(k, ctx.cfg));
    print_ratio(ctx.out, r);
    all = all && r.bounded_verdict && r.resolution_stable;
    arr.push_back(to_json(r));
  }
  if (ctx.out_dir) {
    ensure_directory(*ctx.out_dir);
    write_report(*ctx.out_dir / "ineq_verify.json", {{"reports", arr}, {"seed", ctx.seed}}, ctx.cfg);
  }
  return all ? kExitOk : kExitRuntime;
}

inline int cmd_decay_fit(Context& ctx) {
  std::string input = ctx.cfg.get_string("fit.input", "");
  if (input.empty() && ctx.out_dir) input = ctx.out_dir->string();
  if (input.empty()) throw ConfigError("decay-fit needs a run directory (set input=DIR)");
  const auto run = load_run(input);
  if (run.records.empty()) throw ConfigError("run in '" + input + "' has no samples");
  AdmissibleParams a;
  const auto& pj = run.meta.at("params");
  a.n = pj.at("n").get<int>();
  a.p = pj.at("p").get<double>();
  a.alpha = pj.at("alpha").get<double>();
  a.s = pj.at("s").get<double>();
  const auto window = fit_window_from(ctx.cfg, run.records.back().t);
  ctx.out << "run " << input << "  config " << run.meta.value("config_hash", std::string{}) << "\n";
  const auto fits = fit_run(ctx.out, run.records, a, window);
  if (ctx.out_dir && fs::path(input) != *ctx.out_dir) {
    ensure_directory(*ctx.out_dir);
    write_report(*ctx.out_dir / "decay_fit.json", {{"input", input}, {"fits", fits}, {"seed", ctx.seed}}, ctx.cfg);
  }
  return fits["l_alpha"].is_null() || fits["hs_dot_v"].is_null() ? kExitRuntime : kExitOk;
}

// ---------------------------------------------------------------------------

inline int dispatch(Context& ctx) {
  const auto& c = ctx.command;
  if (c == "admissible") return cmd_admissible(ctx);
  if (c == "linear") return cmd_evolve(ctx, false);
  if (c == "solve") return cmd_evolve(ctx, true);
  if (c == "picard") return cmd_picard(ctx);
  if (c == "kernel-verify") return cmd_kernel_verify(ctx);
  if (c == "lemma-verify") return cmd_lemma_verify(ctx);
  if (c == "ineq-verify") return cmd_ineq_verify(ctx);
  return cmd_decay_fit(ctx);
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (argc < 2) {
    err << usage();
    return kExitUsage;
  }
  const std::string command = argv[1];
  if (command == "-h" || command == "--help" || command == "help") {
    out << usage();
    return kExitOk;
  }
  if (std::find(subcommands().begin(), subcommands().end(), command) == subcommands().end()) {
    err << "unknown subcommand '" << command << "'\n" << usage();
    return kExitUsage;
  }

  CLI::App app{"dwlab " + command};
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "config file (key = value)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--set", sets, "key=value override");
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp&) {
    out << app.help() << usage();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << usage();
    return kExitUsage;
  }

  Context ctx{command, {}, std::nullopt, 0, out, err};
  try {
    if (!config_path.empty()) ctx.cfg.merge_file(config_path);
    for (const auto& s : sets) ctx.cfg.apply_override(s);
    if (seed) ctx.cfg.set("run.seed", std::to_string(*seed));
    ctx.seed = static_cast<std::uint64_t>(ctx.cfg.get_int("run.seed", 20240601));
    if (!out_dir.empty()) ctx.out_dir = fs::path(out_dir);
    else if (ctx.cfg.has("output.dir")) ctx.out_dir = fs::path(ctx.cfg.get_string("output.dir", ""));
    if (const char* env = std::getenv("DWLAB_OUT"); env && *env) ctx.out_dir = fs::path(env);
    return dispatch(ctx);
  } catch (const InstabilityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::invalid_argument& e) {
    // AdmissibilityError, ConfigError and precondition failures.
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dwlab::cli
