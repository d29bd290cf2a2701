#pragma once

// Measurements that turn the decay and interpolation claims into numbers:
// log-log decay fits, boundedness ratios for the linear estimates and the
// harmonic-analysis inequalities, contraction checks for the Picard
// recurrence, and the kernel identity sweep.
//
// "A <~ B" is operationalized as: the ratio A/B stays bounded along the
// sampled times (or ensemble), and does not grow across refinements.

#include <dwlab/admissibility.hpp>
#include <dwlab/function_spaces.hpp>
#include <dwlab/kernel.hpp>
#include <dwlab/solver.hpp>
#include <dwlab/spectral_grid.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dwlab {

// ---------------------------------------------------------------------------
// Decay fits

struct DecayFit {
  double t_lo = 0.0;
  double t_hi = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double theoretical = 0.0;
  double deviation = 0.0;
  double r_squared = 0.0;
  int samples = 0;
};

struct TimeValue {
  double t;
  double value;
};

inline constexpr int kMinFitSamples = 10;

/// Ordinary least squares of log(value) on log(1 + t) over [t_lo, t_hi].
inline DecayFit fit_decay(std::span<const TimeValue> series, double t_lo, double t_hi, double theoretical) {
  if (!(t_lo < t_hi)) throw std::invalid_argument("fit window must satisfy t_lo < t_hi");
  std::vector<std::pair<double, double>> pts;
  for (const auto& tv : series) {
    if (tv.t < t_lo || tv.t > t_hi) continue;
    if (!(tv.value > 0.0)) throw std::invalid_argument("fit_decay: nonpositive values in window");
    pts.emplace_back(std::log1p(tv.t), std::log(tv.value));
  }
  if (static_cast<int>(pts.size()) < kMinFitSamples) {
    throw std::invalid_argument("fit_decay: insufficient points in window (" + std::to_string(pts.size()) + " < " +
                                std::to_string(kMinFitSamples) + ")");
  }
  const double n = static_cast<double>(pts.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  DecayFit f;
  f.t_lo = t_lo;
  f.t_hi = t_hi;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.theoretical = theoretical;
  f.deviation = f.slope - theoretical;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  f.samples = static_cast<int>(pts.size());
  return f;
}

/// Last three quarters of the log(1 + t) span of a run ending at T.
inline std::pair<double, double> default_fit_window(double T) {
  return {std::pow(1.0 + T, 0.25) - 1.0, T};
}

/// Theoretical decay exponents of ||u_t||_{L^alpha} and ||u_t||_{\dot H^s}.
inline double theoretical_lalpha_rate(const AdmissibleParams& a) {
  return -0.5 * a.n * (1.0 - 1.0 / a.alpha) - 1.0;
}
inline double theoretical_hs_rate(const AdmissibleParams& a) { return -0.25 * a.n - 1.0 - 0.5 * a.s; }

inline std::vector<TimeValue> column(std::span<const NormRecord> recs, double NormRecord::*field) {
  std::vector<TimeValue> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back({r.t, r.*field});
  return out;
}

struct DecayExperiment {
  DecayFit l_alpha;
  DecayFit hs;
  Trajectory trajectory;
};

/// Run the nonlinear solver and fit both norms of u_t against their rates.
inline DecayExperiment decay_experiment(const AdmissibleParams& params, const InitialCondition& ic,
                                        const GridPtr& grid, const SolveConfig& cfg,
                                        std::optional<std::pair<double, double>> window = std::nullopt) {
  const State s0 = make_initial(ic, grid);
  DecayExperiment out;
  out.trajectory = solve(s0, params, cfg);
  const auto [lo, hi] = window.value_or(default_fit_window(cfg.T));
  out.l_alpha = fit_decay(column(out.trajectory.records, &NormRecord::l_alpha), lo, hi, theoretical_lalpha_rate(params));
  out.hs = fit_decay(column(out.trajectory.records, &NormRecord::hs_dot_v), lo, hi, theoretical_hs_rate(params));
  return out;
}

// ---------------------------------------------------------------------------
// Kernel checks

struct KernelIdentityResult {
  double max_residual = 0.0;
  double worst_t = 0.0;
  double worst_xi_sq = 0.0;
  std::size_t evaluations = 0;
};

/// sup over t in {0, dt, ..., t_max} and the distinct |xi|^2 of `grid` of
/// |K_tt + K_t + |xi|^2 K| with K_tt from the direct derivative formula.
inline KernelIdentityResult kernel_identity_sweep(const Grid& grid, double t_max, double dt) {
  std::vector<double> xs(grid.freq_sq().begin(), grid.freq_sq().end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  KernelIdentityResult res;
  const auto steps = static_cast<std::int64_t>(std::llround(t_max / dt));
  for (std::int64_t j = 0; j <= steps; ++j) {
    const double t = j * dt;
    for (double x : xs) {
      const auto d = kernel::damped(t, x);
      const double k = d.s;
      const double kt = d.c - 0.5 * d.s;
      const double ktt = (0.5 - x) * d.s - d.c;
      const double r = std::abs(ktt + kt + x * k);
      if (r > res.max_residual) {
        res.max_residual = r;
        res.worst_t = t;
        res.worst_xi_sq = x;
      }
    }
    res.evaluations += xs.size();
  }
  return res;
}

/// Largest relative gap between the Taylor and closed-form branches at the
/// switch threshold t^2 |z| = kSeriesThreshold, for t in (0, t_max].
inline double kernel_branch_gap(double t_max, int samples = 200) {
  double worst = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double t = t_max * i / samples;
    const double zabs = kernel::kSeriesThreshold / (t * t);
    for (double z : {zabs, -zabs}) {
      const auto a = kernel::damped_series(t, z);
      const auto b = kernel::damped_closed(t, z);
      worst = std::max(worst, std::abs(a.s - b.s) / std::abs(b.s));
      worst = std::max(worst, std::abs(a.c - b.c) / std::abs(b.c));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Ratio reports

struct RatioReport {
  std::string case_id;
  double max_ratio = 0.0;
  std::vector<double> ratio_trend;  // over t, or over ensemble index
  bool bounded_verdict = false;
  std::string note;  // e.g. "surrogate norm"
  // Filled by the linear-estimate verifier.
  double fitted_c = 0.0;
  double rate = 0.0;
  double lhs_slope = 0.0;
  // Filled by the inequality ensembles.
  double max_ratio_refined = 0.0;
  double resolution_change = 0.0;  // max(ratio_a/ratio_b, ratio_b/ratio_a)
  bool resolution_stable = false;
};

/// Non-growth in the tail: the max over the last quarter of the trend is at
/// most 5% above the max over the third quarter. On log-spaced times this
/// flags any power-law or logarithmic growth while allowing the transient
/// approach to a limit.
inline bool trend_bounded(std::span<const double> trend) {
  if (trend.empty()) return false;
  for (double x : trend)
    if (!std::isfinite(x) || x < 0.0) return false;
  const std::size_t n = trend.size();
  if (n < 4) return true;
  const auto q3 = trend.begin() + n / 2, q4 = trend.begin() + (3 * n) / 4;
  const double third = *std::max_element(q3, q4);
  const double last = *std::max_element(q4, trend.end());
  return last <= 1.05 * third;
}

// ---------------------------------------------------------------------------
// Linear estimates

struct LinearEstimateCase {
  double rho = 1.0;
  double q = 2.0;
  double s1 = 0.0;
  double s2 = 0.0;
  bool time_derivative = false;

  double rate(int n) const {
    return 0.5 * n * (1.0 / rho - 1.0 / q) + 0.5 * (s1 - s2) + (time_derivative ? 1.0 : 0.0);
  }
  std::string id() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s(rho=%g,q=%g,s1=%g,s2=%g)", time_derivative ? "dtK" : "K", rho, q, s1, s2);
    return buf;
  }
};

inline void check_case(const LinearEstimateCase& c) {
  if (!(c.rho >= 1.0 && c.rho <= c.q && std::isfinite(c.q) && c.q != 1.0 && c.s1 >= c.s2 && c.s2 >= 0.0)) {
    throw std::invalid_argument("linear-estimate case needs 1 <= rho <= q < inf, q != 1, s1 >= s2 >= 0: " + c.id());
  }
}

/// L^q norm of the field whose spectrum is F multiplied by mult(|xi|^2).
inline double multiplier_lq(const SpectralField& F, const std::function<double(double)>& mult, double q) {
  if (q == 2.0) {
    const Grid& g = *F.grid;
    const auto fsq = g.freq_sq();
    double acc = 0.0;
    for (std::size_t i = 0; i < fsq.size(); ++i) {
      const double m = mult(fsq[i]);
      acc += g.hermitian_weight(i) * m * m * std::norm(F.coeffs[i]);
    }
    return std::sqrt(g.volume() * acc);
  }
  return lp_norm(to_physical(apply_symbol(F, mult)), q);
}

/// ||K(t) * phi|| (or the time-derivative kernel) in \dot H^s_q at each time.
inline std::vector<TimeValue> kernel_norm_series(const SpectralField& phi, std::span<const double> times,
                                                 bool time_derivative, double s = 0.0, double q = 2.0) {
  std::vector<TimeValue> out;
  const auto hs = homogeneous_symbol(s);
  for (double t : times) {
    auto mult = [&](double x) {
      return hs(x) * (time_derivative ? kernel::k_hat_dt(t, x) : kernel::k_hat(t, x));
    };
    out.push_back({t, multiplier_lq(phi, mult, q)});
  }
  return out;
}

/// Times uniform in log(1 + t) on [t_lo, t_hi].
inline std::vector<double> log_times(double t_lo, double t_hi, int count) {
  std::vector<double> ts(count);
  const double a = std::log1p(t_lo), b = std::log1p(t_hi);
  for (int i = 0; i < count; ++i) ts[i] = std::expm1(a + (b - a) * i / std::max(1, count - 1));
  return ts;
}

/// Ratio sup_t LHS/RHS for each case over an ensemble of data fields. The
/// high-frequency decay constant c is fitted on t in [1, 10].
inline std::vector<RatioReport> verify_linear_estimates(std::span<const LinearEstimateCase> cases,
                                                        std::span<const Field> ensemble,
                                                        std::span<const double> t_grid,
                                                        const kernel::CutoffSpec& cutoff = kernel::CutoffSpec{}) {
  if (ensemble.empty()) throw std::invalid_argument("linear-estimate ensemble is empty");
  if (t_grid.size() < 2) throw std::invalid_argument("linear-estimate time grid needs at least two points");
  std::vector<RatioReport> reports;
  const int n = ensemble.front().grid->dim();
  const auto c_times = log_times(1.0, 10.0, 19);

  for (const auto& c : cases) {
    check_case(c);
    RatioReport rep;
    rep.case_id = c.id();
    rep.rate = c.rate(n);
    if ((c.rho != 2.0 && c.s2 > 0.0) || (c.q != 2.0 && c.s1 > 0.0)) rep.note = "surrogate norm";
    rep.ratio_trend.assign(t_grid.size(), 0.0);
    const double beta_q = (n - 1) * std::abs(0.5 - 1.0 / c.q);
    const double high_order = c.time_derivative ? beta_q : beta_q - 1.0;
    const auto hs1 = homogeneous_symbol(c.s1);
    const auto hs2 = homogeneous_symbol(c.s2);
    auto kern = [&](double t, double x) { return c.time_derivative ? kernel::k_hat_dt(t, x) : kernel::k_hat(t, x); };

    double c_sum = 0.0;
    std::vector<TimeValue> lhs_first;
    for (std::size_t e = 0; e < ensemble.size(); ++e) {
      const auto phi = to_spectral(ensemble[e]);
      const double low = multiplier_lq(phi, [&](double x) { return hs2(x) * kernel::chi_low(std::sqrt(x), cutoff); }, c.rho);
      const double high = multiplier_lq(
          phi, [&](double x) { return hs1(x) * kernel::chi_high(std::sqrt(x), cutoff) * std::pow(1.0 + x, 0.5 * high_order); },
          c.q);

      // Fit the exponential rate of the high-frequency part.
      std::vector<std::pair<double, double>> hp;
      for (double t : c_times) {
        const double hv = multiplier_lq(phi, [&](double x) { return hs1(x) * kernel::chi_high(std::sqrt(x), cutoff) * kern(t, x); }, c.q);
        if (hv > 0.0) hp.emplace_back(t, std::log(hv));
      }
      double c_fit = 0.0;
      if (hp.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (auto& [x, y] : hp) { mx += x; my += y; }
        mx /= hp.size();
        my /= hp.size();
        double sxx = 0.0, sxy = 0.0;
        for (auto& [x, y] : hp) { sxx += (x - mx) * (x - mx); sxy += (x - mx) * (y - my); }
        c_fit = -sxy / sxx;
      }
      c_fit = std::max(c_fit, 1e-6);
      c_sum += c_fit;

      for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double t = t_grid[k];
        const double lhs = multiplier_lq(phi, [&](double x) { return hs1(x) * kern(t, x); }, c.q);
        const double rhs = std::pow(1.0 + t, -rep.rate) * low + std::exp(-c_fit * t) * high;
        const double ratio = rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 0.0 : kInf);
        rep.ratio_trend[k] = std::max(rep.ratio_trend[k], ratio);
        if (e == 0) lhs_first.push_back({t, lhs});
      }
    }
    rep.fitted_c = c_sum / ensemble.size();
    rep.max_ratio = *std::max_element(rep.ratio_trend.begin(), rep.ratio_trend.end());
    rep.bounded_verdict = std::isfinite(rep.max_ratio) && trend_bounded(rep.ratio_trend);
    const auto [lo, hi] = default_fit_window(t_grid.back());
    try {
      rep.lhs_slope = fit_decay(lhs_first, std::max(lo, t_grid.front()), hi, -rep.rate).slope;
    } catch (const std::invalid_argument&) {
      rep.lhs_slope = std::numeric_limits<double>::quiet_NaN();
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Harmonic-analysis inequality ensembles

enum class InequalityKind { gagliardo_nirenberg, fractional_powers, sobolev_embedding, chain_rule };

inline InequalityKind parse_inequality(const std::string& s) {
  if (s == "GN" || s == "gn" || s == "gagliardo_nirenberg") return InequalityKind::gagliardo_nirenberg;
  if (s == "powers") return InequalityKind::fractional_powers;
  if (s == "embedding") return InequalityKind::sobolev_embedding;
  if (s == "chain") return InequalityKind::chain_rule;
  throw std::invalid_argument("unknown inequality '" + s + "' (GN | powers | embedding | chain)");
}

inline std::string to_string(InequalityKind k) {
  switch (k) {
    case InequalityKind::gagliardo_nirenberg: return "GN";
    case InequalityKind::fractional_powers: return "powers";
    case InequalityKind::sobolev_embedding: return "embedding";
    case InequalityKind::chain_rule: return "chain";
  }
  return "?";
}

/// Exponents for all four inequalities; each kind reads its own subset.
struct InequalityParams {
  // Gagliardo-Nirenberg: ||u||_{\dot H^theta_p} <~ ||u||_{L^p0}^{1-w} ||u||_{\dot H^a_p1}^w
  double theta = 0.5, a = 1.0, p = 2.0, p0 = 2.0, p1 = 2.0;
  // fractional powers: || |u|^power ||_{\dot H^s_r} <~ ||u||_{\dot H^s_r} ||u||_inf^{power-1}
  double power = 3.0, r = 2.0, s = 1.0;
  // embedding: ||u||_inf <~ ||u||_{\dot H^s1_q} + ||u||_{\dot H^s2_q}
  double q = 2.0, s1 = 0.25, s2 = 1.0;
  // chain rule: || |u|^power ||_{\dot H^s_r} <~ ||u||_{L^r1}^{power-1} ||u||_{\dot H^s_r2}
  double r1 = 8.0, r2 = 8.0 / 3.0;
};

struct EnsembleSpec {
  int members = 200;
  std::uint64_t seed = 20240601;
  int dim = 1;
  int points = 128;
  double half_length = std::numbers::pi;
  int k_max = 12;       // band limit, in lattice units
  double decay = 1.5;   // spectral amplitudes ~ |k|^{-decay}
};

/// GN interpolation exponent.
inline double gn_omega(const InequalityParams& ip, int n) {
  return (1.0 / ip.p0 - 1.0 / ip.p + ip.theta / n) / (1.0 / ip.p0 - 1.0 / ip.p1 + ip.a / n);
}

inline void check_hypotheses(InequalityKind kind, const InequalityParams& ip, int n) {
  auto open_exp = [](double x) { return x > 1.0 && std::isfinite(x); };
  switch (kind) {
    case InequalityKind::gagliardo_nirenberg: {
      if (!(open_exp(ip.p) && open_exp(ip.p0) && open_exp(ip.p1)))
        throw std::invalid_argument("GN hypothesis violated: need 1 < p, p0, p1 < inf");
      if (!(ip.a > 0.0 && ip.theta >= 0.0 && ip.theta < ip.a))
        throw std::invalid_argument("GN hypothesis violated: need a > 0 and theta in [0, a)");
      const double w = gn_omega(ip, n);
      if (!(w >= ip.theta / ip.a - 1e-14 && w <= 1.0 + 1e-14))
        throw std::invalid_argument("GN hypothesis violated: need theta/a <= omega(theta, a) <= 1, got omega = " +
                                    std::to_string(w));
      return;
    }
    case InequalityKind::fractional_powers:
      if (!(ip.power > 1.0 && open_exp(ip.r) && ip.s > n / ip.r && ip.s < ip.power))
        throw std::invalid_argument("fractional-powers hypothesis violated: need p > 1, 1 < r < inf, s in (n/r, p)");
      return;
    case InequalityKind::sobolev_embedding:
      if (!(open_exp(ip.q) && ip.s1 > 0.0 && ip.s1 < n / ip.q && n / ip.q < ip.s2))
        throw std::invalid_argument("embedding hypothesis violated: need 1 < q < inf and 0 < s1 < n/q < s2");
      return;
    case InequalityKind::chain_rule: {
      if (!(ip.s > 0.0 && ip.power > std::ceil(ip.s)))
        throw std::invalid_argument("chain-rule hypothesis violated: need s > 0 and p > ceil(s)");
      if (!(open_exp(ip.r) && open_exp(ip.r1) && open_exp(ip.r2)))
        throw std::invalid_argument("chain-rule hypothesis violated: need 1 < r, r1, r2 < inf");
      if (std::abs(1.0 / ip.r - ((ip.power - 1.0) / ip.r1 + 1.0 / ip.r2)) > 1e-12)
        throw std::invalid_argument("chain-rule hypothesis violated: need 1/r = (p-1)/r1 + 1/r2");
      return;
    }
  }
}

/// Random band-limited zero-mean field with spectrum ~ |k|^{-decay} and
/// uniform random phases, drawn from `rng`.
struct RandomSpectrum {
  // (row wavenumber index, column index, coefficient); row index is signed.
  std::vector<std::tuple<int, int, Complex>> modes;
};

inline RandomSpectrum draw_spectrum(const EnsembleSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> amp(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  RandomSpectrum rs;
  if (spec.dim == 1) {
    for (int k = 1; k <= spec.k_max; ++k) {
      const double a = amp(rng) * std::pow(static_cast<double>(k), -spec.decay);
      rs.modes.emplace_back(0, k, std::polar(a, phase(rng)));
    }
  } else {
    for (int kr = -spec.k_max; kr <= spec.k_max; ++kr) {
      for (int kc = 0; kc <= spec.k_max; ++kc) {
        if (kc == 0 && kr <= 0) continue;  // conjugate half
        const double kk = std::hypot(kr, kc);
        if (kk > spec.k_max) continue;
        const double a = amp(rng) * std::pow(kk, -spec.decay);
        rs.modes.emplace_back(kr, kc, std::polar(a, phase(rng)));
      }
    }
  }
  return rs;
}

/// Realize a random spectrum on a grid with at least 2 k_max + 2 points.
inline Field realize(const RandomSpectrum& rs, const GridPtr& grid) {
  SpectralField F(grid);
  const int n = grid->points_per_axis();
  const int cols = grid->spectral_cols();
  for (const auto& [kr, kc, c] : rs.modes) {
    if (grid->dim() == 1) {
      F.coeffs[kc] = c;
    } else {
      const int row = kr >= 0 ? kr : n + kr;
      F.coeffs[static_cast<std::size_t>(row) * cols + kc] = c;
      if (kc == 0) F.coeffs[static_cast<std::size_t>((n - row) % n) * cols] = std::conj(c);
    }
  }
  return to_physical(F);
}

inline Field abs_pow(const Field& u, double power) {
  Field out(u.grid);
  for (std::size_t i = 0; i < u.values.size(); ++i) out.values[i] = std::pow(std::abs(u.values[i]), power);
  return out;
}

/// LHS/RHS of one inequality for one field.
inline double inequality_ratio(InequalityKind kind, const InequalityParams& ip, const Field& u) {
  const int n = u.grid->dim();
  const auto U = to_spectral(u);
  switch (kind) {
    case InequalityKind::gagliardo_nirenberg: {
      const double w = gn_omega(ip, n);
      const double lhs = sobolev_norm(U, ip.theta, ip.p, true);
      const double base = lp_norm(u, ip.p0);
      const double top = w == 0.0 ? 1.0 : std::pow(sobolev_norm(U, ip.a, ip.p1, true), w);
      return lhs / (std::pow(base, 1.0 - w) * top);
    }
    case InequalityKind::fractional_powers: {
      const double lhs = sobolev_norm(abs_pow(u, ip.power), ip.s, ip.r, true);
      const double rhs = sobolev_norm(U, ip.s, ip.r, true) * std::pow(lp_norm(u, kInf), ip.power - 1.0);
      return lhs / rhs;
    }
    case InequalityKind::sobolev_embedding: {
      const double lhs = lp_norm(u, kInf);
      return lhs / (sobolev_norm(U, ip.s1, ip.q, true) + sobolev_norm(U, ip.s2, ip.q, true));
    }
    case InequalityKind::chain_rule: {
      const double lhs = sobolev_norm(abs_pow(u, ip.power), ip.s, ip.r, true);
      const double rhs = std::pow(lp_norm(u, ip.r1), ip.power - 1.0) * sobolev_norm(U, ip.s, ip.r2, true);
      return lhs / rhs;
    }
  }
  return 0.0;
}

/// Max LHS/RHS over a seeded ensemble at the base resolution and at twice
/// the resolution (same box, same random spectra).
inline RatioReport verify_inequality(InequalityKind kind, const EnsembleSpec& spec, const InequalityParams& ip) {
  check_hypotheses(kind, ip, spec.dim);
  if (spec.members < 1) throw std::invalid_argument("ensemble needs at least one member");
  if (spec.points < 2 * spec.k_max + 2) throw std::invalid_argument("grid too coarse for the ensemble band limit");
  const auto coarse = make_grid(spec.dim, spec.points, spec.half_length);
  const auto fine = make_grid(spec.dim, 2 * spec.points, spec.half_length);
  std::mt19937_64 rng(spec.seed);

  RatioReport rep;
  rep.case_id = to_string(kind);
  if ((kind == InequalityKind::gagliardo_nirenberg && (ip.p != 2.0 || ip.p1 != 2.0)) ||
      (kind != InequalityKind::gagliardo_nirenberg && (ip.r != 2.0 || ip.q != 2.0 || ip.r2 != 2.0))) {
    rep.note = "surrogate norm";
  }
  for (int e = 0; e < spec.members; ++e) {
    const auto rs = draw_spectrum(spec, rng);
    const double a = inequality_ratio(kind, ip, realize(rs, coarse));
    const double b = inequality_ratio(kind, ip, realize(rs, fine));
    rep.ratio_trend.push_back(a);
    rep.max_ratio = std::max(rep.max_ratio, a);
    rep.max_ratio_refined = std::max(rep.max_ratio_refined, b);
  }
  rep.resolution_change = std::max(rep.max_ratio / rep.max_ratio_refined, rep.max_ratio_refined / rep.max_ratio);
  rep.resolution_stable = std::isfinite(rep.resolution_change) && rep.resolution_change < 10.0;
  const double overall = rep.max_ratio;
  double second = 0.0;
  for (std::size_t i = rep.ratio_trend.size() / 2; i < rep.ratio_trend.size(); ++i) second = std::max(second, rep.ratio_trend[i]);
  rep.bounded_verdict = std::isfinite(overall) && overall > 0.0 && second <= 1.05 * overall;
  return rep;
}

// ---------------------------------------------------------------------------
// Contraction

inline constexpr double kContractionBound = 0.55;

struct ContractionVerdict {
  bool pass = false;
  double worst_ratio = 0.0;  // over ratios after the first
  bool monotone = false;
  std::string reason;
};

inline ContractionVerdict contraction_report(const PicardReport& rep) {
  if (rep.y_diffs.size() < 3) throw std::invalid_argument("contraction report needs at least three iterates");
  ContractionVerdict v;
  v.monotone = true;
  for (std::size_t i = 1; i < rep.y_diffs.size(); ++i)
    if (!(rep.y_diffs[i] < rep.y_diffs[i - 1])) v.monotone = false;
  std::vector<double> ratios = rep.ratios;
  if (ratios.empty()) {
    for (std::size_t i = 1; i < rep.y_diffs.size(); ++i) ratios.push_back(rep.y_diffs[i] / rep.y_diffs[i - 1]);
  }
  for (std::size_t i = 1; i < ratios.size(); ++i) v.worst_ratio = std::max(v.worst_ratio, ratios[i]);
  const bool ratios_ok = v.worst_ratio <= kContractionBound;
  v.pass = ratios_ok && v.monotone;
  if (!ratios_ok) v.reason = "ratio " + std::to_string(v.worst_ratio) + " > 0.55";
  else if (!v.monotone) v.reason = "differences not monotonically decreasing";
  else v.reason = "contraction";
  return v;
}

/// Certified amplitude for the Picard recurrence: every ratio <= 0.55 and
/// convergence within cfg.max_iter iterates.
struct CertifiedEpsilon {
  double eps = 0.0;
  PicardReport report;
  std::vector<std::pair<double, bool>> trials;
};

inline bool picard_certifies(const PicardReport& rep, int max_iter) {
  if (!rep.converged || rep.iterates > max_iter) return false;
  return std::all_of(rep.ratios.begin(), rep.ratios.end(), [](double r) { return r <= kContractionBound; });
}

/// Bisection in log(eps) between a passing eps_lo and a failing eps_hi
/// (eps_hi is doubled until it fails).
inline CertifiedEpsilon certify_epsilon(const GridPtr& grid, InitialCondition ic, const AdmissibleParams& params,
                                        const PicardConfig& cfg, double eps_lo, double eps_hi, int rounds = 12) {
  CertifiedEpsilon out;
  auto trial = [&](double eps, PicardReport* keep) {
    ic.amplitude = eps;
    bool ok = false;
    try {
      const auto res = picard_solve(make_initial(ic, grid), params, cfg);
      ok = picard_certifies(res.report, cfg.max_iter);
      if (ok && keep) *keep = res.report;
    } catch (const std::invalid_argument&) {
      ok = false;
    }
    out.trials.emplace_back(eps, ok);
    return ok;
  };
  PicardReport best;
  if (!trial(eps_lo, &best)) throw std::runtime_error("certify_epsilon: lower amplitude does not certify");
  int guard = 0;
  while (trial(eps_hi, &best)) {
    eps_lo = eps_hi;
    eps_hi *= 2.0;
    if (++guard > 40) throw std::runtime_error("certify_epsilon: no failing amplitude found");
  }
  // Reset best to the current eps_lo report.
  trial(eps_lo, &best);
  for (int i = 0; i < rounds; ++i) {
    const double mid = std::sqrt(eps_lo * eps_hi);
    PicardReport r;
    if (trial(mid, &r)) {
      eps_lo = mid;
      best = r;
    } else {
      eps_hi = mid;
    }
  }
  out.eps = eps_lo;
  out.report = best;
  return out;
}

}  // namespace dwlab
