#pragma once

// Time evolution of u_tt - Delta u + u_t = |u_t|^p on the periodic box.
//
// Two routes are provided:
//   * solve(): exact Fourier-side linear propagation combined with a
//     two-stage exponential midpoint rule for the Duhamel term;
//   * picard_solve(): the global successive-approximation recurrence
//     u_j = N[u_{j-1}], u_0 = 0, on a uniform time grid with trapezoid
//     quadrature of the Duhamel integral.

#include <dwlab/admissibility.hpp>
#include <dwlab/function_spaces.hpp>
#include <dwlab/kernel.hpp>
#include <dwlab/spectral_grid.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwlab {

// ---------------------------------------------------------------------------
// Initial data

enum class IcKind { gaussian, bump, single_mode };

inline IcKind parse_ic_kind(const std::string& s) {
  if (s == "gaussian") return IcKind::gaussian;
  if (s == "bump") return IcKind::bump;
  if (s == "single_mode") return IcKind::single_mode;
  throw std::invalid_argument("unknown initial-data kind '" + s + "'");
}

inline std::string to_string(IcKind k) {
  switch (k) {
    case IcKind::gaussian: return "gaussian";
    case IcKind::bump: return "bump";
    case IcKind::single_mode: return "single_mode";
  }
  return "?";
}

struct InitialCondition {
  IcKind kind = IcKind::gaussian;
  double amplitude = 0.01;  // epsilon
  double width = 1.0;       // gaussian standard width, or bump support radius
  std::array<double, 2> mode{1.0, 0.0};  // wave vector for single_mode
};

/// Threshold below which data counts as zero for support estimates.
inline constexpr double kSupportCutoff = 1e-12;

/// Largest node radius where |u| or |v| exceeds kSupportCutoff * max.
inline double numerical_support_radius(const State& s) {
  const double scale = std::max(s.u.max_abs(), s.v.max_abs());
  if (scale == 0.0) return 0.0;
  double r = 0.0;
  const Grid& g = *s.u.grid;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (std::abs(s.u.values[i]) > kSupportCutoff * scale || std::abs(s.v.values[i]) > kSupportCutoff * scale) {
      r = std::max(r, g.node_radius(i));
    }
  }
  return r;
}

/// (eps u0, eps u1). Gaussian and bump data use the same profile for both
/// components; single_mode is cos(k.x) with zero velocity.
inline State make_initial(const InitialCondition& ic, const GridPtr& grid) {
  if (!(ic.amplitude >= 0.0) || !std::isfinite(ic.amplitude)) {
    throw std::invalid_argument("initial amplitude must be finite and nonnegative");
  }
  const double w = ic.width;
  if (ic.kind != IcKind::single_mode && !(w > 0.0)) throw std::invalid_argument("initial width must be positive");

  auto profile = [&](double r2) -> double {
    switch (ic.kind) {
      case IcKind::gaussian: return std::exp(-r2 / (2.0 * w * w));
      case IcKind::bump: {
        const double q = r2 / (w * w);
        return q < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0;
      }
      case IcKind::single_mode: return 0.0;
    }
    return 0.0;
  };

  State s{Field(grid), Field(grid), 0.0};
  const int n = grid->points_per_axis();
  for (std::size_t idx = 0; idx < grid->node_count(); ++idx) {
    double x = 0.0, y = 0.0;
    if (grid->dim() == 1) {
      x = grid->coordinate(static_cast<int>(idx));
    } else {
      x = grid->coordinate(static_cast<int>(idx / n));
      y = grid->coordinate(static_cast<int>(idx % n));
    }
    if (ic.kind == IcKind::single_mode) {
      s.u.values[idx] = ic.amplitude * std::cos(ic.mode[0] * x + (grid->dim() == 2 ? ic.mode[1] * y : 0.0));
      s.v.values[idx] = 0.0;
    } else {
      const double val = ic.amplitude * profile(x * x + y * y);
      s.u.values[idx] = val;
      s.v.values[idx] = val;
    }
  }
  if (ic.kind != IcKind::single_mode && ic.amplitude > 0.0) {
    // Support must stay clear of the box edge along every axis.
    const double L = grid->half_length();
    const double reach = ic.kind == IcKind::bump ? w : w * std::sqrt(-2.0 * std::log(kSupportCutoff));
    if (reach >= L - grid->spacing()) {
      throw std::invalid_argument("initial data support (radius " + std::to_string(reach) +
                                  ") does not fit inside the box of half length " + std::to_string(L));
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Errors

class InstabilityError : public std::runtime_error {
 public:
  InstabilityError(double t, const std::string& what) : std::runtime_error(what), time(t) {}
  double time;
};

// ---------------------------------------------------------------------------
// Linear propagator

/// Fourier-side 2x2 propagator over a fixed time increment:
///   u' = (K + K_t) u + K v,   v' = -|xi|^2 K u + K_t v
/// (the lower-left entry is K_t + K_tt rewritten with the symbol identity).
class LinearPropagator {
 public:
  LinearPropagator(const Grid& g, double dt) {
    if (!(dt >= 0.0)) throw std::invalid_argument("propagation time must be nonnegative");
    const auto fsq = g.freq_sq();
    uu_.resize(fsq.size());
    uv_.resize(fsq.size());
    vu_.resize(fsq.size());
    vv_.resize(fsq.size());
    for (std::size_t i = 0; i < fsq.size(); ++i) {
      const auto kv = kernel::evaluate(dt, fsq[i]);
      uu_[i] = kv.k + kv.k_t;
      uv_[i] = kv.k;
      vu_[i] = kv.k_t + kv.k_tt;
      vv_[i] = kv.k_t;
    }
  }

  void apply(std::span<Complex> u, std::span<Complex> v) const {
    for (std::size_t i = 0; i < u.size(); ++i) {
      const Complex a = u[i], b = v[i];
      u[i] = uu_[i] * a + uv_[i] * b;
      v[i] = vu_[i] * a + vv_[i] * b;
    }
  }
  /// v-component only, written to `out`.
  void apply_v(std::span<const Complex> u, std::span<const Complex> v, std::span<Complex> out) const {
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = vu_[i] * u[i] + vv_[i] * v[i];
  }

 private:
  std::vector<double> uu_, uv_, vu_, vv_;
};

inline void require_same_grid(const State& s) {
  if (!s.u.grid || !s.v.grid || !s.u.grid->same_shape(*s.v.grid)) {
    throw std::invalid_argument("state components live on different grids");
  }
}

inline State propagate_linear(const State& state, double dt) {
  require_same_grid(state);
  const LinearPropagator prop(*state.u.grid, dt);
  auto U = to_spectral(state.u);
  auto V = to_spectral(state.v);
  prop.apply(U.coeffs, V.coeffs);
  return {to_physical(U), to_physical(V), state.t + dt};
}

// ---------------------------------------------------------------------------
// Nonlinearity

/// |v|^p evaluated on a 3/2-oversampled grid and truncated back to the
/// resolved band. The Nyquist modes are dropped on the way in and out.
class Dealiaser {
 public:
  explicit Dealiaser(const Grid& g) : grid_(&g), n_(g.points_per_axis()), m_(3 * g.points_per_axis() / 2) {}

  void apply(std::span<const Complex> v_hat, double p, std::span<Complex> out_hat) const {
    auto& eng = detail::engine_for(grid_->dim(), m_);
    auto spec = eng.spectrum();
    std::fill(spec.begin(), spec.end(), Complex{});
    transfer(v_hat, spec, /*to_padded=*/true);
    eng.backward();
    auto vals = eng.real();
    if (p == 2.0) {
      for (double& x : vals) x = x * x;
    } else {
      for (double& x : vals) x = std::pow(std::abs(x), p);
    }
    eng.forward();
    std::fill(out_hat.begin(), out_hat.end(), Complex{});
    transfer(eng.spectrum(), out_hat, /*to_padded=*/false);
  }

 private:
  // Copies the modes with |k| < N/2 between the N-grid and M-grid layouts.
  void transfer(std::span<const Complex> src, std::span<Complex> dst, bool to_padded) const {
    const int half = n_ / 2;
    if (grid_->dim() == 1) {
      for (int k = 0; k < half; ++k) dst[k] = src[k];
      return;
    }
    const int cols_n = n_ / 2 + 1;
    const int cols_m = m_ / 2 + 1;
    for (int k = -half + 1; k < half; ++k) {
      const int rn = k >= 0 ? k : n_ + k;
      const int rm = k >= 0 ? k : m_ + k;
      for (int c = 0; c < half; ++c) {
        const std::size_t in = static_cast<std::size_t>(rn) * cols_n + c;
        const std::size_t im = static_cast<std::size_t>(rm) * cols_m + c;
        if (to_padded) {
          dst[im] = src[in];
        } else {
          dst[in] = src[im];
        }
      }
    }
  }

  const Grid* grid_;
  int n_;
  int m_;
};

inline Field nonlinearity(const Field& v, double p) {
  if (!(p > 1.0)) throw std::invalid_argument("nonlinearity exponent must exceed 1");
  const Dealiaser d(*v.grid);
  auto V = to_spectral(v);
  SpectralField out(v.grid);
  d.apply(V.coeffs, p, out.coeffs);
  return to_physical(out);
}

// ---------------------------------------------------------------------------
// Exponential midpoint integrator

inline constexpr double kDefaultDtMax = 0.5;

/// One step of size dt on spectral (u, v):
///   predictor  v_mid = [P(h) w]_v + K(h) N(v_n),             h = dt/2
///   corrector  u' = [P(dt) w]_u + dt K(h)   N(v_mid)
///              v' = [P(dt) w]_v + dt K_t(h) N(v_mid)
/// The predictor is exponential Euler (exact for frozen forcing since
/// int_0^h K_t(s) ds = K(h)), which keeps the scheme second order.
class ExponentialMidpoint {
 public:
  ExponentialMidpoint(const Grid& g, double dt, double p, bool nonlinear = true)
      : grid_(&g), dt_(dt), p_(p), nonlinear_(nonlinear), full_(g, dt), half_(g, 0.5 * dt), dealias_(g) {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (nonlinear && !(p > 1.0)) throw std::invalid_argument("nonlinearity exponent must exceed 1");
    const auto fsq = g.freq_sq();
    k_half_.resize(fsq.size());
    kt_half_.resize(fsq.size());
    for (std::size_t i = 0; i < fsq.size(); ++i) {
      k_half_[i] = kernel::k_hat(0.5 * dt, fsq[i]);
      kt_half_[i] = kernel::k_hat_dt(0.5 * dt, fsq[i]);
    }
    forcing_.resize(fsq.size());
    v_mid_.resize(fsq.size());
  }

  double dt() const { return dt_; }

  void advance(std::span<Complex> u, std::span<Complex> v) {
    if (!nonlinear_) {
      full_.apply(u, v);
      return;
    }
    const std::size_t n = u.size();
    dealias_.apply(v, p_, forcing_);
    half_.apply_v(u, v, v_mid_);
    for (std::size_t i = 0; i < n; ++i) v_mid_[i] += k_half_[i] * forcing_[i];
    dealias_.apply(v_mid_, p_, forcing_);
    full_.apply(u, v);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += dt_ * k_half_[i] * forcing_[i];
      v[i] += dt_ * kt_half_[i] * forcing_[i];
    }
  }

 private:
  const Grid* grid_;
  double dt_;
  double p_;
  bool nonlinear_;
  LinearPropagator full_;
  LinearPropagator half_;
  Dealiaser dealias_;
  std::vector<double> k_half_, kt_half_;
  std::vector<Complex> forcing_, v_mid_;
};

inline bool all_finite(std::span<const Complex> c) {
  return std::all_of(c.begin(), c.end(), [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

inline State step(const State& state, double dt, double p, double dt_max = kDefaultDtMax) {
  require_same_grid(state);
  if (!(dt > 0.0) || dt > dt_max) {
    throw std::invalid_argument("time step " + std::to_string(dt) + " outside (0, " + std::to_string(dt_max) + "]");
  }
  ExponentialMidpoint integ(*state.u.grid, dt, p);
  auto U = to_spectral(state.u);
  auto V = to_spectral(state.v);
  integ.advance(U.coeffs, V.coeffs);
  if (!all_finite(U.coeffs) || !all_finite(V.coeffs)) {
    throw InstabilityError(state.t + dt, "non-finite field after step at t = " + std::to_string(state.t + dt));
  }
  return {to_physical(U), to_physical(V), state.t + dt};
}

// ---------------------------------------------------------------------------
// Trajectories

/// Norms recorded at each sample; column order matches norms.csv.
struct NormRecord {
  double t = 0.0;
  double l_alpha = 0.0;
  double l2_v = 0.0;
  double hs_dot_v = 0.0;
  double l2_u = 0.0;
  double linf_v = 0.0;
  double x_weighted_lalpha = 0.0;
  double x_weighted_hs = 0.0;
};

struct Trajectory {
  std::vector<NormRecord> records;
  std::vector<TrajectorySample> snapshots;  // full states, when requested
  AdmissibleParams params;
  std::map<std::string, std::string> meta;
};

inline SpaceWeights weights_for(const AdmissibleParams& a) { return {a.alpha, a.s, a.n}; }

inline NormRecord measure(double t, const SpectralField& U, const SpectralField& V, const SpaceWeights& w) {
  NormRecord r;
  r.t = t;
  const Field v = to_physical(V);
  r.l_alpha = lp_norm(v, w.alpha);
  r.l2_v = spectral_l2_norm(V);
  r.hs_dot_v = sobolev_l2_spectral(V, w.s, true);
  r.l2_u = spectral_l2_norm(U);
  r.linf_v = lp_norm(v, kInf);
  r.x_weighted_lalpha = std::pow(1.0 + t, w.lalpha_exponent()) * r.l_alpha;
  r.x_weighted_hs = std::pow(1.0 + t, w.hs_exponent()) * r.hs_dot_v;
  return r;
}

/// sup of the X(T) weighted norm over recorded samples.
inline double x_norm(std::span<const NormRecord> recs) {
  require_nonempty(recs.size(), "x_norm");
  double best = 0.0;
  for (const auto& r : recs) best = std::max(best, r.x_weighted_lalpha + r.x_weighted_hs);
  return best;
}

inline double y_norm(std::span<const NormRecord> recs) {
  require_nonempty(recs.size(), "y_norm");
  double best = 0.0;
  for (const auto& r : recs) best = std::max(best, (1.0 + r.t) * r.l2_v);
  return best;
}

/// Sampling plan. Log schedules are uniform in log(1 + t) with
/// `per_decade` points per decade of (1 + t); all times are snapped to the
/// step lattice.
struct SampleSchedule {
  enum class Kind { log, uniform } kind = Kind::log;
  int per_decade = 64;
  int count = 0;  // uniform: number of intervals (0 means every step)
};

inline std::vector<std::int64_t> sample_steps(const SampleSchedule& sch, double T, std::int64_t steps) {
  std::vector<std::int64_t> out{0};
  if (steps == 0) return out;
  if (sch.kind == SampleSchedule::Kind::uniform) {
    const std::int64_t cnt = sch.count > 0 ? sch.count : steps;
    for (std::int64_t j = 1; j <= cnt; ++j) out.push_back((j * steps + cnt / 2) / cnt);
  } else {
    const double decades = std::log10(1.0 + T);
    const auto cnt = static_cast<std::int64_t>(std::ceil(sch.per_decade * decades));
    for (std::int64_t j = 1; j <= cnt; ++j) {
      const double t = std::pow(1.0 + T, static_cast<double>(j) / cnt) - 1.0;
      out.push_back(std::llround(t / T * steps));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.back() != steps) out.push_back(steps);
  return out;
}

struct SolveConfig {
  double T = 10.0;
  double dt = 0.05;
  double p = 2.0;
  double dt_max = kDefaultDtMax;
  bool nonlinear = true;
  bool check_box = true;  // require L > support radius + T
  SampleSchedule schedule{};
  std::vector<double> snapshot_times;  // states kept at the nearest sample
};

/// L > R + T keeps the unit-speed front away from the periodic images.
inline void check_box_clearance(const State& s, double T) {
  const double R = numerical_support_radius(s);
  const double L = s.u.grid->half_length();
  if (!(L > R + T)) {
    throw std::invalid_argument("box too small: half length " + std::to_string(L) + " must exceed support radius " +
                                std::to_string(R) + " + T = " + std::to_string(R + T));
  }
}

struct SolveFailure : InstabilityError {
  SolveFailure(double t, const std::string& what, Trajectory partial)
      : InstabilityError(t, what), trajectory(std::move(partial)) {}
  Trajectory trajectory;
};

inline Trajectory solve(const State& state0, const AdmissibleParams& params, const SolveConfig& cfg) {
  require_same_grid(state0);
  if (!(cfg.T >= 0.0)) throw std::invalid_argument("final time must be nonnegative");
  if (cfg.nonlinear && std::abs(cfg.p - params.p) > 1e-15) {
    throw std::invalid_argument("solver exponent differs from the validated parameter record");
  }
  if (cfg.check_box) check_box_clearance(state0, cfg.T);
  const GridPtr grid = state0.u.grid;
  const SpaceWeights w = weights_for(params);

  Trajectory traj;
  traj.params = params;

  const auto steps = cfg.T == 0.0 ? std::int64_t{0} : std::max<std::int64_t>(1, std::llround(cfg.T / cfg.dt));
  const double dt = steps == 0 ? cfg.dt : cfg.T / static_cast<double>(steps);
  if (steps > 0 && (!(dt > 0.0) || dt > cfg.dt_max * (1.0 + 1e-12))) {
    throw std::invalid_argument("time step " + std::to_string(dt) + " outside (0, dt_max]");
  }
  const auto plan = sample_steps(cfg.schedule, cfg.T, steps);

  std::vector<std::int64_t> snap_steps;
  for (double ts : cfg.snapshot_times) {
    const std::int64_t target = steps == 0 ? 0 : std::llround(ts / cfg.T * steps);
    const auto it = std::lower_bound(plan.begin(), plan.end(), target);
    snap_steps.push_back(it == plan.end() ? plan.back() : *it);
  }

  auto U = to_spectral(state0.u);
  auto V = to_spectral(state0.v);
  auto record = [&](std::int64_t k) {
    const double t = state0.t + (steps == 0 ? 0.0 : cfg.T * static_cast<double>(k) / steps);
    traj.records.push_back(measure(t, U, V, w));
    if (std::find(snap_steps.begin(), snap_steps.end(), k) != snap_steps.end()) {
      traj.snapshots.push_back({t, State{to_physical(U), to_physical(V), t}});
    }
  };

  record(0);
  if (steps == 0) return traj;
  ExponentialMidpoint integ(*grid, dt, cfg.p, cfg.nonlinear);
  std::size_t next = 1;
  for (std::int64_t k = 1; k <= steps; ++k) {
    integ.advance(U.coeffs, V.coeffs);
    if (!all_finite(V.coeffs) || !all_finite(U.coeffs)) {
      const double t = state0.t + dt * k;
      throw SolveFailure(t, "numerical instability: non-finite field at t = " + std::to_string(t), std::move(traj));
    }
    if (next < plan.size() && plan[next] == k) {
      record(k);
      ++next;
    }
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Picard recurrence

struct PicardConfig {
  double T = 20.0;
  int nodes = 512;  // uniform time nodes including t = 0
  double p = 2.0;
  int max_iter = 12;
  double tol = 1e-10;       // relative to ||v_1||_{Y(T)}
  double quad_tol = 5e-5;   // relative trapezoid error allowed on the first forced iterate
  bool check_box = true;
  bool keep_states = true;
};

struct PicardReport {
  int iterates = 0;             // applications of N[.] performed
  std::vector<double> y_diffs;  // ||v_{j+1} - v_j||_{Y(T)}, starting from v_0 = 0
  std::vector<double> ratios;   // y_diffs[j+1] / y_diffs[j]
  bool converged = false;
  double quadrature_error = 0.0;  // relative, from time-grid doubling
  double y_norm_linear = 0.0;     // ||v_1||_{Y(T)}
};

struct PicardResult {
  Trajectory trajectory;
  PicardReport report;
  std::vector<SpectralField> u_hat;  // final iterate at each node
  std::vector<SpectralField> v_hat;
  std::vector<SpectralField> first_iterate_v;  // v_1 (linear solution) at each node
};

namespace picard_detail {

/// Y(T) distance between two node-indexed spectral trajectories.
inline double y_distance(const std::vector<SpectralField>& a, const std::vector<SpectralField>& b,
                         const std::vector<double>& times) {
  double best = 0.0;
  const Grid& g = *a.front().grid;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a[k].coeffs.size(); ++i) acc += g.hermitian_weight(i) * std::norm(a[k].coeffs[i] - b[k].coeffs[i]);
    best = std::max(best, (1.0 + times[k]) * std::sqrt(g.volume() * acc));
  }
  return best;
}

}  // namespace picard_detail

/// Successive approximation on a uniform grid of `nodes` times in [0, T].
/// The Duhamel integrals use the composite trapezoid rule; for u the
/// endpoint weight at tau = t vanishes because K(0) = 0.
inline PicardResult picard_solve(const State& state0, const AdmissibleParams& params, const PicardConfig& cfg) {
  require_same_grid(state0);
  if (cfg.nodes < 2) throw std::invalid_argument("picard time grid needs at least two nodes");
  if (!(cfg.T > 0.0)) throw std::invalid_argument("picard final time must be positive");
  if (cfg.max_iter < 1) throw std::invalid_argument("picard max_iter must be positive");
  if (std::abs(cfg.p - params.p) > 1e-15) throw std::invalid_argument("picard exponent differs from parameter record");
  if (cfg.check_box) check_box_clearance(state0, cfg.T);

  const GridPtr grid = state0.u.grid;
  const Grid& g = *grid;
  const auto fsq = g.freq_sq();
  const std::size_t S = fsq.size();
  const int K = cfg.nodes - 1;
  const double h = cfg.T / K;
  std::vector<double> times(cfg.nodes);
  for (int k = 0; k <= K; ++k) times[k] = h * k;

  // Kernel tables indexed by lag m: K(m h) and K_t(m h).
  std::vector<double> ktab(static_cast<std::size_t>(cfg.nodes) * S), kttab(ktab.size());
  for (int m = 0; m <= K; ++m) {
    for (std::size_t i = 0; i < S; ++i) {
      const auto d = kernel::damped(times[m], fsq[i]);
      ktab[m * S + i] = d.s;
      kttab[m * S + i] = d.c - 0.5 * d.s;
    }
  }

  const auto U0 = to_spectral(state0.u);
  const auto V0 = to_spectral(state0.v);
  std::vector<SpectralField> u_lin(cfg.nodes, SpectralField(grid)), v_lin(cfg.nodes, SpectralField(grid));
  for (int k = 0; k <= K; ++k) {
    const LinearPropagator prop(g, times[k]);
    u_lin[k].coeffs = U0.coeffs;
    v_lin[k].coeffs = V0.coeffs;
    prop.apply(u_lin[k].coeffs, v_lin[k].coeffs);
  }

  const Dealiaser dealias(g);
  PicardResult res;
  PicardReport& rep = res.report;
  std::vector<SpectralField> u_cur(cfg.nodes, SpectralField(grid)), v_cur(cfg.nodes, SpectralField(grid));
  std::vector<SpectralField> forcing(cfg.nodes, SpectralField(grid));
  std::vector<Complex> acc_u(S), acc_v(S);

  for (int j = 1; j <= cfg.max_iter; ++j) {
    // v_cur holds v_{j-1}; v_0 = 0 so the first application yields u_lin.
    std::vector<SpectralField> u_next = u_lin, v_next = v_lin;
    if (j > 1) {
      for (int k = 0; k <= K; ++k) dealias.apply(v_cur[k].coeffs, cfg.p, forcing[k].coeffs);
      for (int k = 1; k <= K; ++k) {
        std::fill(acc_u.begin(), acc_u.end(), Complex{});
        std::fill(acc_v.begin(), acc_v.end(), Complex{});
        for (int i = 0; i <= k; ++i) {
          const double wq = (i == 0 || i == k) ? 0.5 * h : h;
          const double* kt = &ktab[static_cast<std::size_t>(k - i) * S];
          const double* ktt = &kttab[static_cast<std::size_t>(k - i) * S];
          const Complex* f = forcing[i].coeffs.data();
          for (std::size_t s = 0; s < S; ++s) {
            acc_u[s] += (wq * kt[s]) * f[s];
            acc_v[s] += (wq * ktt[s]) * f[s];
          }
        }
        for (std::size_t s = 0; s < S; ++s) {
          u_next[k].coeffs[s] += acc_u[s];
          v_next[k].coeffs[s] += acc_v[s];
        }
      }
    }
    if (j == 2) {
      // Trapezoid error at T estimated by halving the time step; midpoint
      // values of the linear solution are exact.
      const int k = K;
      std::fill(acc_v.begin(), acc_v.end(), Complex{});
      std::vector<Complex> f_mid(S), coarse(S);
      for (std::size_t s = 0; s < S; ++s) coarse[s] = v_next[k].coeffs[s] - v_lin[k].coeffs[s];
      for (int i = 0; i <= 2 * K; ++i) {
        const double tau = 0.5 * h * i;
        const double wq = (i == 0 || i == 2 * K) ? 0.25 * h : 0.5 * h;
        if (i % 2 == 0) {
          std::copy(forcing[i / 2].coeffs.begin(), forcing[i / 2].coeffs.end(), f_mid.begin());
        } else {
          const LinearPropagator prop(g, tau);
          std::vector<Complex> uu = U0.coeffs, vv = V0.coeffs;
          prop.apply(uu, vv);
          dealias.apply(vv, cfg.p, f_mid);
        }
        for (std::size_t s = 0; s < S; ++s) {
          acc_v[s] += wq * kernel::k_hat_dt(cfg.T - tau, fsq[s]) * f_mid[s];
        }
      }
      double num = 0.0;
      for (std::size_t s = 0; s < S; ++s) num += g.hermitian_weight(s) * std::norm(acc_v[s] - coarse[s]);
      const double lin = rep.y_norm_linear > 0.0 ? rep.y_norm_linear : 1.0;
      rep.quadrature_error = (1.0 + cfg.T) * std::sqrt(g.volume() * num) / lin;
      if (rep.quadrature_error > cfg.quad_tol) {
        throw std::invalid_argument("picard time grid too coarse: relative trapezoid error " +
                                    std::to_string(rep.quadrature_error) + " exceeds " + std::to_string(cfg.quad_tol));
      }
    }
    const double diff = picard_detail::y_distance(v_next, v_cur, times);
    rep.y_diffs.push_back(diff);
    if (rep.y_diffs.size() >= 2) rep.ratios.push_back(diff / rep.y_diffs[rep.y_diffs.size() - 2]);
    rep.iterates = j;
    if (j == 1) {
      rep.y_norm_linear = diff;
      res.first_iterate_v = v_next;
    }
    u_cur = std::move(u_next);
    v_cur = std::move(v_next);
    if (!std::isfinite(diff)) break;
    if (j > 1 && diff <= cfg.tol * rep.y_norm_linear) {
      rep.converged = true;
      break;
    }
    if (rep.y_norm_linear == 0.0) {
      rep.converged = true;
      break;
    }
  }

  Trajectory& traj = res.trajectory;
  traj.params = params;
  const SpaceWeights w = weights_for(params);
  for (int k = 0; k <= K; ++k) {
    traj.records.push_back(measure(times[k], u_cur[k], v_cur[k], w));
    if (cfg.keep_states) traj.snapshots.push_back({times[k], State{to_physical(u_cur[k]), to_physical(v_cur[k]), times[k]}});
  }
  res.u_hat = std::move(u_cur);
  res.v_hat = std::move(v_cur);
  return res;
}

}  // namespace dwlab
