#pragma once

// Grid norms: L^q, Sobolev potential norms, and the time-weighted X(T) and
// Y(T) trajectory norms.
//
// For r = 2 the Sobolev norms are exact discrete Plancherel sums. For r != 2
// the norm is the L^r quadrature of the multiplier image, a surrogate for the
// continuum potential-space norm.

#include <dwlab/spectral_grid.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace dwlab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rectangle-rule (sum |f|^q h^n)^{1/q}; grid max for q = inf.
inline double lp_norm(std::span<const double> values, double cell_volume, double q) {
  if (!(q >= 1.0)) throw std::invalid_argument("lp_norm: exponent must be >= 1");
  double m = 0.0;
  for (double x : values) m = std::max(m, std::abs(x));
  if (std::isinf(q) || m == 0.0) return m;
  // Scale by the max so large q cannot overflow.
  double acc = 0.0;
  if (q == 2.0) {
    for (double x : values) {
      const double y = x / m;
      acc += y * y;
    }
  } else if (q == 1.0) {
    for (double x : values) acc += std::abs(x);
    return acc * cell_volume;
  } else {
    for (double x : values) acc += std::pow(std::abs(x) / m, q);
  }
  return m * std::pow(acc * cell_volume, 1.0 / q);
}

inline double lp_norm(const Field& f, double q) {
  return lp_norm(f.values, f.grid->cell_volume(), q);
}

/// Spectral-side Sobolev norm for r = 2: sqrt((2L)^n sum w m(xi)^2 |c|^2).
inline double sobolev_l2_spectral(const SpectralField& F, double s, bool homogeneous) {
  const Grid& g = *F.grid;
  const auto fsq = g.freq_sq();
  const Symbol m = homogeneous ? homogeneous_symbol(s) : bracket_symbol(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < fsq.size(); ++i) {
    const double w = m(fsq[i]);
    acc += g.hermitian_weight(i) * w * w * std::norm(F.coeffs[i]);
  }
  return std::sqrt(g.volume() * acc);
}

/// Norm in \dot H^s_r (homogeneous) or H^s_r, s >= 0, 1 < r < inf.
inline double sobolev_norm(const SpectralField& F, double s, double r, bool homogeneous) {
  if (!(s >= 0.0)) throw std::invalid_argument("sobolev_norm: order must be nonnegative");
  if (!(r > 1.0) || std::isinf(r)) throw std::invalid_argument("sobolev_norm: r must lie in (1, inf)");
  if (r == 2.0) return sobolev_l2_spectral(F, s, homogeneous);
  const Field image = to_physical(apply_symbol(F, homogeneous ? homogeneous_symbol(s) : bracket_symbol(s)));
  return lp_norm(image, r);
}

inline double sobolev_norm(const Field& f, double s, double r, bool homogeneous) {
  return sobolev_norm(to_spectral(f), s, r, homogeneous);
}

/// Exponents of the X(T) weights.
struct SpaceWeights {
  double alpha = 2.0;
  double s = 1.0;
  int n = 1;

  double lalpha_exponent() const { return 0.5 * n * (1.0 - 1.0 / alpha) + 1.0; }
  double hs_exponent() const { return 0.25 * n + 1.0 + 0.5 * s; }
};

struct State {
  Field u;
  Field v;  // u_t
  double t = 0.0;
};

struct TrajectorySample {
  double t = 0.0;
  State state;
};

inline void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw std::invalid_argument(std::string(what) + ": empty trajectory");
}

/// One X(T) term at a single time: weighted L^alpha plus weighted \dot H^s.
inline double x_weighted(double t, const Field& v, const SpaceWeights& w) {
  return std::pow(1.0 + t, w.lalpha_exponent()) * lp_norm(v, w.alpha) +
         std::pow(1.0 + t, w.hs_exponent()) * sobolev_norm(v, w.s, 2.0, true);
}

/// sup over samples of the X(T) weighted norm of v.
inline double x_norm(std::span<const TrajectorySample> traj, const SpaceWeights& w) {
  require_nonempty(traj.size(), "x_norm");
  double best = 0.0;
  for (const auto& s : traj) best = std::max(best, x_weighted(s.t, s.state.v, w));
  return best;
}

/// sup over samples of (1+t) ||v||_{L^2}.
inline double y_norm(std::span<const TrajectorySample> traj) {
  require_nonempty(traj.size(), "y_norm");
  double best = 0.0;
  for (const auto& s : traj) best = std::max(best, (1.0 + s.t) * lp_norm(s.state.v, 2.0));
  return best;
}

}  // namespace dwlab
