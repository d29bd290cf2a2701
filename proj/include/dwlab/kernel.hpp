#pragma once

// Fourier symbol of the linear damped-wave kernel and its time derivatives.
//
// With z = 1/4 - |xi|^2 the symbol is e^{-t/2} S(t, z) where
//   S = sinh(t sqrt z)/sqrt z   (z > 0)
//   S = sin(t sqrt -z)/sqrt -z  (z < 0)
//   S = t                       (z = 0)
// and C = dS/dt is the matching cosh/cos. Products e^{-t/2} sinh and
// e^{-t/2} cosh are always formed from exponentials of t(sqrt z -/+ 1/2),
// both nonpositive since sqrt z <= 1/2, so nothing overflows for large t.

#include <cmath>
#include <stdexcept>
#include <string>

namespace dwlab::kernel {

/// Below this value of t^2 |z| the removable singularity at |xi| = 1/2 is
/// handled with a truncated Taylor series in z.
inline constexpr double kSeriesThreshold = 1e-4;

/// e^{-t/2} S and e^{-t/2} C evaluated together.
struct DampedPair {
  double s;  // e^{-t/2} S(t, z)
  double c;  // e^{-t/2} C(t, z)
};

inline void check_args(double t, double xi_sq) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw std::domain_error("kernel time must be finite and nonnegative, got " + std::to_string(t));
  }
  if (!(xi_sq >= 0.0)) throw std::domain_error("|xi|^2 must be nonnegative");
}

/// Taylor branch near z = 0 (four terms each).
inline DampedPair damped_series(double t, double z) {
  const double x = t * t * z;
  const double damp = std::exp(-0.5 * t);
  const double s = t * (1.0 + x / 6.0 + x * x / 120.0 + x * x * x / 5040.0);
  const double c = 1.0 + x / 2.0 + x * x / 24.0 + x * x * x / 720.0;
  return {damp * s, damp * c};
}

/// Closed-form branches (sinh/cosh for z > 0, sin/cos for z < 0).
inline DampedPair damped_closed(double t, double z) {
  if (z > 0.0) {
    const double root = std::sqrt(z);
    const double a = t * root;
    // e^{-t/2} sinh a = e^{a - t/2} (1 - e^{-2a}) / 2, with expm1 for accuracy at small a.
    const double lead = std::exp(a - 0.5 * t);
    const double tail = std::expm1(-2.0 * a);
    return {-0.5 * lead * tail / root, 0.5 * lead * (2.0 + tail)};
  }
  const double omega = std::sqrt(-z);
  const double damp = std::exp(-0.5 * t);
  return {damp * std::sin(t * omega) / omega, damp * std::cos(t * omega)};
}

inline DampedPair damped(double t, double xi_sq) {
  const double z = 0.25 - xi_sq;
  if (t * t * std::abs(z) < kSeriesThreshold) return damped_series(t, z);
  return damped_closed(t, z);
}

/// K(t, xi).
inline double k_hat(double t, double xi_sq) {
  check_args(t, xi_sq);
  return damped(t, xi_sq).s;
}

/// dK/dt = e^{-t/2} (C - S/2).
inline double k_hat_dt(double t, double xi_sq) {
  check_args(t, xi_sq);
  const auto d = damped(t, xi_sq);
  return d.c - 0.5 * d.s;
}

/// d^2K/dt^2 through the governing identity K_tt = -K_t - |xi|^2 K.
inline double k_hat_dtt(double t, double xi_sq) {
  check_args(t, xi_sq);
  const auto d = damped(t, xi_sq);
  return -(d.c - 0.5 * d.s) - xi_sq * d.s;
}

/// d^2K/dt^2 by differentiating k_hat_dt directly, using dS/dt = C and
/// dC/dt = z S: e^{-t/2} ((1/2 - |xi|^2) S - C). Independent of the identity
/// used by k_hat_dtt, so the residual K_tt + K_t + |xi|^2 K is a real check.
inline double k_hat_dtt_direct(double t, double xi_sq) {
  check_args(t, xi_sq);
  const auto d = damped(t, xi_sq);
  return (0.5 - xi_sq) * d.s - d.c;
}

/// All three symbols at one (t, xi) point.
struct KernelValues {
  double k;
  double k_t;
  double k_tt;
};

inline KernelValues evaluate(double t, double xi_sq) {
  check_args(t, xi_sq);
  const auto d = damped(t, xi_sq);
  const double kt = d.c - 0.5 * d.s;
  return {d.s, kt, -kt - xi_sq * d.s};
}

// ---------------------------------------------------------------------------
// Frequency cut-offs.

struct CutoffSpec {
  double eps_star = 0.25;

  explicit CutoffSpec(double eps = 0.25) : eps_star(eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps_star must be positive");
  }
};

/// Quintic smoothstep 6x^5 - 15x^4 + 10x^3 on [0, 1].
inline double smoothstep5(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
}

/// chi_L: 1 on [0, eps/2], 0 on [eps, inf), smoothstep transition in between.
inline double chi_low(double r, const CutoffSpec& spec = CutoffSpec{}) {
  const double theta = (r - 0.5 * spec.eps_star) / (0.5 * spec.eps_star);
  return 1.0 - smoothstep5(theta);
}

inline double chi_high(double r, const CutoffSpec& spec = CutoffSpec{}) {
  return 1.0 - chi_low(r, spec);
}

}  // namespace dwlab::kernel
