#pragma once

// Exponent bookkeeping for small-data global existence of
//   u_tt - Delta u + u_t = |u_t|^p.
//
// derive_params fills every auxiliary exponent from (n, p) and optional
// overrides, then runs validate(); only passing records are returned.
// assemble_params does the same arithmetic without validation so that
// deliberately broken records can be inspected.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dwlab {

class AdmissibilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AdmissibleParams {
  int n = 1;
  double p = 2.0;
  double alpha = 2.0;
  double beta_alpha = 0.0;
  double delta_alpha = 0.0;
  double s = 1.25;
  double kappa = 0.01;
  double r1 = 0.0;
  double r2 = 0.0;
  double gamma = 0.0;
  double m = 0.0;
  double d = 0.0;
  double omega0_sigma1 = 0.0;
  double omega0_sigma_alpha = 0.0;
  double omega0_sigma2 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
  bool omega0_range_ok = false;
  bool omega1_ok = false;
  bool omega2_ok = false;
  std::optional<double> eps0;  // measured by the Picard experiment, never assumed

  /// Denominator shared by the interpolation exponents: 1/alpha - 1/2 + s/n.
  double gn_denominator() const { return 1.0 / alpha - 0.5 + s / n; }
  double omega0(double sigma) const { return (1.0 / alpha - 1.0 / (p * sigma)) / gn_denominator(); }
};

struct ParamOverrides {
  std::optional<double> s = std::nullopt;
  std::optional<double> kappa = std::nullopt;
  std::optional<double> inv_gamma = std::nullopt;  // 1/gamma
};

struct ValidationCheck {
  std::string name;       // the invariant, in words and symbols
  std::string condition;  // inequality satisfied by `slack` when the check passes
  double slack = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.pass) out.push_back(c.name);
    return out;
  }
  const ValidationCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace admissibility_detail {

inline bool in_closed_unit(double x) { return x >= -1e-14 && x <= 1.0 + 1e-14; }

inline double default_s(int n, double p) { return std::min(0.5 * (0.5 * n + p), 0.5 * n + 1.0); }

inline double default_inv_gamma(double p, double alpha) {
  return 0.5 * std::min(0.5, (p - 1.0) / alpha);
}

inline void check_dimension_and_p(int n, double p) {
  if (n >= 3) {
    throw AdmissibilityError("n = " + std::to_string(n) +
                             " is not supported: the small-data result needs p > max{1, n/2} and "
                             "this toolkit covers only n = 1, 2");
  }
  if (n < 1) throw AdmissibilityError("n must be 1 or 2");
  if (!(p > std::max(1.0, 0.5 * n))) {
    std::ostringstream os;
    os << "p <= max{1, n/2}: got n = " << n << ", p = " << p << "; need p > max{1, n/2}";
    throw AdmissibilityError(os.str());
  }
}

}  // namespace admissibility_detail

/// Largest kappa for which every kappa-dependent constraint holds.
inline double kappa_feasibility_bound(int n, double p, double alpha, double s) {
  const double beta = (n - 1) * (1.0 / alpha - 0.5);
  const double denom = 1.0 / alpha - 0.5 + s / n;
  return std::min({(p - 1.0) / alpha,        // omega1 >= 0
                   1.0 / alpha,              // 1/r2 > 0
                   p - 1.0,                  // r1 > 1
                   0.25 * n * (p - 1.0),     // d > 0
                   (p - 1.0) * (1.0 + 0.5 * n),  // third integrability condition
                   denom - beta / n});       // omega2 <= 1
}

/// Fill all derived fields from the primary choices, without validation.
inline AdmissibleParams assemble_params(int n, double p, double s, double kappa, double inv_gamma,
                                        std::optional<double> alpha_override = std::nullopt) {
  AdmissibleParams a;
  a.n = n;
  a.p = p;
  a.alpha = alpha_override.value_or(std::min(2.0, p));
  a.beta_alpha = (n - 1) * (1.0 / a.alpha - 0.5);
  a.delta_alpha = n * (1.0 / a.alpha - 0.5);
  a.s = s;
  a.kappa = kappa;
  a.r1 = (p - 1.0) / kappa;
  a.r2 = 1.0 / (1.0 / a.alpha - kappa);
  a.gamma = 1.0 / inv_gamma;
  a.m = 1.0 / (0.5 + inv_gamma);
  a.d = 0.5 * n - 2.0 * kappa / (p - 1.0);
  a.omega0_sigma1 = a.omega0(1.0);
  a.omega0_sigma_alpha = a.omega0(a.alpha);
  a.omega0_sigma2 = a.omega0(2.0);
  const double denom = a.gn_denominator();
  a.omega1 = (1.0 / a.alpha - 1.0 / a.r1) / denom;
  a.omega2 = (1.0 / a.alpha - 1.0 / a.r2 + a.beta_alpha / n) / denom;
  using admissibility_detail::in_closed_unit;
  a.omega0_range_ok = in_closed_unit(a.omega0_sigma1) && in_closed_unit(a.omega0_sigma_alpha) &&
                      in_closed_unit(a.omega0_sigma2);
  a.omega1_ok = in_closed_unit(a.omega1);
  a.omega2_ok = in_closed_unit(a.omega2);
  return a;
}

/// Check every invariant; failures become report entries, never exceptions.
inline ValidationReport validate(const AdmissibleParams& a) {
  using admissibility_detail::in_closed_unit;
  ValidationReport rep;
  auto add = [&rep](std::string name, std::string cond, double slack, bool pass) {
    rep.checks.push_back({std::move(name), std::move(cond), slack, pass});
  };
  constexpr double rel_tol = 1e-12;
  const double n = a.n;
  const double p = a.p;

  add("n in {1, 2}", "n in {1, 2}", n, a.n == 1 || a.n == 2);
  {
    const double slack = p - std::max(1.0, 0.5 * n);
    add("p > max{1, n/2}", "p - max{1, n/2} > 0", slack, slack > 0.0);
  }
  {
    const double slack = std::abs(a.alpha - std::min(2.0, p));
    add("alpha = min{2, p}", "|alpha - min{2, p}| ~ 0", slack, slack <= rel_tol);
  }
  {
    const double slack = std::abs(a.beta_alpha - (n - 1.0) * (1.0 / a.alpha - 0.5));
    add("beta_alpha = (n-1)(1/alpha - 1/2)", "|difference| ~ 0", slack, slack <= rel_tol);
  }
  {
    const double slack = std::abs(a.delta_alpha - n * (1.0 / a.alpha - 0.5));
    add("delta_alpha = n(1/alpha - 1/2)", "|difference| ~ 0", slack, slack <= rel_tol);
  }
  {
    const double slack = std::min(a.s - 0.5 * n, p - a.s);
    add("s in (n/2, p)", "min{s - n/2, p - s} > 0", slack, slack > 0.0);
  }
  add("kappa > 0", "kappa > 0", a.kappa, a.kappa > 0.0);
  {
    const double inv_r1 = 1.0 / a.r1;
    const bool rel = std::abs(inv_r1 - a.kappa / (p - 1.0)) <= rel_tol * std::max(1.0, inv_r1);
    const double slack = 1.0 - inv_r1;
    add("1/r1 = kappa/(p-1) with r1 > 1", "1 - 1/r1 > 0", slack, rel && a.r1 > 1.0 && slack > 0.0);
  }
  {
    const double inv_r2 = 1.0 / a.r2;
    const bool rel = std::abs(inv_r2 - (1.0 / a.alpha - a.kappa)) <= rel_tol * std::max(1.0, std::abs(inv_r2));
    const double slack = std::min(inv_r2, 1.0 - inv_r2);
    add("1/r2 = 1/alpha - kappa with r2 > 1", "min{1/r2, 1 - 1/r2} > 0", slack,
        rel && std::isfinite(a.r2) && slack > 0.0);
  }
  {
    const double slack = std::abs(1.0 / a.alpha - ((p - 1.0) / a.r1 + 1.0 / a.r2));
    add("1/alpha = (p-1)/r1 + 1/r2", "|difference| ~ 0", slack, slack <= 1e-10);
  }
  const double denom = a.gn_denominator();
  const std::pair<const char*, double> sigmas[] = {{"1", 1.0}, {"alpha", a.alpha}, {"2", 2.0}};
  for (const auto& [label, sigma] : sigmas) {
    const double w = (1.0 / a.alpha - 1.0 / (p * sigma)) / denom;
    add(std::string("omega0(sigma = ") + label + ") in [0, 1]", "min{w, 1 - w} >= 0", std::min(w, 1.0 - w), in_closed_unit(w));
  }
  {
    const double w = (1.0 / a.alpha - 1.0 / a.r1) / denom;
    add("omega1 in [0, 1]", "min{w, 1 - w} >= 0", std::min(w, 1.0 - w), in_closed_unit(w));
  }
  {
    const double w = (1.0 / a.alpha - 1.0 / a.r2 + a.beta_alpha / n) / denom;
    add("omega2 in [0, 1]", "min{w, 1 - w} >= 0", std::min(w, 1.0 - w), in_closed_unit(w));
  }
  {
    const double ig = 1.0 / a.gamma;
    const double slack = std::min(ig, std::min(0.5, (p - 1.0) / a.alpha) - ig);
    add("1/gamma in (0, min{1/2, (p-1)/alpha})", "min{1/gamma, bound - 1/gamma} > 0", slack, slack > 0.0);
  }
  {
    const bool rel = std::abs(1.0 / a.m - (0.5 + 1.0 / a.gamma)) <= rel_tol;
    const double slack = std::min(a.m - 1.0, 2.0 - a.m);
    add("1/m = 1/2 + 1/gamma with m in (1, 2)", "min{m - 1, 2 - m} > 0", slack, rel && slack > 0.0);
  }
  {
    const double w = (1.0 / a.alpha - 1.0 / (a.gamma * (p - 1.0))) / denom;
    add("L^{gamma(p-1)} interpolation exponent in [0, 1]", "min{w, 1 - w} >= 0", std::min(w, 1.0 - w),
        in_closed_unit(w));
  }
  {
    const bool rel = std::abs(a.d - (0.5 * n - 2.0 * a.kappa / (p - 1.0))) <= rel_tol * std::max(1.0, std::abs(a.d));
    const double slack = std::min(a.d, 0.5 * n - a.d);
    add("d = n/2 - 2kappa/(p-1) in (0, n/2)", "min{d, n/2 - d} > 0", slack, rel && slack > 0.0);
  }
  {
    const double slack = p - std::ceil(a.beta_alpha - 1e-14);
    add("p > ceil(beta_alpha)", "p - ceil(beta_alpha) > 0", slack, slack > 0.0);
  }
  {
    const double v = -p - 0.5 * n * (p - 1.0) + 1.0;
    add("-p - (n/2)(p-1) < -1", "-p - (n/2)(p-1) + 1 < 0", v, v < 0.0);
  }
  {
    const double v = -p - 0.5 * n * (p - 1.0 / a.m - 0.5) + 1.0;
    add("-p - (n/2)(p - 1/m - 1/2) < -1", "-p - (n/2)(p - 1/m - 1/2) + 1 < 0", v, v < 0.0);
  }
  {
    const double v = -p - 0.5 * n * (p - 1.0) + a.kappa + 1.0;
    add("-p - (n/2)(p-1) + kappa < -1", "-p - (n/2)(p-1) + kappa + 1 < 0", v, v < 0.0);
  }
  return rep;
}

/// Default-filled, validated parameter record. Throws AdmissibilityError on
/// out-of-range (n, p) or when overrides break an invariant.
inline AdmissibleParams derive_params(int n, double p, const ParamOverrides& overrides = {}) {
  admissibility_detail::check_dimension_and_p(n, p);
  const double alpha = std::min(2.0, p);
  const double s = overrides.s.value_or(admissibility_detail::default_s(n, p));
  const double kappa =
      overrides.kappa.value_or(std::min(0.01, 0.5 * kappa_feasibility_bound(n, p, alpha, s)));
  const double inv_gamma = overrides.inv_gamma.value_or(admissibility_detail::default_inv_gamma(p, alpha));
  auto params = assemble_params(n, p, s, kappa, inv_gamma);
  const auto report = validate(params);
  if (!report.ok()) {
    std::string msg = "parameter record violates:";
    for (const auto& f : report.failures()) msg += " [" + f + "]";
    throw AdmissibilityError(msg);
  }
  return params;
}

/// Fixed-width text table of a validation report.
inline std::string format_report(const ValidationReport& rep) {
  std::ostringstream os;
  for (const auto& c : rep.checks) {
    os << (c.pass ? "PASS  " : "FAIL  ") << c.name;
    const int pad = 52 - static_cast<int>(c.name.size());
    os << std::string(pad > 1 ? pad : 1, ' ') << "slack " << c.slack << "   (" << c.condition << ")\n";
  }
  os << (rep.ok() ? "overall: PASS\n" : "overall: FAIL\n");
  return os.str();
}

inline std::string format_params(const AdmissibleParams& a) {
  std::ostringstream os;
  os.precision(10);
  os << "n            " << a.n << "\n"
     << "p            " << a.p << "\n"
     << "alpha        " << a.alpha << "\n"
     << "beta_alpha   " << a.beta_alpha << "\n"
     << "delta_alpha  " << a.delta_alpha << "\n"
     << "s            " << a.s << "\n"
     << "kappa        " << a.kappa << "\n"
     << "r1           " << a.r1 << "\n"
     << "r2           " << a.r2 << "\n"
     << "gamma        " << a.gamma << "\n"
     << "m            " << a.m << "\n"
     << "d            " << a.d << "\n"
     << "omega0(1)    " << a.omega0_sigma1 << "\n"
     << "omega0(alpha)" << " " << a.omega0_sigma_alpha << "\n"
     << "omega0(2)    " << a.omega0_sigma2 << "\n"
     << "omega1       " << a.omega1 << "\n"
     << "omega2       " << a.omega2 << "\n"
     << "eps0         " << (a.eps0 ? std::to_string(*a.eps0) : std::string("(not measured)")) << "\n";
  return os.str();
}

}  // namespace dwlab
