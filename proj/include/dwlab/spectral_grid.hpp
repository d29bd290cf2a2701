#pragma once

// Periodic box [-L, L)^n with an FFTW-backed real-to-complex transform.
//
// Spectral coefficients use the half-complex layout produced by FFTW's r2c
// transforms: in 1D there are N/2+1 entries, in 2D there are N rows of
// N/2+1 entries (the last axis is halved). Coefficients are normalized so
// that f(x) = sum_k c_k exp(i xi_k (x + L)), i.e. c_k = (1/N^n) DFT(f)_k.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dwlab {

using Complex = std::complex<double>;

class Grid {
 public:
  Grid(int dim, int points_per_axis, double half_length)
      : dim_(dim), points_(points_per_axis), half_length_(half_length) {
    if (dim != 1 && dim != 2) {
      throw std::invalid_argument("grid dimension must be 1 or 2, got " + std::to_string(dim));
    }
    if (points_per_axis < 8 || (points_per_axis & (points_per_axis - 1)) != 0) {
      throw std::invalid_argument("points per axis must be a power of two >= 8, got " +
                                  std::to_string(points_per_axis));
    }
    if (!(half_length > 0.0) || !std::isfinite(half_length)) {
      throw std::invalid_argument("half length must be positive and finite");
    }
    // Power-of-two division is exact, so spacing * N == 2L holds bit-for-bit.
    spacing_ = 2.0 * half_length_ / points_;
    const double dk = std::numbers::pi / half_length_;
    const int cols = points_ / 2 + 1;
    if (dim_ == 1) {
      freq_sq_.resize(cols);
      for (int k = 0; k < cols; ++k) freq_sq_[k] = (k * dk) * (k * dk);
    } else {
      freq_sq_.resize(static_cast<std::size_t>(points_) * cols);
      for (int r = 0; r < points_; ++r) {
        const double kr = wavenumber(r);
        for (int c = 0; c < cols; ++c) {
          const double kc = c * dk;
          freq_sq_[static_cast<std::size_t>(r) * cols + c] = kr * kr + kc * kc;
        }
      }
    }
  }

  int dim() const { return dim_; }
  int points_per_axis() const { return points_; }
  double half_length() const { return half_length_; }
  double spacing() const { return spacing_; }

  /// Box volume (2L)^n.
  double volume() const { return std::pow(2.0 * half_length_, dim_); }
  /// Quadrature weight spacing^n.
  double cell_volume() const { return std::pow(spacing_, dim_); }

  std::size_t node_count() const {
    return dim_ == 1 ? static_cast<std::size_t>(points_)
                     : static_cast<std::size_t>(points_) * points_;
  }
  std::size_t spectral_count() const { return freq_sq_.size(); }
  /// Length of the halved (last) axis of the spectral layout.
  int spectral_cols() const { return points_ / 2 + 1; }

  /// Angular frequency of full-axis FFT index i (0 <= i < N), following the
  /// convention k in {-N/2, ..., N/2-1}.
  double wavenumber(int i) const {
    const int k = i < points_ / 2 ? i : i - points_;
    return k * std::numbers::pi / half_length_;
  }

  /// Physical coordinate of node index i along an axis.
  double coordinate(int i) const { return -half_length_ + i * spacing_; }

  /// |xi|^2 on the half-complex spectral layout.
  std::span<const double> freq_sq() const { return freq_sq_; }

  /// Multiplicity of each half-layout entry in the full lattice (1 or 2).
  double hermitian_weight(std::size_t index) const {
    const int c = static_cast<int>(index % spectral_cols());
    return (c == 0 || c == points_ / 2) ? 1.0 : 2.0;
  }

  /// Euclidean distance of node `index` from the origin.
  double node_radius(std::size_t index) const {
    if (dim_ == 1) return std::abs(coordinate(static_cast<int>(index)));
    const double x = coordinate(static_cast<int>(index / points_));
    const double y = coordinate(static_cast<int>(index % points_));
    return std::hypot(x, y);
  }

  bool same_shape(const Grid& other) const {
    return dim_ == other.dim_ && points_ == other.points_ && half_length_ == other.half_length_;
  }

 private:
  int dim_;
  int points_;
  double half_length_;
  double spacing_ = 0.0;
  std::vector<double> freq_sq_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(int dim, int points_per_axis, double half_length) {
  return std::make_shared<const Grid>(dim, points_per_axis, half_length);
}

struct Field {
  GridPtr grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(GridPtr g) : grid(std::move(g)), values(grid->node_count(), 0.0) {}
  Field(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid->node_count()) {
      throw std::invalid_argument("field value count does not match grid node count");
    }
  }

  bool is_finite() const {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : values) m = std::max(m, std::abs(x));
    return m;
  }
};

struct SpectralField {
  GridPtr grid;
  std::vector<Complex> coeffs;

  SpectralField() = default;
  explicit SpectralField(GridPtr g) : grid(std::move(g)), coeffs(grid->spectral_count()) {}
};

/// Sample a function of the node coordinates onto the grid.
inline Field sample(const GridPtr& grid, const std::function<double(double)>& f1d) {
  if (grid->dim() != 1) throw std::invalid_argument("1D sampler used on a 2D grid");
  Field out(grid);
  for (int i = 0; i < grid->points_per_axis(); ++i) out.values[i] = f1d(grid->coordinate(i));
  return out;
}

inline Field sample(const GridPtr& grid, const std::function<double(double, double)>& f2d) {
  if (grid->dim() != 2) throw std::invalid_argument("2D sampler used on a 1D grid");
  Field out(grid);
  const int n = grid->points_per_axis();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.values[static_cast<std::size_t>(i) * n + j] = f2d(grid->coordinate(i), grid->coordinate(j));
  return out;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Owns FFTW buffers and plans for one (dim, N) shape. Planning goes through
// a global mutex because the FFTW planner is not thread-safe.
class FftEngine {
 public:
  FftEngine(int dim, int n) : dim_(dim), n_(n) {
    real_count_ = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
    complex_count_ = dim == 1 ? static_cast<std::size_t>(n / 2 + 1)
                              : static_cast<std::size_t>(n) * (n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    real_ = fftw_alloc_real(real_count_);
    spec_ = fftw_alloc_complex(complex_count_);
    if (dim == 1) {
      forward_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
    } else {
      forward_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
    }
  }
  ~FftEngine() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  FftEngine(const FftEngine&) = delete;
  FftEngine& operator=(const FftEngine&) = delete;

  std::span<double> real() { return {real_, real_count_}; }
  std::span<Complex> spectrum() {
    return {reinterpret_cast<Complex*>(spec_), complex_count_};
  }

  /// real() -> spectrum(), normalized by 1/N^n.
  void forward() {
    fftw_execute(forward_);
    const double scale = 1.0 / static_cast<double>(real_count_);
    for (auto& c : spectrum()) c *= scale;
  }
  /// spectrum() -> real(); destroys spectrum().
  void backward() { fftw_execute(backward_); }

 private:
  int dim_;
  int n_;
  std::size_t real_count_ = 0;
  std::size_t complex_count_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Per-thread engine cache, so concurrent runs never share buffers.
inline FftEngine& engine_for(int dim, int n) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<FftEngine>> cache;
  auto& slot = cache[{dim, n}];
  if (!slot) slot = std::make_unique<FftEngine>(dim, n);
  return *slot;
}

inline FftEngine& engine_for(const Grid& g) { return engine_for(g.dim(), g.points_per_axis()); }

}  // namespace detail

/// Largest deviation from Hermitian symmetry among the self-conjugate
/// entries of the half layout (columns 0 and N/2).
inline double hermitian_defect(const Grid& g, std::span<const Complex> c) {
  const int n = g.points_per_axis();
  double defect = 0.0;
  if (g.dim() == 1) {
    defect = std::max(std::abs(c[0].imag()), std::abs(c[n / 2].imag()));
    return defect;
  }
  const int cols = g.spectral_cols();
  for (int col : {0, n / 2}) {
    for (int r = 0; r < n; ++r) {
      const int rr = (n - r) % n;
      const Complex a = c[static_cast<std::size_t>(r) * cols + col];
      const Complex b = c[static_cast<std::size_t>(rr) * cols + col];
      defect = std::max(defect, std::abs(a - std::conj(b)));
    }
  }
  return defect;
}

/// Replace conjugate pairs on the self-conjugate columns by their average.
inline void project_hermitian(const Grid& g, std::span<Complex> c) {
  const int n = g.points_per_axis();
  if (g.dim() == 1) {
    c[0] = c[0].real();
    c[n / 2] = c[n / 2].real();
    return;
  }
  const int cols = g.spectral_cols();
  for (int col : {0, n / 2}) {
    for (int r = 0; r <= n / 2; ++r) {
      const int rr = (n - r) % n;
      Complex& a = c[static_cast<std::size_t>(r) * cols + col];
      Complex& b = c[static_cast<std::size_t>(rr) * cols + col];
      const Complex avg = 0.5 * (a + std::conj(b));
      a = avg;
      b = std::conj(avg);
    }
  }
}

inline void project_hermitian(SpectralField& f) { project_hermitian(*f.grid, f.coeffs); }

inline SpectralField to_spectral(const Field& f) {
  if (!f.is_finite()) throw std::domain_error("to_spectral: field has non-finite values");
  auto& eng = detail::engine_for(*f.grid);
  std::copy(f.values.begin(), f.values.end(), eng.real().begin());
  eng.forward();
  SpectralField out(f.grid);
  std::copy(eng.spectrum().begin(), eng.spectrum().end(), out.coeffs.begin());
  return out;
}

/// Inverse transform. Rounding-level asymmetry on the self-conjugate columns
/// is projected away; anything larger is reported as corrupted data.
inline Field to_physical(const SpectralField& F) {
  const Grid& g = *F.grid;
  double scale = 0.0;
  for (const auto& c : F.coeffs) scale = std::max(scale, std::abs(c));
  const double defect = hermitian_defect(g, F.coeffs);
  if (defect > 1e-9 * scale) {
    throw std::domain_error("to_physical: spectral data violates Hermitian symmetry (defect " +
                            std::to_string(defect) + ")");
  }
  auto& eng = detail::engine_for(g);
  auto spec = eng.spectrum();
  std::copy(F.coeffs.begin(), F.coeffs.end(), spec.begin());
  project_hermitian(g, spec);
  eng.backward();
  Field out(F.grid);
  std::copy(eng.real().begin(), eng.real().end(), out.values.begin());
  return out;
}

using Symbol = std::function<double(double)>;

/// Multiply every coefficient by symbol(|xi|^2).
inline SpectralField apply_symbol(const SpectralField& F, const Symbol& symbol) {
  SpectralField out(F.grid);
  const auto fsq = F.grid->freq_sq();
  for (std::size_t i = 0; i < fsq.size(); ++i) {
    const double m = symbol(fsq[i]);
    if (!std::isfinite(m)) {
      throw std::domain_error("apply_symbol: symbol is not finite at |xi|^2 = " +
                              std::to_string(fsq[i]));
    }
    out.coeffs[i] = m * F.coeffs[i];
  }
  return out;
}

/// |xi|^s with |0|^s := 0 for s > 0; negative orders are undefined at 0.
inline Symbol homogeneous_symbol(double s) {
  return [s](double xi_sq) {
    if (s == 0.0) return 1.0;
    if (xi_sq == 0.0) {
      if (s > 0.0) return 0.0;
      throw std::domain_error("|xi|^s with s < 0 is undefined at xi = 0");
    }
    return std::pow(xi_sq, 0.5 * s);
  };
}

/// Japanese bracket <xi>^s = (1 + |xi|^2)^{s/2}.
inline Symbol bracket_symbol(double s) {
  return [s](double xi_sq) { return std::pow(1.0 + xi_sq, 0.5 * s); };
}

/// sqrt((2L)^n sum |c|^2) over the full lattice; equals the grid L^2 norm.
inline double spectral_l2_norm(const SpectralField& F) {
  const Grid& g = *F.grid;
  double acc = 0.0;
  for (std::size_t i = 0; i < F.coeffs.size(); ++i) acc += g.hermitian_weight(i) * std::norm(F.coeffs[i]);
  return std::sqrt(g.volume() * acc);
}

}  // namespace dwlab
