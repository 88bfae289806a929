#pragma once

// Periodic Fourier representation of real mean-zero fields on [0,L]^2.
//
// A field is f(x) = sum_k c_k e_k(x) with e_k(x) = L^-1 exp(2 pi i k.x / L),
// so ||f||^2_{L2} = sum_k |c_k|^2. Coefficients live in an N x N table in FFT
// order; the retained set is k != 0 with |k_1|, |k_2| <= N/2 - 1 (the Nyquist
// row and column are kept at zero so Hermitian symmetry is representable).
// Products are evaluated on a padded M x M grid, M >= 3N/2, which is alias free
// for every product of two retained modes.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <new>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qg2l/errors.hpp"

namespace qg2l {

using Complex = std::complex<double>;

template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlignment = 64;

  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    std::size_t bytes = ((n * sizeof(T) + kAlignment - 1) / kAlignment) * kAlignment;
    void* p = std::aligned_alloc(kAlignment, std::max<std::size_t>(bytes, kAlignment));
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using RealBuffer = std::vector<double, AlignedAllocator<double>>;
using ComplexBuffer = std::vector<Complex, AlignedAllocator<Complex>>;

struct Wavevector {
  int k1 = 0;
  int k2 = 0;

  int norm_sq() const { return k1 * k1 + k2 * k2; }
  Wavevector operator-() const { return {-k1, -k2}; }
  friend bool operator==(const Wavevector&, const Wavevector&) = default;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline int wrap(int k, int p) { return k >= 0 ? k : k + p; }

}  // namespace detail

/// Square periodic grid with precomputed wavenumbers and FFTW plans.
///
/// Immutable after construction; the transform methods use FFTW's new-array
/// execute interface and are safe to call concurrently.
class SpectralGrid {
 public:
  /// `padded` = 0 selects the smallest even size >= 3N/2.
  SpectralGrid(int n, double length, int padded = 0) : n_(n), length_(length) {
    if (n < 16) throw ConfigError("grid size must be at least 16 modes per dimension");
    if (n % 2 != 0) throw ConfigError("grid size must be even");
    if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("domain length must be positive");
    if (padded == 0) {
      padded = (3 * n + 1) / 2;
      if (padded % 2 != 0) ++padded;
    }
    if (padded < (3 * n) / 2) throw ConfigError("padded grid smaller than the 3/2 rule");
    m_ = padded;

    const double two_pi_over_l = 2.0 * std::numbers::pi / length_;
    const std::size_t total = size();
    kx_.resize(total);
    ky_.resize(total);
    lambda_.resize(total);
    retained_mask_.assign(total, 0);
    for (int a = 0; a < n_; ++a) {
      for (int b = 0; b < n_; ++b) {
        const std::size_t idx = static_cast<std::size_t>(a) * n_ + b;
        const Wavevector k = wavevector(idx);
        kx_[idx] = two_pi_over_l * k.k1;
        ky_[idx] = two_pi_over_l * k.k2;
        lambda_[idx] = kx_[idx] * kx_[idx] + ky_[idx] * ky_[idx];
        const bool inside = std::abs(k.k1) <= max_mode() && std::abs(k.k2) <= max_mode();
        if (inside && !(k.k1 == 0 && k.k2 == 0)) {
          retained_mask_[idx] = 1;
          retained_.push_back(idx);
        }
      }
    }
    stored_ = retained_;
    stored_.push_back(0);

    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    plan_n_ = make_plans(n_);
    plan_m_ = make_plans(m_);
  }

  ~SpectralGrid() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_n_.forward);
    fftw_destroy_plan(plan_n_.inverse);
    fftw_destroy_plan(plan_m_.forward);
    fftw_destroy_plan(plan_m_.inverse);
  }

  SpectralGrid(const SpectralGrid&) = delete;
  SpectralGrid& operator=(const SpectralGrid&) = delete;

  static std::shared_ptr<const SpectralGrid> create(int n, double length, int padded = 0) {
    return std::make_shared<const SpectralGrid>(n, length, padded);
  }

  int n() const { return n_; }
  double length() const { return length_; }
  int padded_n() const { return m_; }
  /// Largest retained |k_i|.
  int max_mode() const { return n_ / 2 - 1; }
  /// Largest |k_i| representable without aliasing on the padded grid.
  int padded_cutoff() const { return m_ / 2; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_; }
  std::size_t physical_size() const { return size(); }
  std::size_t padded_size() const { return static_cast<std::size_t>(m_) * m_; }
  std::size_t padded_half_size() const { return static_cast<std::size_t>(m_) * (m_ / 2 + 1); }

  std::size_t index(int k1, int k2) const {
    return static_cast<std::size_t>(detail::wrap(k1, n_)) * n_ + detail::wrap(k2, n_);
  }
  std::size_t index(Wavevector k) const { return index(k.k1, k.k2); }

  Wavevector wavevector(std::size_t idx) const {
    const int a = static_cast<int>(idx / n_);
    const int b = static_cast<int>(idx % n_);
    return {a < n_ / 2 ? a : a - n_, b < n_ / 2 ? b : b - n_};
  }

  bool retained(int k1, int k2) const {
    if (std::abs(k1) > max_mode() || std::abs(k2) > max_mode()) return false;
    return retained_mask_[index(k1, k2)] != 0;
  }
  bool retained(Wavevector k) const { return retained(k.k1, k.k2); }
  bool retained(std::size_t idx) const { return retained_mask_[idx] != 0; }

  /// Retained indices (k != 0).
  const std::vector<std::size_t>& retained_indices() const { return retained_; }

  double kx(std::size_t idx) const { return kx_[idx]; }
  double ky(std::size_t idx) const { return ky_[idx]; }
  /// Laplacian eigenvalue (2 pi |k| / L)^2.
  double eigenvalue(std::size_t idx) const { return lambda_[idx]; }
  /// Smallest nonzero eigenvalue, (2 pi / L)^2.
  double lambda_min() const {
    const double w = 2.0 * std::numbers::pi / length_;
    return w * w;
  }

  /// Coefficients -> grid values f(x_j), x_j = j L / N.
  void to_physical(std::span<const Complex> coeffs, std::span<double> values) const {
    inverse(plan_n_, n_, coeffs, values);
  }
  void from_physical(std::span<const double> values, std::span<Complex> coeffs) const {
    forward(plan_n_, n_, values, coeffs);
  }
  /// Coefficients -> values on the padded M x M grid.
  void to_padded(std::span<const Complex> coeffs, std::span<double> values) const {
    inverse(plan_m_, m_, coeffs, values);
  }
  /// Padded values -> coefficients restricted to the retained modes plus the mean.
  void from_padded(std::span<const double> values, std::span<Complex> coeffs) const {
    forward(plan_m_, m_, values, coeffs);
  }

  /// Raw padded transforms on the half spectrum (k_2 >= 0), in e_k coefficients.
  void padded_r2c(std::span<const double> values, std::span<Complex> half) const {
    fftw_execute_dft_r2c(plan_m_.forward, const_cast<double*>(values.data()),
                         reinterpret_cast<fftw_complex*>(half.data()));
    const double scale = length_ / static_cast<double>(padded_size());
    for (auto& c : half) c *= scale;
  }
  void padded_c2r(std::span<const Complex> half, std::span<double> values) const {
    ComplexBuffer scratch(half.begin(), half.end());
    fftw_execute_dft_c2r(plan_m_.inverse, reinterpret_cast<fftw_complex*>(scratch.data()),
                         values.data());
    const double scale = 1.0 / length_;
    for (auto& v : values) v *= scale;
  }
  /// Wavevector of a padded half-spectrum slot.
  Wavevector padded_wavevector(std::size_t half_idx) const {
    const int hw = m_ / 2 + 1;
    const int a = static_cast<int>(half_idx / hw);
    const int b = static_cast<int>(half_idx % hw);
    return {a <= m_ / 2 ? a : a - m_, b};
  }

  /// Physical coordinate of the padded grid point (i, j) along one axis.
  double padded_coordinate(int i) const { return length_ * i / m_; }
  double coordinate(int i) const { return length_ * i / n_; }

 private:
  struct Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
  };

  static Plans make_plans(int p) {
    RealBuffer r(static_cast<std::size_t>(p) * p);
    ComplexBuffer c(static_cast<std::size_t>(p) * (p / 2 + 1));
    Plans plans;
    plans.forward = fftw_plan_dft_r2c_2d(p, p, r.data(), reinterpret_cast<fftw_complex*>(c.data()),
                                         FFTW_ESTIMATE);
    plans.inverse = fftw_plan_dft_c2r_2d(p, p, reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                                         FFTW_ESTIMATE);
    if (plans.forward == nullptr || plans.inverse == nullptr) {
      throw NumericalError("FFTW planning failed");
    }
    return plans;
  }

  void inverse(const Plans& plans, int p, std::span<const Complex> coeffs, std::span<double> values) const {
    const int hw = p / 2 + 1;
    ComplexBuffer half(static_cast<std::size_t>(p) * hw, Complex{0.0, 0.0});
    for (std::size_t idx : stored_) {
      const Wavevector k = wavevector(idx);
      if (k.k2 < 0) continue;
      half[static_cast<std::size_t>(detail::wrap(k.k1, p)) * hw + k.k2] = coeffs[idx];
    }
    fftw_execute_dft_c2r(plans.inverse, reinterpret_cast<fftw_complex*>(half.data()), values.data());
    const double scale = 1.0 / length_;
    for (auto& v : values) v *= scale;
  }

  void forward(const Plans& plans, int p, std::span<const double> values, std::span<Complex> coeffs) const {
    const int hw = p / 2 + 1;
    ComplexBuffer half(static_cast<std::size_t>(p) * hw);
    fftw_execute_dft_r2c(plans.forward, const_cast<double*>(values.data()),
                         reinterpret_cast<fftw_complex*>(half.data()));
    const double scale = length_ / (static_cast<double>(p) * p);
    std::fill(coeffs.begin(), coeffs.end(), Complex{0.0, 0.0});
    for (std::size_t idx : stored_) {
      const Wavevector k = wavevector(idx);
      if (k.k2 >= 0) {
        coeffs[idx] = scale * half[static_cast<std::size_t>(detail::wrap(k.k1, p)) * hw + k.k2];
      } else {
        coeffs[idx] = scale * std::conj(half[static_cast<std::size_t>(detail::wrap(-k.k1, p)) * hw - k.k2]);
      }
    }
  }

  int n_;
  int m_ = 0;
  double length_;
  std::vector<double> kx_, ky_, lambda_;
  std::vector<unsigned char> retained_mask_;
  std::vector<std::size_t> retained_;
  std::vector<std::size_t> stored_;
  Plans plan_n_, plan_m_;
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

inline bool same_grid(const SpectralGrid& a, const SpectralGrid& b) {
  return &a == &b || (a.n() == b.n() && a.length() == b.length() && a.padded_n() == b.padded_n());
}

/// Real scalar field stored by its Fourier coefficients.
class ScalarField {
 public:
  explicit ScalarField(GridPtr grid) : grid_(std::move(grid)), c_(grid_->size(), Complex{0.0, 0.0}) {}

  const SpectralGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }

  Complex& operator()(int k1, int k2) { return c_[grid_->index(k1, k2)]; }
  Complex operator()(int k1, int k2) const { return c_[grid_->index(k1, k2)]; }
  Complex& operator[](std::size_t idx) { return c_[idx]; }
  Complex operator[](std::size_t idx) const { return c_[idx]; }

  std::span<Complex> coefficients() { return c_; }
  std::span<const Complex> coefficients() const { return c_; }

  ScalarField& operator+=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  ScalarField& operator*=(double a) {
    for (auto& c : c_) c *= a;
    return *this;
  }
  /// this += a * o
  ScalarField& axpy(double a, const ScalarField& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += a * o.c_[i];
    return *this;
  }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }

  bool operator==(const ScalarField& o) const {
    return same_grid(*grid_, *o.grid_) && std::equal(c_.begin(), c_.end(), o.c_.begin());
  }

  void check(const ScalarField& o) const {
    if (!same_grid(*grid_, *o.grid_)) throw ConfigError("grid mismatch between fields");
  }

 private:
  GridPtr grid_;
  ComplexBuffer c_;
};

/// Pair of fields on one grid: the two fluid layers.
class LayeredField {
 public:
  explicit LayeredField(const GridPtr& grid) : layers_{ScalarField(grid), ScalarField(grid)} {}
  LayeredField(ScalarField upper, ScalarField lower) : layers_{std::move(upper), std::move(lower)} {
    layers_[0].check(layers_[1]);
  }

  ScalarField& operator[](int j) { return layers_[static_cast<std::size_t>(j)]; }
  const ScalarField& operator[](int j) const { return layers_[static_cast<std::size_t>(j)]; }
  const SpectralGrid& grid() const { return layers_[0].grid(); }
  const GridPtr& grid_ptr() const { return layers_[0].grid_ptr(); }

  LayeredField& operator+=(const LayeredField& o) {
    layers_[0] += o.layers_[0];
    layers_[1] += o.layers_[1];
    return *this;
  }
  LayeredField& operator-=(const LayeredField& o) {
    layers_[0] -= o.layers_[0];
    layers_[1] -= o.layers_[1];
    return *this;
  }
  LayeredField& operator*=(double a) {
    layers_[0] *= a;
    layers_[1] *= a;
    return *this;
  }
  LayeredField& axpy(double a, const LayeredField& o) {
    layers_[0].axpy(a, o.layers_[0]);
    layers_[1].axpy(a, o.layers_[1]);
    return *this;
  }
  friend LayeredField operator+(LayeredField a, const LayeredField& b) { return a += b; }
  friend LayeredField operator-(LayeredField a, const LayeredField& b) { return a -= b; }
  friend LayeredField operator*(double s, LayeredField a) { return a *= s; }

  bool operator==(const LayeredField& o) const = default;

 private:
  std::array<ScalarField, 2> layers_;
};

// ---------------------------------------------------------------------------
// Operators

inline ScalarField derivative_x(const ScalarField& f) {
  const auto& g = f.grid();
  ScalarField out(f.grid_ptr());
  for (std::size_t idx : g.retained_indices()) out[idx] = Complex{0.0, g.kx(idx)} * f[idx];
  return out;
}

inline ScalarField derivative_y(const ScalarField& f) {
  const auto& g = f.grid();
  ScalarField out(f.grid_ptr());
  for (std::size_t idx : g.retained_indices()) out[idx] = Complex{0.0, g.ky(idx)} * f[idx];
  return out;
}

/// (d/dx f, d/dy f).
inline std::pair<ScalarField, ScalarField> gradient(const ScalarField& f) {
  return {derivative_x(f), derivative_y(f)};
}

/// Delta^power f; the power is applied as repeated multiplication so that
/// laplacian(laplacian(f, 1), 1) == laplacian(f, 2) exactly.
inline ScalarField laplacian(const ScalarField& f, int power = 1) {
  if (power < 1) throw ConfigError("laplacian power must be >= 1");
  const auto& g = f.grid();
  ScalarField out(f.grid_ptr());
  for (std::size_t idx : g.retained_indices()) {
    Complex c = f[idx];
    for (int p = 0; p < power; ++p) c *= -g.eigenvalue(idx);
    out[idx] = c;
  }
  return out;
}

inline RealBuffer to_padded_values(const ScalarField& f) {
  RealBuffer v(f.grid().padded_size());
  f.grid().to_padded(f.coefficients(), v);
  return v;
}

inline ScalarField from_padded_values(const GridPtr& grid, std::span<const double> values) {
  ScalarField out(grid);
  grid->from_padded(values, out.coefficients());
  return out;
}

inline RealBuffer to_physical(const ScalarField& f) {
  RealBuffer v(f.grid().physical_size());
  f.grid().to_physical(f.coefficients(), v);
  return v;
}

inline ScalarField from_physical(const GridPtr& grid, std::span<const double> values) {
  ScalarField out(grid);
  grid->from_physical(values, out.coefficients());
  return out;
}

/// Coefficients of f*g on the retained modes (mean included, not projected).
inline ScalarField dealiased_product(const ScalarField& f, const ScalarField& g) {
  f.check(g);
  RealBuffer a = to_padded_values(f);
  RealBuffer b = to_padded_values(g);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return from_padded_values(f.grid_ptr(), a);
}

inline ScalarField project_zero_mean(ScalarField f) {
  f(0, 0) = Complex{0.0, 0.0};
  return f;
}

/// sqrt(sum_{k != 0} lambda_k^s |c_k|^2).
inline double sobolev_norm(const ScalarField& f, double s) {
  const auto& g = f.grid();
  double acc = 0.0;
  for (std::size_t idx : g.retained_indices()) {
    const double w = s == 0.0 ? 1.0 : std::pow(g.eigenvalue(idx), s);
    acc += w * std::norm(f[idx]);
  }
  return std::sqrt(acc);
}

inline double l2_norm(const ScalarField& f) { return sobolev_norm(f, 0.0); }

/// L2 inner product <f, g> (mean mode included).
inline double inner_product(const ScalarField& f, const ScalarField& g) {
  f.check(g);
  double acc = std::real(f(0, 0) * std::conj(g(0, 0)));
  for (std::size_t idx : f.grid().retained_indices()) acc += std::real(f[idx] * std::conj(g[idx]));
  return acc;
}

/// Largest |c_k - conj(c_{-k})| over the stored modes; 0 for real fields.
inline double hermitian_defect(const ScalarField& f) {
  const auto& g = f.grid();
  double worst = std::abs(std::imag(f(0, 0)));
  for (std::size_t idx : g.retained_indices()) {
    const Wavevector k = g.wavevector(idx);
    worst = std::max(worst, std::abs(f[idx] - std::conj(f(-k.k1, -k.k2))));
  }
  // Nyquist and other non-retained slots must stay empty.
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    if (idx != 0 && !g.retained(idx)) worst = std::max(worst, std::abs(f[idx]));
  }
  return worst;
}

/// Real field c (e_k + e_{-k}); in physical space (2c/L) cos(2 pi k.x / L).
inline ScalarField cosine_mode(const GridPtr& grid, Wavevector k, double coefficient) {
  ScalarField f(grid);
  if (!grid->retained(k)) throw ConfigError("mode outside the retained set");
  f(k.k1, k.k2) += coefficient;
  f(-k.k1, -k.k2) += coefficient;
  return f;
}

}  // namespace qg2l
