#pragma once

// Independent reference computations for the unit tests. Nothing here uses
// FFTs: fields are evaluated by direct mode sums and products by explicit
// convolution.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

#include "qg2l/qg2l.hpp"

namespace oracle {

using qg2l::Complex;
using qg2l::GridPtr;
using qg2l::LayeredField;
using qg2l::ScalarField;
using qg2l::SpectralGrid;
using qg2l::Wavevector;

/// Random real field on modes with |k_i| <= kmax (and k != 0).
inline ScalarField random_field(const GridPtr& grid, std::uint64_t seed, int kmax = -1) {
  if (kmax < 0) kmax = grid->max_mode();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  ScalarField f(grid);
  for (int a = 0; a <= kmax; ++a) {
    for (int b = -kmax; b <= kmax; ++b) {
      if (a == 0 && b <= 0) continue;
      const Complex v{normal(rng), normal(rng)};
      f(a, b) = v;
      f(-a, -b) = std::conj(v);
    }
  }
  return f;
}

inline LayeredField random_layers(const GridPtr& grid, std::uint64_t seed, int kmax = -1) {
  return LayeredField(random_field(grid, seed, kmax), random_field(grid, seed + 1000, kmax));
}

/// f(x, y) = sum_k fhat_k L^-1 exp(2 pi i k.x / L), by direct summation.
inline double evaluate(const ScalarField& f, double x, double y) {
  const auto& g = f.grid();
  const double w = 2.0 * std::numbers::pi / g.length();
  Complex acc{0.0, 0.0};
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    const Complex c = f[idx];
    if (c == Complex{}) continue;
    const Wavevector k = g.wavevector(idx);
    acc += c * std::polar(1.0, w * (k.k1 * x + k.k2 * y));
  }
  return acc.real() / g.length();
}

/// Fourth-order centred difference of the point evaluator along x (dir 0) or y (dir 1).
inline double finite_difference(const ScalarField& f, double x, double y, int dir, double h = 1e-3) {
  auto at = [&](double s) { return dir == 0 ? evaluate(f, x + s, y) : evaluate(f, x, y + s); };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

/// Coefficients of the product f g on the stored N x N table by explicit
/// convolution: (fg)_k = L^-1 sum_m f_m g_{k-m}. Modes outside the retained
/// set (except the mean) are dropped.
inline ScalarField convolution(const ScalarField& f, const ScalarField& g) {
  const auto& grid = f.grid();
  const int h = grid.max_mode();
  ScalarField out(f.grid_ptr());
  for (int k1 = -h; k1 <= h; ++k1) {
    for (int k2 = -h; k2 <= h; ++k2) {
      Complex acc{0.0, 0.0};
      for (int m1 = -h; m1 <= h; ++m1) {
        const int n1 = k1 - m1;
        if (std::abs(n1) > h) continue;
        for (int m2 = -h; m2 <= h; ++m2) {
          const int n2 = k2 - m2;
          if (std::abs(n2) > h) continue;
          if ((m1 == 0 && m2 == 0) || (n1 == 0 && n2 == 0)) continue;
          acc += f(m1, m2) * g(n1, n2);
        }
      }
      out(k1, k2) = acc / grid.length();
    }
  }
  return out;
}

/// Largest coefficient difference over the stored table.
inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.grid().size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double max_abs(const ScalarField& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.grid().size(); ++i) worst = std::max(worst, std::abs(a[i]));
  return worst;
}

/// Number of lattice points k != 0 with lo <= |k| <= hi.
inline int lattice_count(int lo, int hi) {
  int count = 0;
  for (int a = -hi; a <= hi; ++a) {
    for (int b = -hi; b <= hi; ++b) {
      const int n2 = a * a + b * b;
      if (n2 >= lo * lo && n2 <= hi * hi && n2 > 0) ++count;
    }
  }
  return count;
}

}  // namespace oracle
