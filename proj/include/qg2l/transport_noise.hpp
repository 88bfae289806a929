#pragma once

// Structured transport noise.
//
// For each layer j and k in a finite radially symmetric set K the noise
// coefficient is sigma_{j,k} = sqrt(2 kappa) theta_{j,k} e_k (+-k^perp / |k|),
// with k^perp = (-k2, k1), the + sign on the half plane
// Z^2_+ = {k1 > 0} u {k1 = 0, k2 > 0}, and sigma_{j,-k} = conj(sigma_{j,k}).
// Complex increments pair as dW^{j,-k} = conj(dW^{j,k}), so only k in Z^2_+
// is stored and the noise term is sum_{k in K+} 2 Re(sigma_k dW^k) . grad q.
//
// Increment normalization: real and imaginary parts of dW^{j,k} are
// independent N(0, L^2 dt), i.e. E|dW|^2 = 2 L^2 dt. With this choice the Ito
// correction 1/2 sum sigma . grad(sigma . grad q) over the real noise fields
// equals kappa Delta q exactly (the L^2 undoes the 1/L of the basis e_k).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qg2l/errors.hpp"
#include "qg2l/spectral.hpp"

namespace qg2l {

inline bool in_positive_half(Wavevector k) { return k.k1 > 0 || (k.k1 == 0 && k.k2 > 0); }

struct NoiseMode {
  Wavevector k;  ///< representative in Z^2_+
  double theta = 0.0;
};

/// Noise coefficients of one layer, stored on Z^2_+.
struct LayerNoise {
  std::vector<NoiseMode> modes;
  int shell_min = 0;
  int shell_max = 0;

  bool empty() const { return modes.empty(); }
  /// ||theta||_{l^infty}.
  double theta_sup() const {
    double s = 0.0;
    for (const auto& m : modes) s = std::max(s, m.theta);
    return s;
  }
  /// Largest |k| in the support (rounded up).
  int support_radius() const {
    int worst = 0;
    for (const auto& m : modes) {
      worst = std::max(worst, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m.k.norm_sq())) - 1e-12)));
    }
    return worst;
  }
};

/// Isotropic annulus theta_k = c 1[shell_min <= |k| <= shell_max], sum over Z^2_0 of theta^2 = 1.
inline LayerNoise build_theta(int shell_min, int shell_max) {
  if (shell_min < 1 || shell_max < shell_min) throw ConfigError("noise shells need 1 <= shell_min <= shell_max");
  LayerNoise layer;
  layer.shell_min = shell_min;
  layer.shell_max = shell_max;
  const int lo = shell_min * shell_min;
  const int hi = shell_max * shell_max;
  for (int k1 = 0; k1 <= shell_max; ++k1) {
    for (int k2 = -shell_max; k2 <= shell_max; ++k2) {
      const Wavevector k{k1, k2};
      if (!in_positive_half(k)) continue;
      const int n2 = k.norm_sq();
      if (n2 >= lo && n2 <= hi) layer.modes.push_back({k, 0.0});
    }
  }
  if (layer.modes.empty()) throw ConfigError("no noise modes");
  const double c = 1.0 / std::sqrt(2.0 * static_cast<double>(layer.modes.size()));
  for (auto& m : layer.modes) m.theta = c;
  return layer;
}

/// Throws ConfigError naming the violated condition; empty layers are accepted (noise off).
inline void validate_theta(const LayerNoise& layer) {
  if (layer.empty()) return;
  std::map<int, double> shell_theta;
  std::map<int, int> shell_count;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < layer.modes.size(); ++i) {
    const auto& m = layer.modes[i];
    if (!in_positive_half(m.k)) throw ConfigError("theta pairing: mode outside the positive half plane");
    for (std::size_t j = 0; j < i; ++j) {
      if (layer.modes[j].k == m.k) throw ConfigError("theta pairing: duplicate mode");
    }
    if (!(m.theta >= 0.0) || !std::isfinite(m.theta)) throw ConfigError("theta normalization: negative or non-finite theta");
    // theta_{-k} = theta_k is implied by storing one representative per pair.
    sum_sq += 2.0 * m.theta * m.theta;
    const int n2 = m.k.norm_sq();
    auto it = shell_theta.find(n2);
    if (it == shell_theta.end()) {
      shell_theta[n2] = m.theta;
    } else if (std::abs(it->second - m.theta) > 1e-14 * std::max(1.0, m.theta)) {
      throw ConfigError("theta radial symmetry: unequal theta on one shell");
    }
    ++shell_count[n2];
  }
  if (std::abs(sum_sq - 1.0) > 1e-12) {
    throw ConfigError("theta normalization: sum of theta^2 is " + std::to_string(sum_sq) + ", expected 1");
  }
  for (const auto& [n2, count] : shell_count) {
    int expected = 0;
    const int r = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n2))));
    for (int k1 = 0; k1 <= r; ++k1) {
      for (int k2 = -r; k2 <= r; ++k2) {
        if (in_positive_half({k1, k2}) && k1 * k1 + k2 * k2 == n2) ++expected;
      }
    }
    if (count != expected) throw ConfigError("theta radial symmetry: incomplete shell |k|^2 = " + std::to_string(n2));
  }
}

/// Noise configuration for both layers.
class NoiseConfig {
 public:
  NoiseConfig(GridPtr grid, double kappa, std::array<LayerNoise, 2> layers, std::uint64_t seed = 0)
      : grid_(std::move(grid)), kappa_(kappa), layers_(std::move(layers)), seed_(seed) {
    validate();
  }

  /// No noise on either layer.
  static NoiseConfig none(GridPtr grid, std::uint64_t seed = 0) { return NoiseConfig(std::move(grid), 0.0, {}, seed); }

  /// Same isotropic annulus on both layers.
  static NoiseConfig annulus(GridPtr grid, double kappa, int shell_min, int shell_max, std::uint64_t seed = 0) {
    LayerNoise layer = build_theta(shell_min, shell_max);
    return NoiseConfig(std::move(grid), kappa, {layer, layer}, seed);
  }

  /// Constructs without validation (used to exercise the validators).
  static NoiseConfig unchecked(GridPtr grid, double kappa, std::array<LayerNoise, 2> layers, std::uint64_t seed = 0) {
    return NoiseConfig(std::move(grid), kappa, std::move(layers), seed, 0);
  }

  void validate() const {
    if (!(kappa_ >= 0.0) || !std::isfinite(kappa_)) throw ConfigError("noise kappa must be >= 0");
    for (const auto& layer : layers_) {
      validate_theta(layer);
      if (!layer.empty() && layer.support_radius() + grid_->n() / 2 > grid_->padded_cutoff()) {
        throw ConfigError("support exceeds padded grid: shell " + std::to_string(layer.support_radius()) +
                          " + N/2 > " + std::to_string(grid_->padded_cutoff()));
      }
    }
  }

  const GridPtr& grid_ptr() const { return grid_; }
  const SpectralGrid& grid() const { return *grid_; }
  double kappa() const { return kappa_; }
  std::uint64_t seed() const { return seed_; }
  const LayerNoise& layer(int j) const { return layers_[static_cast<std::size_t>(j)]; }
  bool empty() const { return kappa_ == 0.0 || (layers_[0].empty() && layers_[1].empty()); }

  /// E|dW^{j,k}|^2 / dt.
  double amplitude_normalization() const { return 2.0 * grid_->length() * grid_->length(); }
  /// Variance per unit time of the real and imaginary parts of dW.
  double component_variance() const { return 0.5 * amplitude_normalization(); }

 private:
  NoiseConfig(GridPtr grid, double kappa, std::array<LayerNoise, 2> layers, std::uint64_t seed, int)
      : grid_(std::move(grid)), kappa_(kappa), layers_(std::move(layers)), seed_(seed) {}

  GridPtr grid_;
  double kappa_;
  std::array<LayerNoise, 2> layers_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Random increments

/// Identifies one ensemble member's stream.
struct NoiseStream {
  std::uint64_t seed = 0;
  std::uint64_t member = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the generator for (seed, member, step).
inline std::uint64_t step_seed(const NoiseStream& s, std::uint64_t step) {
  std::uint64_t h = splitmix64(s.seed);
  h = splitmix64(h ^ (s.member * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (step * 0x8cb92ba72f3d8dd7ULL));
  return h;
}

}  // namespace detail

/// Complex Brownian increments over one step, indexed like LayerNoise::modes.
struct WienerIncrement {
  std::array<std::vector<Complex>, 2> dw;
  double dt = 0.0;

  WienerIncrement& operator+=(const WienerIncrement& o) {
    for (int j = 0; j < 2; ++j) {
      auto& a = dw[static_cast<std::size_t>(j)];
      const auto& b = o.dw[static_cast<std::size_t>(j)];
      if (a.size() != b.size()) throw ConfigError("increment layouts differ");
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
    dt += o.dt;
    return *this;
  }
};

/// Increments for step `step` of the given stream; a pure function of
/// (seed, member, step), independent across layers and modes.
inline WienerIncrement sample_increments(const NoiseConfig& cfg, const NoiseStream& stream, std::uint64_t step,
                                         double dt) {
  if (!(dt > 0.0)) throw ConfigError("increment dt must be positive");
  WienerIncrement inc;
  inc.dt = dt;
  std::mt19937_64 gen(detail::step_seed(stream, step));
  std::normal_distribution<double> normal(0.0, std::sqrt(cfg.component_variance() * dt));
  for (int j = 0; j < 2; ++j) {
    const auto& modes = cfg.layer(j).modes;
    auto& out = inc.dw[static_cast<std::size_t>(j)];
    out.resize(modes.size());
    for (auto& w : out) {
      const double re = normal(gen);
      const double im = normal(gen);
      w = Complex{re, im};
    }
  }
  return inc;
}

/// Sum of `substeps` consecutive fine increments starting at fine step `first`.
inline WienerIncrement coarse_increment(const NoiseConfig& cfg, const NoiseStream& stream, std::uint64_t first,
                                        std::uint64_t substeps, double fine_dt) {
  WienerIncrement inc = sample_increments(cfg, stream, first, fine_dt);
  for (std::uint64_t s = 1; s < substeps; ++s) inc += sample_increments(cfg, stream, first + s, fine_dt);
  return inc;
}

// ---------------------------------------------------------------------------
// Noise operators

/// Padded physical values of the random velocity sum_{k in K+} 2 Re(sigma_k dW^k) for layer j.
inline std::array<RealBuffer, 2> noise_velocity(const NoiseConfig& cfg, int j, const WienerIncrement& inc) {
  const auto& g = cfg.grid();
  const int m = g.padded_n();
  const int hw = m / 2 + 1;
  const auto& modes = cfg.layer(j).modes;
  const auto& dw = inc.dw[static_cast<std::size_t>(j)];
  if (dw.size() != modes.size()) throw ConfigError("increment does not match noise layout");
  std::array<ComplexBuffer, 2> half{ComplexBuffer(g.padded_half_size()), ComplexBuffer(g.padded_half_size())};
  const double amp = std::sqrt(2.0 * cfg.kappa());
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const Wavevector k = modes[i].k;
    const double norm = std::sqrt(static_cast<double>(k.norm_sq()));
    const std::array<double, 2> perp{-k.k2 / norm, k.k1 / norm};
    const Complex c = amp * modes[i].theta * dw[i];
    for (int d = 0; d < 2; ++d) {
      const Complex v = c * perp[static_cast<std::size_t>(d)];
      auto& h = half[static_cast<std::size_t>(d)];
      if (k.k2 > 0) {
        h[static_cast<std::size_t>(detail::wrap(k.k1, m)) * hw + k.k2] += v;
      } else if (k.k2 < 0) {
        h[static_cast<std::size_t>(detail::wrap(-k.k1, m)) * hw - k.k2] += std::conj(v);
      } else {
        h[static_cast<std::size_t>(k.k1) * hw] += v;
        h[static_cast<std::size_t>(detail::wrap(-k.k1, m)) * hw] += std::conj(v);
      }
    }
  }
  std::array<RealBuffer, 2> out{RealBuffer(g.padded_size()), RealBuffer(g.padded_size())};
  g.padded_c2r(half[0], out[0]);
  g.padded_c2r(half[1], out[1]);
  return out;
}

/// Noise increment sum_k sigma_{j,k} . grad q_j dW^{j,k} for both layers (dealiased, mean zero).
inline LayeredField apply_transport(const LayeredField& q, const WienerIncrement& inc, const NoiseConfig& cfg) {
  LayeredField out(q.grid_ptr());
  if (cfg.kappa() == 0.0) return out;
  if (!same_grid(q.grid(), cfg.grid())) throw ConfigError("grid mismatch between field and noise");
  for (int j = 0; j < 2; ++j) {
    if (cfg.layer(j).empty()) continue;
    const auto vel = noise_velocity(cfg, j, inc);
    const RealBuffer qx = to_padded_values(derivative_x(q[j]));
    const RealBuffer qy = to_padded_values(derivative_y(q[j]));
    RealBuffer prod(qx.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = vel[0][i] * qx[i] + vel[1][i] * qy[i];
    out[j] = project_zero_mean(from_padded_values(q.grid_ptr(), prod));
  }
  return out;
}

namespace detail {

/// Visits every real noise field of layer j as (amplitude(x), direction) on the
/// padded grid: the field is amplitude(x) * direction, already scaled so that
/// its Brownian motion has unit variance per unit time.
template <class Visitor>
void for_each_real_noise_field(const NoiseConfig& cfg, int j, Visitor&& visit) {
  const auto& g = cfg.grid();
  const int m = g.padded_n();
  std::vector<double> cos_table(static_cast<std::size_t>(m)), sin_table(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    cos_table[static_cast<std::size_t>(i)] = std::cos(2.0 * std::numbers::pi * i / m);
    sin_table[static_cast<std::size_t>(i)] = std::sin(2.0 * std::numbers::pi * i / m);
  }
  const double scale = std::sqrt(cfg.component_variance()) * 2.0 * std::sqrt(2.0 * cfg.kappa()) / g.length();
  RealBuffer amp_cos(g.padded_size()), amp_sin(g.padded_size());
  for (const auto& mode : cfg.layer(j).modes) {
    const Wavevector k = mode.k;
    const double norm = std::sqrt(static_cast<double>(k.norm_sq()));
    const std::array<double, 2> dir{-k.k2 / norm, k.k1 / norm};
    const double a = scale * mode.theta;
    for (int ix = 0; ix < m; ++ix) {
      for (int iy = 0; iy < m; ++iy) {
        const int phase = ((k.k1 * ix + k.k2 * iy) % m + m) % m;
        const std::size_t p = static_cast<std::size_t>(ix) * m + iy;
        amp_cos[p] = a * cos_table[static_cast<std::size_t>(phase)];
        amp_sin[p] = a * sin_table[static_cast<std::size_t>(phase)];
      }
    }
    visit(amp_cos, dir);
    visit(amp_sin, dir);
  }
}

}  // namespace detail

/// Brute-force Ito correction 1/2 sum_k sigma_k . grad(sigma_k . grad q) over
/// the real noise fields, evaluated on the padded grid and restricted to the
/// retained modes. Equals kappa Delta q for admissible configurations.
inline LayeredField ito_correction(const LayeredField& q, const NoiseConfig& cfg) {
  LayeredField out(q.grid_ptr());
  if (cfg.kappa() == 0.0) return out;
  const auto& g = cfg.grid();
  const int hw = g.padded_n() / 2 + 1;
  for (int j = 0; j < 2; ++j) {
    if (cfg.layer(j).empty()) continue;
    const RealBuffer qx = to_padded_values(derivative_x(q[j]));
    const RealBuffer qy = to_padded_values(derivative_y(q[j]));
    RealBuffer acc(g.padded_size(), 0.0);
    RealBuffer u(g.padded_size()), du(g.padded_size());
    ComplexBuffer half(g.padded_half_size());
    const double two_pi_over_l = 2.0 * std::numbers::pi / g.length();
    detail::for_each_real_noise_field(cfg, j, [&](const RealBuffer& amp, const std::array<double, 2>& dir) {
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = amp[i] * (dir[0] * qx[i] + dir[1] * qy[i]);
      g.padded_r2c(u, half);
      for (std::size_t h = 0; h < half.size(); ++h) {
        const Wavevector k = g.padded_wavevector(h);
        const bool nyquist = std::abs(k.k1) == g.padded_n() / 2 || k.k2 == hw - 1;
        const double dk = two_pi_over_l * (dir[0] * k.k1 + dir[1] * k.k2);
        half[h] = nyquist ? Complex{0.0, 0.0} : Complex{0.0, dk} * half[h];
      }
      g.padded_c2r(half, du);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += 0.5 * amp[i] * du[i];
    });
    out[j] = from_padded_values(q.grid_ptr(), acc);
  }
  return out;
}

/// Per layer sum_k ||sigma_k . grad q_j||^2 over the real noise fields (unit-variance
/// scaling), computed exactly by padded-grid quadrature.
inline std::array<double, 2> quadratic_variation_density(const LayeredField& q, const NoiseConfig& cfg) {
  std::array<double, 2> out{0.0, 0.0};
  if (cfg.kappa() == 0.0) return out;
  const auto& g = cfg.grid();
  const double cell = g.length() * g.length() / static_cast<double>(g.padded_size());
  for (int j = 0; j < 2; ++j) {
    if (cfg.layer(j).empty()) continue;
    const RealBuffer qx = to_padded_values(derivative_x(q[j]));
    const RealBuffer qy = to_padded_values(derivative_y(q[j]));
    double total = 0.0;
    detail::for_each_real_noise_field(cfg, j, [&](const RealBuffer& amp, const std::array<double, 2>& dir) {
      double s = 0.0;
      for (std::size_t i = 0; i < amp.size(); ++i) {
        const double u = amp[i] * (dir[0] * qx[i] + dir[1] * qy[i]);
        s += u * u;
      }
      total += s * cell;
    });
    out[static_cast<std::size_t>(j)] = total;
  }
  return out;
}

}  // namespace qg2l
