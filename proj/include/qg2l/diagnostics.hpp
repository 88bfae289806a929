#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qg2l/errors.hpp"
#include "qg2l/params.hpp"
#include "qg2l/spectral.hpp"

namespace qg2l {

/// Terms of the weighted-enstrophy balance
///   d/dt |||q|||^2 / 2 = beta1 + beta2 + forcing + friction + s_r + s_nu1 + s_nu2
///                        - (nu + kappa) |||grad q|||^2.
struct Ledger {
  double time = 0.0;
  double beta1 = 0.0;     ///< -beta h1 <d_x psi1, q1>
  double beta2 = 0.0;     ///< -beta h2 <d_x psi2, q2>
  double forcing = 0.0;   ///< h1 <F, q1>
  double friction = 0.0;  ///< -r h2 ||q2||^2
  double s_r = 0.0;       ///< S r <psi1 - psi2, q2>
  double s_nu1 = 0.0;     ///< S nu ||q1 - q2||^2
  double s_nu2 = 0.0;     ///< S nu (S1 + S2) <psi1 - psi2, q1 - q2>
  double grad_enstrophy = 0.0;     ///< |||grad q|||^2
  double dissipation = 0.0;        ///< nu |||grad q|||^2
  double kappa_dissipation = 0.0;  ///< kappa |||grad q|||^2

  double rhs() const {
    return beta1 + beta2 + forcing + friction + s_r + s_nu1 + s_nu2 - dissipation - kappa_dissipation;
  }
  /// Sum of absolute values of all terms; scale for relative residuals.
  double gross() const {
    return std::abs(beta1) + std::abs(beta2) + std::abs(forcing) + std::abs(friction) + std::abs(s_r) +
           std::abs(s_nu1) + std::abs(s_nu2) + std::abs(dissipation) + std::abs(kappa_dissipation);
  }
};

/// One diagnostic sample of a trajectory.
struct TrajectorySample {
  double time = 0.0;
  double enstrophy_weighted = 0.0;  ///< |||q|||^2
  double grad_enstrophy = 0.0;      ///< |||grad q|||^2
  Ledger ledger;
};

struct RateFit {
  std::vector<double> x;
  std::vector<double> y;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// h1 ||q1||^2 + h2 ||q2||^2.
inline double weighted_enstrophy(const LayeredField& q, const ModelParams& p) {
  const double a = l2_norm(q[0]);
  const double b = l2_norm(q[1]);
  return p.h1 * a * a + p.h2 * b * b;
}

/// h1 ||grad q1||^2 + h2 ||grad q2||^2.
inline double weighted_grad_enstrophy(const LayeredField& q, const ModelParams& p) {
  const double a = sobolev_norm(q[0], 1.0);
  const double b = sobolev_norm(q[1], 1.0);
  return p.h1 * a * a + p.h2 * b * b;
}

/// Unweighted vector Sobolev norm sqrt(||u1||^2_{H^s} + ||u2||^2_{H^s}).
inline double vector_sobolev_norm(const LayeredField& u, double s) {
  const double a = sobolev_norm(u[0], s);
  const double b = sobolev_norm(u[1], s);
  return std::sqrt(a * a + b * b);
}

/// ||q - qbar||_{H^{-alpha}} on the two-layer space.
inline double error_norm(const LayeredField& q, const LayeredField& qbar, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!same_grid(q.grid(), qbar.grid())) throw ConfigError("grid mismatch in error_norm");
  return vector_sobolev_norm(q - qbar, -alpha);
}

inline constexpr double kResidualFloor = 1e-14;

/// Centred-difference residual of the enstrophy balance at interior samples,
/// relative to max(gross ledger size, floor). End points are NaN.
inline std::vector<double> balance_residual(std::span<const TrajectorySample> samples) {
  if (samples.size() < 3) throw ConfigError("balance_residual needs at least 3 samples");
  std::vector<double> out(samples.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
    const double span = samples[i + 1].time - samples[i - 1].time;
    if (!(span > 0.0)) throw ConfigError("sample times must be strictly increasing");
    const double rate = (samples[i + 1].enstrophy_weighted - samples[i - 1].enstrophy_weighted) / (2.0 * span);
    const double rhs = samples[i].ledger.rhs();
    out[i] = (rate - rhs) / std::max(samples[i].ledger.gross(), kResidualFloor);
  }
  return out;
}

inline double max_abs_finite(std::span<const double> v) {
  double worst = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) worst = std::max(worst, std::abs(x));
  }
  return worst;
}

/// Least-squares line through (x, y), optionally in log coordinates.
inline RateFit fit_rate(std::span<const double> xs, std::span<const double> ys, bool log_x, bool log_y) {
  if (xs.size() != ys.size()) throw ConfigError("fit_rate: x and y differ in length");
  if (xs.size() < 3) throw ConfigError("fit_rate needs at least 3 samples");
  RateFit fit;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double x = xs[i];
    double y = ys[i];
    if (log_x) {
      if (!(x > 0.0)) throw ConfigError("fit_rate: non-positive x under log");
      x = std::log(x);
    }
    if (log_y) {
      if (!(y > 0.0)) throw ConfigError("fit_rate: non-positive y under log");
      y = std::log(y);
    }
    fit.x.push_back(x);
    fit.y.push_back(y);
  }
  const double n = static_cast<double>(fit.x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    mx += fit.x[i];
    my += fit.y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    const double dx = fit.x[i] - mx;
    const double dy = fit.y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 1e-300) || sxx <= 1e-24 * (mx * mx + 1.0) * n) {
    throw ConfigError("fit_rate: degenerate x spread");
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    const double e = fit.y[i] - (fit.intercept + fit.slope * fit.x[i]);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanStat mean_and_stderr(std::span<const double> v) {
  MeanStat s;
  if (v.empty()) return s;
  double acc = 0.0;
  for (double x : v) acc += x;
  s.mean = acc / static_cast<double>(v.size());
  if (v.size() > 1) {
    double var = 0.0;
    for (double x : v) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(v.size() - 1);
    s.std_error = std::sqrt(var / static_cast<double>(v.size()));
  }
  return s;
}

}  // namespace qg2l
