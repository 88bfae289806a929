#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "qg2l/errors.hpp"
#include "qg2l/spectral.hpp"

namespace qg2l {

/// Physical constants of the two-layer model.
struct ModelParams {
  double nu = 1e-3;     ///< eddy viscosity
  double r = 0.1;       ///< bottom friction (lower layer)
  double beta = 1.0;    ///< meridional gradient of the Coriolis parameter
  double kappa = 0.0;   ///< transport-noise intensity / enhanced dissipation
  double h1 = 1.0;
  double h2 = 1.0;
  double s1 = 1.0;
  double s2 = 1.0;
  /// Advection by grad^perp psi; off leaves a linear system (used for pure-transport studies).
  bool advection = true;
  /// Time-independent forcing of the upper layer; absent means F = 0.
  std::optional<ScalarField> forcing;

  /// S = h1 S1 = h2 S2.
  double coupling() const { return h1 * s1; }

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(nu) || nu < 0.0) throw ConfigError("params.nu must be >= 0");
    if (!finite(r) || r < 0.0) throw ConfigError("params.r must be >= 0");
    if (!finite(beta) || beta < 0.0) throw ConfigError("params.beta must be >= 0");
    if (!finite(kappa) || kappa < 0.0) throw ConfigError("params.kappa must be >= 0");
    if (!finite(h1) || !finite(h2) || h1 <= 0.0 || h2 <= 0.0) {
      throw ConfigError("layer heights must be positive");
    }
    if (!finite(s1) || !finite(s2) || s1 < 0.0 || s2 < 0.0) {
      throw ConfigError("stratification constants must be >= 0");
    }
    const double a = h1 * s1;
    const double b = h2 * s2;
    if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) {
      throw ConfigError("h1*S1 must equal h2*S2");
    }
    if (forcing && std::abs(forcing->operator()(0, 0)) != 0.0) {
      throw ConfigError("forcing must have zero mean");
    }
  }
};

}  // namespace qg2l
