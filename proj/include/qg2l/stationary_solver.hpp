#pragma once

// Stationary solutions by the contraction map T: given q^(n), solve the linear
// advection-diffusion problem
//   -(kappa + nu) Delta q + grad^perp psi^(n) . grad q = L(q^(n)) + (F, 0)
// for q^(n+1), where L collects the linear non-stiff terms of the drift.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qg2l/diagnostics.hpp"
#include "qg2l/errors.hpp"
#include "qg2l/params.hpp"
#include "qg2l/qg_dynamics.hpp"
#include "qg2l/spectral.hpp"

namespace qg2l {

struct StationaryReport {
  std::optional<LayeredField> solution;
  int iterations = 0;
  std::vector<double> update_norms;  ///< ||q^(n+1) - q^(n)||_{H^1}
  double residual = 0.0;             ///< H^{-1} norm of the strong-form defect
  std::optional<double> contraction_factor;
  /// ||F|| / (sqrt(lambda_1) (kappa + nu - C_lin)); infinite when the denominator is not positive.
  double m_kappa = std::numeric_limits<double>::infinity();
  double c_lin = 0.0;
};

/// Raised when the Picard iteration fails; carries the partial report.
class StationaryError : public NumericalError {
 public:
  StationaryError(const std::string& what, StationaryReport report)
      : NumericalError(what), report_(std::move(report)) {}
  const StationaryReport& report() const { return report_; }

 private:
  StationaryReport report_;
};

namespace detail {

/// rhs - J(psi, q) + (kappa + nu) Delta q.
inline LayeredField advection_defect(const LayeredField& psi, const LayeredField& q, const LayeredField& rhs,
                                     double rate) {
  const auto& g = q.grid();
  LayeredField d = rhs;
  for (int j = 0; j < 2; ++j) {
    d[j] -= jacobian(psi[j], q[j]);
    for (std::size_t idx : g.retained_indices()) d[j][idx] -= rate * g.eigenvalue(idx) * q[j][idx];
  }
  return d;
}

}  // namespace detail

/// Richardson iteration preconditioned by the exact inverse of -(kappa + nu) Delta.
inline LayeredField linear_advection_solve(const LayeredField& psi_fixed, const LayeredField& rhs,
                                           const ModelParams& p, double tol, int max_iter = 1000) {
  const double rate = stiff_rate(p, true);
  if (!(rate > 0.0)) throw ConfigError("kappa + nu must be positive");
  for (int j = 0; j < 2; ++j) {
    if (rhs[j](0, 0) != Complex{} || psi_fixed[j](0, 0) != Complex{}) {
      throw ConfigError("linear_advection_solve needs mean-zero data");
    }
  }
  const auto& g = rhs.grid();
  LayeredField q(rhs.grid_ptr());
  double res = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    const LayeredField d = detail::advection_defect(psi_fixed, q, rhs, rate);
    res = vector_sobolev_norm(d, -1.0);
    if (!std::isfinite(res)) break;
    if (res < tol) return q;
    for (int j = 0; j < 2; ++j) {
      for (std::size_t idx : g.retained_indices()) q[j][idx] += d[j][idx] / (rate * g.eigenvalue(idx));
    }
  }
  throw NumericalError("linear advection solve did not converge (residual " + std::to_string(res) +
                       "); kappa too small?");
}

/// H^{-1} norm of the stationary defect of both layers.
inline double stationary_residual(const LayeredField& q, const ModelParams& p, const ScalarField& forcing) {
  ModelParams pf = p;
  pf.forcing = forcing;
  return vector_sobolev_norm(drift(q, pf, true), -1.0);
}

/// One application of the map T.
inline LayeredField contraction_map(const LayeredField& q, const ModelParams& p, const ScalarField& forcing,
                                    double inner_tol) {
  ModelParams pf = p;
  pf.forcing = forcing;
  const LayeredField psi = invert_vorticity(q, pf);
  LayeredField rhs = linear_terms(q, psi, pf);
  add_forcing(rhs, pf);
  return linear_advection_solve(pf.advection ? psi : LayeredField(q.grid_ptr()), rhs, pf, inner_tol);
}

inline StationaryReport picard_solve(const ModelParams& p, const ScalarField& forcing, double tol,
                                     int max_iter = 200, const std::optional<LayeredField>& start = std::nullopt) {
  p.validate();
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (forcing(0, 0) != Complex{}) throw ConfigError("forcing must have zero mean");
  const GridPtr& grid = forcing.grid_ptr();
  StationaryReport rep;
  rep.c_lin = linear_growth_constant(*grid, p);
  const double margin = stiff_rate(p, true) - rep.c_lin;
  if (margin > 0.0) rep.m_kappa = l2_norm(forcing) / (std::sqrt(grid->lambda_min()) * margin);

  LayeredField q = start ? *start : LayeredField(grid);
  int growing = 0;
  for (int n = 1; n <= max_iter; ++n) {
    LayeredField next = contraction_map(q, p, forcing, 0.1 * tol);
    const double upd = vector_sobolev_norm(next - q, 1.0);
    if (!std::isfinite(upd)) throw StationaryError("non-finite Picard update", rep);
    rep.update_norms.push_back(upd);
    rep.iterations = n;
    q = std::move(next);
    const std::size_t m = rep.update_norms.size();
    if (m >= 2) {
      // Geometric mean of successive ratios after the first update.
      rep.contraction_factor = std::pow(rep.update_norms.back() / rep.update_norms.front(),
                                        1.0 / static_cast<double>(m - 1));
      growing = rep.update_norms[m - 1] >= rep.update_norms[m - 2] ? growing + 1 : 0;
    }
    if (upd < tol) {
      rep.residual = stationary_residual(q, p, forcing);
      rep.solution = std::move(q);
      return rep;
    }
    if (growing >= 5) {
      rep.solution = q;
      throw StationaryError("kappa below contraction threshold: updates grew for 5 iterations", rep);
    }
  }
  rep.residual = stationary_residual(q, p, forcing);
  rep.solution = std::move(q);
  throw StationaryError("Picard iteration exceeded max_iter = " + std::to_string(max_iter), rep);
}

}  // namespace qg2l
