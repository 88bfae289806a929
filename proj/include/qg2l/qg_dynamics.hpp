#pragma once

// Two-layer quasi-geostrophic vector field.
//
// q = (Delta + M) psi with M = [[-S1, S1], [S2, -S2]]. The drift is assembled
// in the compact form
//   dq/dt = (kappa + nu) Delta q + nu Delta M (-Delta - M)^{-1} q
//           - grad^perp psi . grad q - beta d_x psi + (F, -r Delta psi2),
// which splits into a diagonal stiff part -(kappa + nu) lambda_k and a
// non-stiff remainder. grad^perp = (-d_y, d_x).

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>

#include "qg2l/diagnostics.hpp"
#include "qg2l/params.hpp"
#include "qg2l/spectral.hpp"

namespace qg2l {

/// Per-mode factorization of (lambda I - M).
struct CouplingMatrix {
  double s1 = 0.0;
  double s2 = 0.0;

  explicit CouplingMatrix(const ModelParams& p) : s1(p.s1), s2(p.s2) {}

  /// det(lambda I - M) = lambda^2 + lambda (S1 + S2).
  double determinant(double lambda) const { return lambda * lambda + lambda * (s1 + s2); }

  /// (lambda I - M)^{-1} v.
  std::pair<Complex, Complex> solve(double lambda, Complex v1, Complex v2) const {
    const double det = determinant(lambda);
    return {((lambda + s2) * v1 + s1 * v2) / det, (s2 * v1 + (lambda + s1) * v2) / det};
  }
};

/// psi with (Delta + M) psi = q, i.e. psi_k = -(lambda_k I - M)^{-1} q_k.
inline LayeredField invert_vorticity(const LayeredField& q, const ModelParams& p) {
  const auto& g = q.grid();
  const CouplingMatrix cm(p);
  LayeredField psi(q.grid_ptr());
  for (std::size_t idx : g.retained_indices()) {
    auto [a, b] = cm.solve(g.eigenvalue(idx), q[0][idx], q[1][idx]);
    psi[0][idx] = -a;
    psi[1][idx] = -b;
  }
  return psi;
}

/// (Delta + M) psi.
inline LayeredField apply_vorticity_operator(const LayeredField& psi, const ModelParams& p) {
  const auto& g = psi.grid();
  LayeredField q(psi.grid_ptr());
  for (std::size_t idx : g.retained_indices()) {
    const double lam = g.eigenvalue(idx);
    const Complex a = psi[0][idx];
    const Complex b = psi[1][idx];
    q[0][idx] = -lam * a + p.s1 * (b - a);
    q[1][idx] = -lam * b + p.s2 * (a - b);
  }
  return q;
}

/// psi1 - psi2 = (-Delta + S1 + S2)^{-1} (q2 - q1).
inline ScalarField streamfunction_difference(const LayeredField& q, const ModelParams& p) {
  const auto& g = q.grid();
  ScalarField out(q.grid_ptr());
  for (std::size_t idx : g.retained_indices()) {
    out[idx] = (q[1][idx] - q[0][idx]) / (g.eigenvalue(idx) + p.s1 + p.s2);
  }
  return out;
}

namespace detail {

struct JacobianResult {
  ScalarField value;
  double max_speed = 0.0;
};

inline JacobianResult jacobian_with_speed(const ScalarField& psi, const ScalarField& q) {
  psi.check(q);
  const auto& grid = psi.grid_ptr();
  const RealBuffer psi_x = to_padded_values(derivative_x(psi));
  const RealBuffer psi_y = to_padded_values(derivative_y(psi));
  const RealBuffer q_x = to_padded_values(derivative_x(q));
  const RealBuffer q_y = to_padded_values(derivative_y(q));
  RealBuffer prod(psi_x.size());
  double speed_sq = 0.0;
  for (std::size_t i = 0; i < prod.size(); ++i) {
    prod[i] = -psi_y[i] * q_x[i] + psi_x[i] * q_y[i];
    speed_sq = std::max(speed_sq, psi_x[i] * psi_x[i] + psi_y[i] * psi_y[i]);
  }
  return {project_zero_mean(from_padded_values(grid, prod)), std::sqrt(speed_sq)};
}

}  // namespace detail

/// Dealiased grad^perp psi . grad q, mean projected out.
inline ScalarField jacobian(const ScalarField& psi, const ScalarField& q) {
  return detail::jacobian_with_speed(psi, q).value;
}

/// Linear non-stiff terms: nu Delta M (-Delta - M)^{-1} q - beta d_x psi + (0, -r Delta psi2).
inline LayeredField linear_terms(const LayeredField& q, const LayeredField& psi, const ModelParams& p) {
  const auto& g = q.grid();
  LayeredField out(q.grid_ptr());
  for (std::size_t idx : g.retained_indices()) {
    const double lam = g.eigenvalue(idx);
    const Complex a = psi[0][idx];
    const Complex b = psi[1][idx];
    const Complex ikx{0.0, g.kx(idx)};
    out[0][idx] = p.nu * lam * p.s1 * (b - a) - p.beta * ikx * a;
    out[1][idx] = p.nu * lam * p.s2 * (a - b) - p.beta * ikx * b + p.r * lam * b;
  }
  return out;
}

inline void add_forcing(LayeredField& out, const ModelParams& p) {
  if (p.forcing) out[0] += *p.forcing;
}

/// Non-stiff part of the drift together with quantities the steppers reuse.
struct DriftSplit {
  LayeredField nonstiff;
  LayeredField psi;
  double max_speed = 0.0;
};

inline DriftSplit split_drift(const LayeredField& q, const ModelParams& p) {
  LayeredField psi = invert_vorticity(q, p);
  LayeredField n = linear_terms(q, psi, p);
  add_forcing(n, p);
  double speed = 0.0;
  for (int j = 0; j < 2 && p.advection; ++j) {
    auto jac = detail::jacobian_with_speed(psi[j], q[j]);
    n[j] -= jac.value;
    speed = std::max(speed, jac.max_speed);
  }
  return {std::move(n), std::move(psi), speed};
}

/// Coefficient of the diagonal stiff part: dq_k/dt = -stiff_rate * lambda_k q_k + ...
inline double stiff_rate(const ModelParams& p, bool include_kappa) {
  return p.nu + (include_kappa ? p.kappa : 0.0);
}

/// Full tendency of the deterministic system (kappa term optional).
inline LayeredField drift(const LayeredField& q, const ModelParams& p, bool include_kappa = true) {
  DriftSplit split = split_drift(q, p);
  const double rate = stiff_rate(p, include_kappa);
  const auto& g = q.grid();
  for (int j = 0; j < 2; ++j) {
    for (std::size_t idx : g.retained_indices()) {
      split.nonstiff[j][idx] -= rate * g.eigenvalue(idx) * q[j][idx];
    }
  }
  return std::move(split.nonstiff);
}

/// Terms of the weighted enstrophy balance at state q.
inline Ledger balance_terms(const LayeredField& q, const ModelParams& p, double time = 0.0) {
  const LayeredField psi = invert_vorticity(q, p);
  const double s = p.coupling();
  Ledger led;
  led.time = time;
  led.beta1 = -p.beta * p.h1 * inner_product(derivative_x(psi[0]), q[0]);
  led.beta2 = -p.beta * p.h2 * inner_product(derivative_x(psi[1]), q[1]);
  led.forcing = p.forcing ? p.h1 * inner_product(*p.forcing, q[0]) : 0.0;
  const double q2 = l2_norm(q[1]);
  led.friction = -p.r * p.h2 * q2 * q2;
  const ScalarField dpsi = psi[0] - psi[1];
  const ScalarField dq = q[0] - q[1];
  led.s_r = s * p.r * inner_product(dpsi, q[1]);
  const double dqn = l2_norm(dq);
  led.s_nu1 = s * p.nu * dqn * dqn;
  led.s_nu2 = s * p.nu * (p.s1 + p.s2) * inner_product(dpsi, dq);
  led.grad_enstrophy = weighted_grad_enstrophy(q, p);
  led.dissipation = p.nu * led.grad_enstrophy;
  led.kappa_dissipation = p.kappa * led.grad_enstrophy;
  return led;
}

/// Smallest C with <L q, q> <= C ||grad q||^2 for the linear non-stiff terms L
/// (unweighted L2 pairing), computed mode by mode from the Hermitian part.
inline double linear_growth_constant(const SpectralGrid& g, const ModelParams& p) {
  const CouplingMatrix cm(p);
  double worst = 0.0;
  for (std::size_t idx : g.retained_indices()) {
    const double lam = g.eigenvalue(idx);
    const Complex ikx{0.0, g.kx(idx)};
    // A = nu lam M - beta i kx I + diag(0, r lam); L_k = A P with P = -(lam I - M)^{-1}.
    const Complex a11 = -p.nu * lam * p.s1 - p.beta * ikx;
    const Complex a12 = p.nu * lam * p.s1;
    const Complex a21 = p.nu * lam * p.s2;
    const Complex a22 = -p.nu * lam * p.s2 - p.beta * ikx + p.r * lam;
    const double det = cm.determinant(lam);
    const double p11 = -(lam + p.s2) / det, p12 = -p.s1 / det;
    const double p21 = -p.s2 / det, p22 = -(lam + p.s1) / det;
    const Complex l11 = a11 * p11 + a12 * p21;
    const Complex l12 = a11 * p12 + a12 * p22;
    const Complex l21 = a21 * p11 + a22 * p21;
    const Complex l22 = a21 * p12 + a22 * p22;
    const double h11 = std::real(l11);
    const double h22 = std::real(l22);
    const Complex h12 = 0.5 * (l12 + std::conj(l21));
    const double top = 0.5 * (h11 + h22) + std::sqrt(0.25 * (h11 - h22) * (h11 - h22) + std::norm(h12));
    worst = std::max(worst, top / lam);
  }
  return worst;
}

}  // namespace qg2l
