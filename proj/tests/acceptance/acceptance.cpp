// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: qg2l_acceptance [AC-n ...]   (no arguments runs all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "qg2l/qg2l.hpp"

using namespace qg2l;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

LayeredField broadband_field(const GridPtr& grid, const ModelParams& p, std::uint64_t seed) {
  return random_initial_condition(grid, p, seed, grid->max_mode(), 2.0, 1.0);
}

// Ito correction equals kappa Delta q.
Verdict ac1() {
  const auto grid = SpectralGrid::create(64, 2.0 * std::numbers::pi);
  const ModelParams p;
  const double kappa = 0.7;
  double worst = 0.0;
  for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 4}}) {
    const NoiseConfig noise = NoiseConfig::annulus(grid, kappa, a, b);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const LayeredField q = broadband_field(grid, p, 100 + s);
      LayeredField target(grid);
      for (int j = 0; j < 2; ++j) target[j] = kappa * laplacian(q[j]);
      const double rel =
          vector_sobolev_norm(ito_correction(q, noise) - target, 0.0) / vector_sobolev_norm(target, 0.0);
      worst = std::max(worst, rel);
    }
  }
  return {worst < 1e-10, fmt("max relative error %.3e over 3 annuli x 10 fields (tol 1e-10)", worst)};
}

// Inversion and the streamfunction-difference formula.
Verdict ac2() {
  const auto grid = SpectralGrid::create(64, 2.0 * std::numbers::pi);
  double worst_inv = 0.0;
  double worst_diff = 0.0;
  const std::vector<std::array<double, 4>> strat{{1, 1, 1, 1}, {1, 2, 2, 1}, {0.4, 1.6, 5, 1.25}};
  for (const auto& s : strat) {
    ModelParams p;
    p.h1 = s[0];
    p.h2 = s[1];
    p.s1 = s[2];
    p.s2 = s[3];
    for (std::uint64_t k = 0; k < 10; ++k) {
      const LayeredField q = broadband_field(grid, p, 200 + k);
      const LayeredField psi = invert_vorticity(q, p);
      const LayeredField back = apply_vorticity_operator(psi, p);
      worst_inv = std::max(worst_inv, vector_sobolev_norm(back - q, 0.0) / vector_sobolev_norm(q, 0.0));
      const ScalarField d = streamfunction_difference(q, p);
      const ScalarField ref = psi[0] - psi[1];
      worst_diff = std::max(worst_diff, l2_norm(d - ref) / l2_norm(ref));
    }
  }
  return {worst_inv < 1e-12 && worst_diff < 1e-12,
          fmt("round trip %.3e, psi1-psi2 formula %.3e (tol 1e-12)", worst_inv, worst_diff)};
}

// Inviscid RK4 conservation of the weighted enstrophy.
Verdict ac3() {
  const auto grid = SpectralGrid::create(64, 2.0 * std::numbers::pi);
  ModelParams p;
  p.nu = p.r = p.beta = p.kappa = 0.0;
  const LayeredField q0 = random_initial_condition(grid, p, 7, 2, 3.0, 1.0);
  const double w0 = weighted_enstrophy(q0, p);
  // dt such that the Courant number stays <= 0.2 over the whole run.
  double dt = 0.2 / (split_drift(q0, p).max_speed * grid->n() / grid->length());
  double drift_rel = 0.0, worst_j = 0.0, max_cfl = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const Integrator rk4(grid, p, dt, Scheme::Rk4, 1.0);
    LayeredField q = q0;
    worst_j = 0.0;
    max_cfl = 0.0;
    for (int n = 0; n < 1000; ++n) {
      const LayeredField psi = invert_vorticity(q, p);
      for (int j = 0; j < 2; ++j) worst_j = std::max(worst_j, std::abs(inner_product(jacobian(psi[j], q[j]), q[j])));
      double cfl = 0.0;
      q = rk4.step(q, &cfl);
      max_cfl = std::max(max_cfl, cfl);
    }
    drift_rel = std::abs(weighted_enstrophy(q, p) - w0) / w0;
    if (max_cfl <= 0.2) break;
    dt *= 0.999 * 0.2 / max_cfl;
  }
  return {max_cfl <= 0.2 && drift_rel < 1e-6 && worst_j < 1e-10,
          fmt("dt %.4f, max CFL %.3f, enstrophy drift %.3e (tol 1e-6), max |<J(psi,q),q>| %.3e (tol 1e-10)", dt,
              max_cfl, drift_rel, worst_j)};
}

// Enstrophy balance residual of the forced-dissipative run, order 1 in dt.
Verdict ac4() {
  ExperimentConfig cfg;
  const GridPtr grid = make_grid(cfg);
  const ModelParams p = make_params(cfg, grid);
  const LayeredField q0 = make_initial_condition(cfg, grid, p);
  std::vector<double> res;
  for (int level = 0; level < 3; ++level) {
    SimConfig sim;
    sim.dt = 1e-3 / (1 << level);
    sim.t_end = 0.5;
    sim.cadence = 1 << level;
    const TrajectoryRecord rec = run(q0, p, nullptr, sim);
    res.push_back(max_abs_finite(balance_residual(rec.samples)));
  }
  const double r1 = res[0] / res[1];
  const double r2 = res[1] / res[2];
  const bool ok = res[0] < 1e-3 && std::abs(r1 - 2.0) < 0.4 && std::abs(r2 - 2.0) < 0.4;
  return {ok, fmt("residual %.3e / %.3e / %.3e at dt 1e-3 / 5e-4 / 2.5e-4; ratios %.3f, %.3f", res[0], res[1],
                  res[2], r1, r2)};
}

// Error against the deterministic limit decreases as theta spreads out.
Verdict ac5() {
  ExperimentConfig cfg;
  cfg.kappa = 0.5;
  cfg.t_end = 1.0;
  cfg.dt = 1e-3;
  cfg.cadence = 10;
  cfg.alpha = 0.5;
  cfg.members = 32;
  cfg.compare_annuli = {{1, 2}, {1, 4}, {1, 8}};
  const CompareResult res = compare_experiment(cfg);
  std::string rows;
  for (const auto& r : res.rows) {
    rows += fmt("[%d,%d] %.4g+-%.2g; ", r.annulus[0], r.annulus[1], r.error.mean, r.error.std_error);
  }
  const double slope = res.fit ? res.fit->slope : std::nan("");
  return {res.strictly_decreasing && res.fit && slope >= 0.5,
          rows + fmt("log-log slope vs ||theta||_inf %.3f (need >= 0.5)", slope)};
}

ExperimentConfig longtime_profile() {
  ExperimentConfig cfg;
  cfg.kappa = 20.0;
  cfg.noise = {Annulus{1, 8}, Annulus{1, 8}};
  cfg.dt = 1e-3;
  cfg.cadence = 10;
  cfg.t_end = 1.5;
  cfg.alpha = 0.5;
  cfg.members = 32;
  cfg.longtime_tol = 1e-11;
  cfg.longtime_tbar = 0.1;
  cfg.longtime_checks = 5;
  return cfg;
}

// Contraction to the stationary solution and exponential attraction.
Verdict ac6() {
  ExperimentConfig cfg = longtime_profile();
  cfg.longtime_deterministic_only = true;
  const LongtimeResult res = longtime_experiment(cfg);
  const auto& st = res.stationary;
  bool geometric = st.iterations >= 6;
  for (std::size_t i = 1; i < st.update_norms.size(); ++i) {
    geometric = geometric && st.update_norms[i] < st.update_norms[i - 1];
  }
  const double factor = st.contraction_factor.value_or(std::nan(""));
  const bool fit_ok = res.decay_fit && res.decay_fit->r_squared > 0.99 && res.decay_fit->slope < 0.0;
  const bool ok = factor < 1.0 && geometric && st.residual < 1e-8 && fit_ok;
  return {ok, fmt("Picard: %d iterations, factor %.3e, residual %.3e; decay fit slope %.3f, R^2 %.6f over %zu "
                  "samples",
                  st.iterations, factor, st.residual, res.decay_fit ? res.decay_fit->slope : std::nan(""),
                  res.decay_fit ? res.decay_fit->r_squared : std::nan(""), res.window)};
}

// Ensemble stays within delta of the stationary solution on [Tbar, 2 Tbar].
Verdict ac7() {
  const ExperimentConfig cfg = longtime_profile();
  const LongtimeResult res = longtime_experiment(cfg);
  std::string checks;
  for (std::size_t i = 0; i < res.check_times.size(); ++i) {
    checks += fmt("t=%.3f %.3e; ", res.check_times[i], res.check_errors[i].mean);
  }
  const bool ok = res.bound_holds && res.check_times.size() == 5;
  return {ok, fmt("Tbar %.3f, delta %.3e; ", res.tbar.value_or(0.0), res.delta.value_or(0.0)) + checks};
}

// Pure transport: mean L2 norm per layer constant; quadratic variation identity.
Verdict ac8() {
  const auto grid = SpectralGrid::create(64, 2.0 * std::numbers::pi);
  ModelParams p;
  p.nu = p.r = p.beta = 0.0;
  p.s1 = p.s2 = 0.0;
  p.kappa = 0.1;
  p.advection = false;
  const NoiseConfig noise = NoiseConfig::annulus(grid, p.kappa, 1, 2, 1);
  const LayeredField q0 = random_initial_condition(grid, p, 7, 4, 3.0, 1.0);
  SimConfig sim;
  sim.dt = 1e-3;
  sim.t_end = 1.0;
  sim.cadence = 200;
  sim.seed = 1;
  const std::size_t members = 64;
  std::vector<std::vector<std::array<double, 2>>> norms(members);
  parallel_members(members, [&](std::size_t m) {
    SimConfig mc = sim;
    mc.member = m;
    integrate(q0, p, &noise, mc, [&](std::size_t, double, const LayeredField& q) {
      norms[m].push_back({std::pow(l2_norm(q[0]), 2), std::pow(l2_norm(q[1]), 2)});
    });
  });
  double worst_sigma = 0.0;
  for (int j = 0; j < 2; ++j) {
    const double start = std::pow(l2_norm(q0[j]), 2);
    for (std::size_t i = 1; i < norms[0].size(); ++i) {
      std::vector<double> col;
      for (const auto& row : norms) col.push_back(row[i][j]);
      const MeanStat s = mean_and_stderr(col);
      worst_sigma = std::max(worst_sigma, std::abs(s.mean - start) / s.std_error);
    }
  }
  double worst_qv = 0.0;
  for (auto [a, b] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 4}, {1, 8}}) {
    const NoiseConfig nc = NoiseConfig::annulus(grid, 0.3, a, b);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const LayeredField q = broadband_field(grid, p, 300 + s);
      const auto qv = quadratic_variation_density(q, nc);
      for (int j = 0; j < 2; ++j) {
        const double g = sobolev_norm(q[j], 1.0);
        worst_qv = std::max(worst_qv, std::abs(qv[j] - 2.0 * 0.3 * g * g) / (2.0 * 0.3 * g * g));
      }
    }
  }
  return {worst_sigma <= 3.0 && worst_qv < 1e-10,
          fmt("max |mean - initial| %.2f std.err over 5 times x 2 layers (m=64, need <= 3); quadratic variation "
              "error %.3e (tol 1e-10)",
              worst_sigma, worst_qv)};
}

// Strong order of the stochastic stepper under coupled refinement.
Verdict ac9() {
  ExperimentConfig cfg;
  cfg.n = 32;
  cfg.kappa = 0.1;
  const GridPtr grid = make_grid(cfg);
  const ModelParams p = make_params(cfg, grid);
  const LayeredField q0 = make_initial_condition(cfg, grid, p);
  const NoiseConfig noise = NoiseConfig::annulus(grid, cfg.kappa, 1, 4, 1);
  const int ref_exp = 15;
  const std::array<int, 4> exps{6, 7, 8, 9};
  const std::size_t members = 16;
  std::vector<std::array<double, 4>> err2(members);
  parallel_members(members, [&](std::size_t m) {
    auto endpoint = [&](int e) {
      SimConfig sim;
      sim.dt = std::ldexp(1.0, -e);
      sim.t_end = 0.5;
      sim.cadence = 1 << 20;
      sim.seed = 1;
      sim.member = m;
      sim.noise_substeps = std::uint64_t{1} << (ref_exp - e);
      return integrate(q0, p, &noise, sim, nullptr);
    };
    const LayeredField ref = endpoint(ref_exp);
    for (std::size_t i = 0; i < exps.size(); ++i) {
      const double e = vector_sobolev_norm(endpoint(exps[i]) - ref, 0.0);
      err2[m][i] = e * e;
    }
  });
  std::vector<double> dts, rms;
  std::string rows;
  for (std::size_t i = 0; i < exps.size(); ++i) {
    double acc = 0.0;
    for (const auto& e : err2) acc += e[i];
    dts.push_back(std::ldexp(1.0, -exps[i]));
    rms.push_back(std::sqrt(acc / static_cast<double>(members)));
    rows += fmt("2^-%d: %.3e; ", exps[i], rms.back());
  }
  const RateFit fit = fit_rate(dts, rms, true, true);
  return {fit.slope >= 0.4 && fit.slope <= 1.1, rows + fmt("slope %.3f (need [0.4, 1.1])", fit.slope)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"AC-1", ac1}, {"AC-2", ac2}, {"AC-3", ac3}, {"AC-4", ac4}, {"AC-5", ac5},
      {"AC-6", ac6}, {"AC-7", ac7}, {"AC-8", ac8}, {"AC-9", ac9},
  };
  std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, body] : criteria) {
    if (!selected.empty() && !selected.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %s (%.1fs) %s\n", name.c_str(), v.pass ? "PASS" : "FAIL", secs, v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
