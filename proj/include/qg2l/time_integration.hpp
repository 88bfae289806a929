#pragma once

// Time steppers for the deterministic and Ito two-layer systems.
//
// The stiff diagonal part -(kappa + nu) lambda_k is integrated exactly with
// E_k = exp(-(kappa + nu) lambda_k dt). The default scheme is the exponential
// Euler method
//   q' = E q + phi N(q) dt-weighted,   phi_k = (1 - E_k) / ((kappa + nu) lambda_k),
// and the stochastic step adds the noise increment evaluated at the step start
// and propagated through E (exponential Euler-Maruyama). RK4 is a plain
// explicit integrator of the full drift, for deterministic runs only.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qg2l/diagnostics.hpp"
#include "qg2l/errors.hpp"
#include "qg2l/params.hpp"
#include "qg2l/qg_dynamics.hpp"
#include "qg2l/spectral.hpp"
#include "qg2l/transport_noise.hpp"

namespace qg2l {

enum class Scheme { ExponentialEuler, Rk4 };

inline std::string to_string(Scheme s) { return s == Scheme::Rk4 ? "rk4" : "imex"; }

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "imex" || s == "exponential-euler") return Scheme::ExponentialEuler;
  if (s == "rk4") return Scheme::Rk4;
  throw ConfigError("unknown scheme '" + s + "' (expected imex or rk4)");
}

/// Fixed-step integrator for one (grid, params, dt).
class Integrator {
 public:
  Integrator(GridPtr grid, ModelParams params, double dt, Scheme scheme = Scheme::ExponentialEuler,
             double cfl_limit = 0.5)
      : grid_(std::move(grid)), params_(std::move(params)), dt_(dt), scheme_(scheme), cfl_limit_(cfl_limit) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
    params_.validate();
    const double rate = stiff_rate(params_, true);
    decay_.assign(grid_->size(), 1.0);
    phi_.assign(grid_->size(), dt_);
    for (std::size_t idx : grid_->retained_indices()) {
      const double x = rate * grid_->eigenvalue(idx) * dt_;
      decay_[idx] = std::exp(-x);
      phi_[idx] = x > 0.0 ? -std::expm1(-x) / (rate * grid_->eigenvalue(idx)) : dt_;
    }
  }

  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }
  const ModelParams& params() const { return params_; }
  const GridPtr& grid_ptr() const { return grid_; }

  /// Courant number dt * max|grad^perp psi| * N / L.
  double courant(double max_speed) const { return dt_ * max_speed * grid_->n() / grid_->length(); }

  /// One deterministic step; `cfl` receives the Courant number at the step start.
  LayeredField step(const LayeredField& q, double* cfl = nullptr) const {
    if (scheme_ == Scheme::Rk4) return step_rk4(q, cfl);
    DriftSplit split = split_drift(q, params_);
    guard(split.max_speed, cfl);
    return combine(q, split.nonstiff, nullptr);
  }

  /// One exponential Euler-Maruyama step of the Ito system.
  LayeredField step(const LayeredField& q, const NoiseConfig& noise, const WienerIncrement& inc,
                    double* cfl = nullptr) const {
    if (scheme_ != Scheme::ExponentialEuler) throw ConfigError("stochastic runs require the imex scheme");
    DriftSplit split = split_drift(q, params_);
    guard(split.max_speed, cfl);
    if (noise.empty()) return combine(q, split.nonstiff, nullptr);
    if (std::abs(inc.dt - dt_) > 1e-12 * dt_) throw ConfigError("increment dt differs from the step size");
    const LayeredField kick = apply_transport(q, inc, noise);
    return combine(q, split.nonstiff, &kick);
  }

 private:
  void guard(double max_speed, double* cfl) const {
    const double c = courant(max_speed);
    if (cfl != nullptr) *cfl = c;
    if (!(c <= cfl_limit_)) {
      throw NumericalError("CFL violation: Courant number " + std::to_string(c) + " exceeds " +
                           std::to_string(cfl_limit_));
    }
  }

  LayeredField combine(const LayeredField& q, const LayeredField& nonstiff, const LayeredField* kick) const {
    LayeredField out(grid_);
    for (int j = 0; j < 2; ++j) {
      for (std::size_t idx : grid_->retained_indices()) {
        Complex v = decay_[idx] * q[j][idx] + phi_[idx] * nonstiff[j][idx];
        if (kick != nullptr) v += decay_[idx] * (*kick)[j][idx];
        out[j][idx] = v;
      }
    }
    return out;
  }

  LayeredField full_drift(const LayeredField& q, double* max_speed) const {
    DriftSplit split = split_drift(q, params_);
    if (max_speed != nullptr) *max_speed = split.max_speed;
    const double rate = stiff_rate(params_, true);
    for (int j = 0; j < 2; ++j) {
      for (std::size_t idx : grid_->retained_indices()) {
        split.nonstiff[j][idx] -= rate * grid_->eigenvalue(idx) * q[j][idx];
      }
    }
    return std::move(split.nonstiff);
  }

  LayeredField step_rk4(const LayeredField& q, double* cfl) const {
    double speed = 0.0;
    const LayeredField k1 = full_drift(q, &speed);
    guard(speed, cfl);
    LayeredField tmp = q;
    tmp.axpy(0.5 * dt_, k1);
    const LayeredField k2 = full_drift(tmp, nullptr);
    tmp = q;
    tmp.axpy(0.5 * dt_, k2);
    const LayeredField k3 = full_drift(tmp, nullptr);
    tmp = q;
    tmp.axpy(dt_, k3);
    const LayeredField k4 = full_drift(tmp, nullptr);
    LayeredField out = q;
    out.axpy(dt_ / 6.0, k1);
    out.axpy(dt_ / 3.0, k2);
    out.axpy(dt_ / 3.0, k3);
    out.axpy(dt_ / 6.0, k4);
    return out;
  }

  GridPtr grid_;
  ModelParams params_;
  double dt_;
  Scheme scheme_;
  double cfl_limit_;
  std::vector<double> decay_;
  std::vector<double> phi_;
};

inline LayeredField step_deterministic(const LayeredField& q, const ModelParams& p, double dt,
                                       Scheme scheme = Scheme::ExponentialEuler) {
  return Integrator(q.grid_ptr(), p, dt, scheme).step(q);
}

inline LayeredField step_stochastic(const LayeredField& q, const ModelParams& p, const NoiseConfig& noise,
                                    const WienerIncrement& inc, double dt) {
  return Integrator(q.grid_ptr(), p, dt).step(q, noise, inc);
}

// ---------------------------------------------------------------------------
// Runs

struct SimConfig {
  double dt = 1e-3;
  double t_end = 0.0;
  int cadence = 1;  ///< steps between samples
  Scheme scheme = Scheme::ExponentialEuler;
  std::uint64_t seed = 0;
  std::uint64_t member = 0;
  /// Each step's increment is the sum of this many increments of the finest
  /// stream (dt / substeps), so runs at different dt share one Brownian path.
  std::uint64_t noise_substeps = 1;
  double cfl_limit = 0.5;
  bool store_snapshots = false;

  std::uint64_t steps() const {
    if (!(t_end >= 0.0)) throw ConfigError("T must be >= 0");
    const double n = std::round(t_end / dt);
    if (std::abs(n * dt - t_end) > 1e-9 * std::max(1.0, t_end)) {
      throw ConfigError("T must be an integer multiple of dt");
    }
    return static_cast<std::uint64_t>(n);
  }

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (t_end > 0.0 && t_end < dt * (1.0 - 1e-12)) throw ConfigError("T must be 0 or at least dt");
    if (cadence < 1) throw ConfigError("cadence must be >= 1");
    if (noise_substeps < 1) throw ConfigError("noise_substeps must be >= 1");
    (void)steps();
  }
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  std::vector<LayeredField> snapshots;  ///< one per sample when requested
  std::optional<LayeredField> final_state;
  double max_cfl = 0.0;
  std::uint64_t steps = 0;

  std::vector<double> times() const {
    std::vector<double> t;
    for (const auto& s : samples) t.push_back(s.time);
    return t;
  }
  /// Empirical R_T^2: largest sampled |||q|||^2.
  double sup_enstrophy() const {
    double s = 0.0;
    for (const auto& x : samples) s = std::max(s, x.enstrophy_weighted);
    return s;
  }
};

/// Observer called at every sample: (sample index, time, state).
using SampleObserver = std::function<void(std::size_t, double, const LayeredField&)>;

/// Integrates from q0; stochastic when `noise` is non-null and non-empty.
/// Returns the final state; `max_cfl` receives the largest Courant number seen.
inline LayeredField integrate(const LayeredField& q0, const ModelParams& p, const NoiseConfig* noise,
                              const SimConfig& cfg, const SampleObserver& observe, double* max_cfl = nullptr) {
  cfg.validate();
  if (noise != nullptr && !noise->empty() && std::abs(noise->kappa() - p.kappa) > 0.0) {
    throw ConfigError("noise kappa differs from params.kappa");
  }
  const Integrator integrator(q0.grid_ptr(), p, cfg.dt, cfg.scheme, cfg.cfl_limit);
  const bool stochastic = noise != nullptr && !noise->empty();
  const NoiseStream stream{cfg.seed, cfg.member};
  const std::uint64_t n = cfg.steps();
  const double fine_dt = cfg.dt / static_cast<double>(cfg.noise_substeps);
  LayeredField q = q0;
  double worst = 0.0;
  std::size_t sample = 0;
  if (observe) observe(sample++, 0.0, q);
  for (std::uint64_t step = 0; step < n; ++step) {
    double cfl = 0.0;
    if (stochastic) {
      WienerIncrement inc =
          coarse_increment(*noise, stream, step * cfg.noise_substeps, cfg.noise_substeps, fine_dt);
      inc.dt = cfg.dt;
      q = integrator.step(q, *noise, inc, &cfl);
    } else {
      q = integrator.step(q, &cfl);
    }
    worst = std::max(worst, cfl);
    if ((step + 1) % static_cast<std::uint64_t>(cfg.cadence) == 0 && observe) {
      observe(sample++, static_cast<double>(step + 1) * cfg.dt, q);
    }
  }
  if (max_cfl != nullptr) *max_cfl = worst;
  return q;
}

/// Trajectory with diagnostics at the configured cadence.
inline TrajectoryRecord run(const LayeredField& q0, const ModelParams& p, const NoiseConfig* noise,
                            const SimConfig& cfg) {
  TrajectoryRecord rec;
  rec.steps = cfg.steps();
  LayeredField last = integrate(
      q0, p, noise, cfg,
      [&](std::size_t, double t, const LayeredField& q) {
        TrajectorySample s;
        s.time = t;
        s.enstrophy_weighted = weighted_enstrophy(q, p);
        s.ledger = balance_terms(q, p, t);
        s.grad_enstrophy = s.ledger.grad_enstrophy;
        rec.samples.push_back(s);
        if (cfg.store_snapshots) rec.snapshots.push_back(q);
      },
      &rec.max_cfl);
  rec.final_state = std::move(last);
  return rec;
}

// ---------------------------------------------------------------------------
// Ensembles

struct EnsembleResult {
  std::vector<double> sample_times;
  /// errors[m][i] = ||q_m(t_i) - target_i||^2_{H^-alpha}
  std::vector<std::vector<double>> errors;
  std::vector<double> member_sup;  ///< sup over sampled times, per member
  MeanStat sup_stat;               ///< mean and standard error of member_sup
  std::vector<MeanStat> per_time;  ///< mean and standard error at each sample time
};

/// Runs `count` members in parallel; `body(member)` must be independent per member.
template <class Body>
void parallel_members(std::size_t count, Body&& body, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t m = next.fetch_add(1);
      if (m >= count) return;
      try {
        body(m);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Monte Carlo estimate of E sup_t ||q - target||^2_{H^-alpha} over `members`
/// independent noise realisations (member index = stream member).
/// `targets` holds one field per sample time (e.g. a deterministic reference).
inline EnsembleResult run_ensemble(const LayeredField& q0, const ModelParams& p, const NoiseConfig& noise,
                                   const SimConfig& cfg, std::size_t members,
                                   const std::vector<LayeredField>& targets, double alpha, unsigned threads = 0) {
  if (members < 1) throw ConfigError("ensemble needs at least one member");
  const std::size_t samples = cfg.steps() / static_cast<std::uint64_t>(cfg.cadence) + 1;
  if (targets.size() != samples) throw ConfigError("reference does not match the sample times of the ensemble");
  for (const auto& t : targets) {
    if (!same_grid(t.grid(), q0.grid())) throw ConfigError("grid mismatch between reference and ensemble");
  }
  EnsembleResult res;
  res.errors.assign(members, std::vector<double>(samples, 0.0));
  for (std::size_t i = 0; i < samples; ++i) {
    res.sample_times.push_back(static_cast<double>(i * static_cast<std::size_t>(cfg.cadence)) * cfg.dt);
  }
  parallel_members(
      members,
      [&](std::size_t m) {
        SimConfig mc = cfg;
        mc.member = m;
        auto& row = res.errors[m];
        integrate(q0, p, &noise, mc, [&](std::size_t i, double, const LayeredField& q) {
          const double e = error_norm(q, targets[i], alpha);
          row[i] = e * e;
        });
      },
      threads);
  for (const auto& row : res.errors) res.member_sup.push_back(*std::max_element(row.begin(), row.end()));
  res.sup_stat = mean_and_stderr(res.member_sup);
  for (std::size_t i = 0; i < samples; ++i) {
    std::vector<double> col;
    for (const auto& row : res.errors) col.push_back(row[i]);
    res.per_time.push_back(mean_and_stderr(col));
  }
  return res;
}

}  // namespace qg2l
