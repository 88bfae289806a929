#pragma once

// Experiment drivers behind the command-line tool. The *_experiment functions
// return in-memory results; the cmd_* wrappers write them under output.dir.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qg2l/config.hpp"
#include "qg2l/diagnostics.hpp"
#include "qg2l/errors.hpp"
#include "qg2l/qg_dynamics.hpp"
#include "qg2l/snapshot.hpp"
#include "qg2l/stationary_solver.hpp"
#include "qg2l/time_integration.hpp"
#include "qg2l/transport_noise.hpp"

namespace qg2l {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::filesystem::path prepare_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline double json_number(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace detail

/// Writes the trajectory CSV; `errors` adds the err_Hminus_alpha column.
inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& rec,
                                 const std::optional<std::vector<double>>& errors = std::nullopt) {
  using detail::csv_number;
  std::vector<double> residual(rec.samples.size(), std::numeric_limits<double>::quiet_NaN());
  if (rec.samples.size() >= 3) residual = balance_residual(rec.samples);
  out << "time,enstrophy_weighted,grad_enstrophy,balance_residual";
  if (errors) out << ",err_Hminus_alpha";
  out << ",term_beta1,term_beta2,term_forcing,term_friction,term_Sr,term_Snu1,term_Snu2\n";
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const auto& s = rec.samples[i];
    const auto& l = s.ledger;
    out << csv_number(s.time) << ',' << csv_number(s.enstrophy_weighted) << ',' << csv_number(s.grad_enstrophy)
        << ',' << csv_number(residual[i]);
    if (errors) out << ',' << csv_number((*errors)[i]);
    out << ',' << csv_number(l.beta1) << ',' << csv_number(l.beta2) << ',' << csv_number(l.forcing) << ','
        << csv_number(l.friction) << ',' << csv_number(l.s_r) << ',' << csv_number(l.s_nu1) << ','
        << csv_number(l.s_nu2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// check

/// Test hooks for cmd_check.
struct CheckHooks {
  double theta_scale = 1.0;       ///< multiplies every theta_k before validation
  bool oversize_support = false;  ///< noise shell one beyond what the padding resolves
};

struct CheckOutcome {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string message;
};

inline std::vector<CheckOutcome> run_checks(const ExperimentConfig& cfg, const CheckHooks& hooks = {}) {
  std::vector<CheckOutcome> out;
  auto record = [&](std::string name, double value, double threshold, std::string message = {}) {
    const bool ok = std::isfinite(value) && value <= threshold;
    out.push_back({std::move(name), ok, value, threshold, ok ? std::string() : std::move(message)});
  };
  auto guarded = [&](const std::string& name, double threshold, const std::function<double()>& body) {
    try {
      record(name, body(), threshold, "value above threshold");
    } catch (const std::exception& e) {
      out.push_back({name, false, std::numeric_limits<double>::quiet_NaN(), threshold, e.what()});
    }
  };

  const GridPtr grid = make_grid(cfg);
  const ModelParams p = make_params(cfg, grid);
  const double kappa = cfg.kappa > 0.0 ? cfg.kappa : 1.0;
  const int kmax = std::min(8, grid->max_mode());
  const LayeredField q = random_initial_condition(grid, p, cfg.init_seed, kmax, 2.0, 1.0);

  // Noise validation, including the hooks.
  std::optional<NoiseConfig> noise;
  {
    LayerNoise layer = build_theta(1, 2);
    for (auto& m : layer.modes) m.theta *= hooks.theta_scale;
    try {
      noise = NoiseConfig(grid, kappa, {layer, layer}, cfg.seed);
      out.push_back({"theta_normalization", true, 0.0, 0.0, {}});
    } catch (const std::exception& e) {
      out.push_back({"theta_normalization", false, std::numeric_limits<double>::quiet_NaN(), 0.0, e.what()});
    }
    const int shell = hooks.oversize_support ? grid->padded_cutoff() - grid->n() / 2 + 1 : 2;
    try {
      NoiseConfig::annulus(grid, kappa, 1, shell, cfg.seed);
      out.push_back({"noise_support", true, static_cast<double>(shell), 0.0, {}});
    } catch (const std::exception& e) {
      out.push_back({"noise_support", false, static_cast<double>(shell), 0.0, e.what()});
    }
  }
  const NoiseConfig ref_noise = noise ? *noise : NoiseConfig::annulus(grid, kappa, 1, 2, cfg.seed);

  guarded("ito_identity", 1e-10, [&] {
    LayeredField target(grid);
    for (int j = 0; j < 2; ++j) target[j] = kappa * laplacian(q[j]);
    return vector_sobolev_norm(ito_correction(q, ref_noise) - target, 0.0) / vector_sobolev_norm(target, 0.0);
  });
  guarded("quadratic_variation", 1e-10, [&] {
    const auto qv = quadratic_variation_density(q, ref_noise);
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double g = sobolev_norm(q[j], 1.0);
      worst = std::max(worst, std::abs(qv[j] - 2.0 * kappa * g * g) / (2.0 * kappa * g * g));
    }
    return worst;
  });
  guarded("inversion_roundtrip", 1e-12, [&] {
    const LayeredField back = apply_vorticity_operator(invert_vorticity(q, p), p);
    return vector_sobolev_norm(back - q, 0.0) / vector_sobolev_norm(q, 0.0);
  });
  guarded("jacobian_orthogonality", 1e-12, [&] {
    const LayeredField psi = invert_vorticity(q, p);
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      const ScalarField jac = jacobian(psi[j], q[j]);
      worst = std::max(worst, std::abs(inner_product(jac, q[j])) / (l2_norm(jac) * l2_norm(q[j])));
    }
    return worst;
  });
  guarded("hermitian_symmetry", 1e-12, [&] {
    const LayeredField d = drift(q, p);
    return std::max(hermitian_defect(d[0]), hermitian_defect(d[1])) / vector_sobolev_norm(d, 0.0);
  });
  guarded("conservation", 1e-8, [&] {
    ModelParams inviscid = p;
    inviscid.nu = inviscid.r = inviscid.beta = inviscid.kappa = 0.0;
    inviscid.forcing.reset();
    const Integrator rk4(grid, inviscid, 1e-3, Scheme::Rk4, cfg.cfl);
    LayeredField x = q;
    const double w0 = weighted_enstrophy(x, inviscid);
    for (int i = 0; i < 50; ++i) x = rk4.step(x);
    return std::abs(weighted_enstrophy(x, inviscid) - w0) / w0;
  });
  guarded("balance_residual", 1e-3, [&] {
    SimConfig sim;
    sim.dt = std::min(cfg.dt, 1e-3);
    sim.t_end = 20 * sim.dt;
    sim.cfl_limit = cfg.cfl;
    const TrajectoryRecord rec = run(make_initial_condition(cfg, grid, p), p, nullptr, sim);
    const auto res = balance_residual(rec.samples);
    return max_abs_finite(res);
  });
  return out;
}

inline int cmd_check(const ExperimentConfig& cfg, std::ostream& report, const CheckHooks& hooks = {}) {
  const auto outcomes = run_checks(cfg, hooks);
  Json doc;
  bool all = true;
  doc["checks"] = Json::array();
  for (const auto& c : outcomes) {
    all = all && c.pass;
    Json item;
    item["name"] = c.name;
    item["pass"] = c.pass;
    item["value"] = detail::json_number(c.value);
    item["threshold"] = c.threshold;
    if (!c.message.empty()) item["message"] = c.message;
    doc["checks"].push_back(item);
  }
  doc["pass"] = all;
  report << doc.dump(2) << '\n';
  return all ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulationResult {
  TrajectoryRecord record;
  std::optional<std::vector<double>> errors;  ///< H^{-alpha} distance to the deterministic run
};

inline SimulationResult simulate_experiment(const ExperimentConfig& cfg) {
  const GridPtr grid = make_grid(cfg);
  const ModelParams p = make_params(cfg, grid);
  const NoiseConfig noise = make_noise(cfg, grid);
  const LayeredField q0 = make_initial_condition(cfg, grid, p);
  SimConfig sim = make_sim(cfg);
  SimulationResult res;
  if (noise.empty()) {
    sim.store_snapshots = cfg.output_snapshots;
    res.record = run(q0, p, nullptr, sim);
    return res;
  }
  sim.store_snapshots = true;
  res.record = run(q0, p, &noise, sim);
  const TrajectoryRecord ref = run(q0, p, nullptr, sim);
  std::vector<double> err;
  for (std::size_t i = 0; i < ref.snapshots.size(); ++i) {
    err.push_back(error_norm(res.record.snapshots[i], ref.snapshots[i], cfg.alpha));
  }
  res.errors = std::move(err);
  if (!cfg.output_snapshots) res.record.snapshots.clear();
  return res;
}

inline int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  const SimulationResult res = simulate_experiment(cfg);
  const auto dir = detail::prepare_output_dir(cfg.output_dir);
  std::ostringstream csv;
  write_trajectory_csv(csv, res.record, res.errors);
  detail::write_text(dir / "trajectory.csv", csv.str());
  detail::write_text(dir / "effective.cfg", emit_config(cfg));
  if (cfg.output_snapshots) {
    const GridPtr grid = make_grid(cfg);
    const auto constants = Snapshot::pack(make_params(cfg, grid));
    for (std::size_t i = 0; i < res.record.snapshots.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "snapshot_%06zu.qg2l", i);
      write_snapshot((dir / name).string(),
                     Snapshot{res.record.snapshots[i], res.record.samples[i].time, cfg.seed, constants});
    }
  }
  log << "simulate: " << res.record.samples.size() << " samples, " << res.record.steps
      << " steps, max CFL " << res.record.max_cfl << ", sup enstrophy " << res.record.sup_enstrophy()
      << " -> " << (dir / "trajectory.csv").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

struct CompareRow {
  Annulus annulus{};
  std::size_t modes = 0;  ///< |K| counting both halves
  double theta_sup = 0.0;
  MeanStat error;  ///< E sup_t ||q - qbar||^2_{H^-alpha}
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::optional<RateFit> fit;  ///< log-log fit of error against theta_sup
  bool strictly_decreasing = false;  ///< each step down by more than 2 standard errors
};

inline CompareResult compare_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  if (cfg.compare_annuli.empty()) throw ConfigError("compare needs at least one annulus");
  const GridPtr grid = make_grid(cfg);
  const ModelParams p = make_params(cfg, grid);
  const LayeredField q0 = make_initial_condition(cfg, grid, p);
  SimConfig sim = make_sim(cfg);
  sim.store_snapshots = true;
  const TrajectoryRecord ref = run(q0, p, nullptr, sim);
  sim.store_snapshots = false;

  CompareResult res;
  for (const auto& a : cfg.compare_annuli) {
    const LayerNoise layer = build_theta(a[0], a[1]);
    const NoiseConfig noise = cfg.kappa > 0.0 ? NoiseConfig(grid, cfg.kappa, {layer, layer}, cfg.seed)
                                              : NoiseConfig::none(grid, cfg.seed);
    const EnsembleResult ens = run_ensemble(q0, p, noise, sim, static_cast<std::size_t>(cfg.members),
                                            ref.snapshots, cfg.alpha, threads);
    res.rows.push_back({a, layer.modes.size() * 2, layer.theta_sup(), ens.sup_stat});
  }
  res.strictly_decreasing = res.rows.size() >= 2;
  for (std::size_t i = 0; i + 1 < res.rows.size(); ++i) {
    const auto& x = res.rows[i].error;
    const auto& y = res.rows[i + 1].error;
    const double se = std::sqrt(x.std_error * x.std_error + y.std_error * y.std_error);
    if (!(x.mean - y.mean > 2.0 * se)) res.strictly_decreasing = false;
  }
  std::vector<double> xs, ys;
  bool positive = true;
  for (const auto& r : res.rows) {
    xs.push_back(r.theta_sup);
    ys.push_back(r.error.mean);
    positive = positive && r.error.mean > 0.0;
  }
  if (res.rows.size() >= 3 && positive) {
    try {
      res.fit = fit_rate(xs, ys, true, true);
    } catch (const ConfigError&) {
      // equal theta_sup across annuli: no exponent
    }
  }
  return res;
}

inline int cmd_compare(const ExperimentConfig& cfg, std::ostream& log) {
  const CompareResult res = compare_experiment(cfg);
  const auto dir = detail::prepare_output_dir(cfg.output_dir);
  std::ostringstream csv;
  csv << "annulus_min,annulus_max,modes,theta_sup,mean_sup_err2,std_error\n";
  for (const auto& r : res.rows) {
    csv << r.annulus[0] << ',' << r.annulus[1] << ',' << r.modes << ',' << detail::csv_number(r.theta_sup) << ','
        << detail::csv_number(r.error.mean) << ',' << detail::csv_number(r.error.std_error) << '\n';
  }
  detail::write_text(dir / "compare.csv", csv.str());
  Json doc;
  doc["alpha"] = cfg.alpha;
  doc["members"] = cfg.members;
  doc["sample_interval"] = cfg.dt * cfg.cadence;
  doc["strictly_decreasing"] = res.strictly_decreasing;
  if (res.fit) {
    doc["exponent"] = res.fit->slope;
    doc["r_squared"] = res.fit->r_squared;
  } else {
    doc["exponent"] = nullptr;
  }
  detail::write_text(dir / "compare.json", doc.dump(2) + "\n");
  detail::write_text(dir / "effective.cfg", emit_config(cfg));
  log << csv.str();
  log << "exponent: " << (res.fit ? detail::csv_number(res.fit->slope) : std::string("n/a"))
      << ", strictly decreasing: " << (res.strictly_decreasing ? "yes" : "no") << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// longtime

struct LongtimeResult {
  StationaryReport stationary;
  std::vector<double> times;
  std::vector<double> gap_l2;     ///< ||qbar(t) - qtilde||
  std::vector<double> gap_alpha;  ///< ||qbar(t) - qtilde||_{H^-alpha}
  std::vector<double> enstrophy;  ///< |||qbar(t)|||^2
  std::optional<RateFit> decay_fit;  ///< log gap_l2 against t over the decay window
  std::size_t window = 0;           ///< number of samples in the decay window
  std::optional<double> tbar;
  std::optional<double> delta;
  std::vector<double> check_times;
  std::vector<MeanStat> check_errors;  ///< E ||q(t) - qtilde||^2_{H^-alpha}
  bool bound_holds = false;
};

inline LongtimeResult longtime_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
  const GridPtr grid = make_grid(cfg);
  const ModelParams p = make_params(cfg, grid);
  const ScalarField forcing = p.forcing ? *p.forcing : ScalarField(grid);
  LongtimeResult res;
  res.stationary = picard_solve(p, forcing, cfg.longtime_tol, cfg.longtime_max_iter);
  const LayeredField& qt = *res.stationary.solution;

  const LayeredField q0 = make_initial_condition(cfg, grid, p);
  const SimConfig sim = make_sim(cfg);
  integrate(q0, p, nullptr, sim, [&](std::size_t, double t, const LayeredField& q) {
    res.times.push_back(t);
    res.gap_l2.push_back(vector_sobolev_norm(q - qt, 0.0));
    res.gap_alpha.push_back(error_norm(q, qt, cfg.alpha));
    res.enstrophy.push_back(weighted_enstrophy(q, p));
  });

  // Decay window: until the gap reaches the solver's accuracy floor.
  const double floor = std::max(1e-8 * res.gap_l2.front(), 100.0 * cfg.longtime_tol);
  std::size_t end = 0;
  while (end < res.gap_l2.size() && res.gap_l2[end] > floor) ++end;
  res.window = end;
  if (end >= 3) {
    res.decay_fit = fit_rate(std::span(res.times).first(end), std::span(res.gap_l2).first(end), false, true);
  }

  const double sample_dt = cfg.dt * cfg.cadence;
  if (cfg.longtime_tbar > 0.0) {
    const double idx = std::round(cfg.longtime_tbar / sample_dt);
    if (std::abs(idx * sample_dt - cfg.longtime_tbar) > 1e-9 * cfg.longtime_tbar || idx >= res.times.size()) {
      throw ConfigError("longtime.tbar must be a sample time within sim.T");
    }
    res.tbar = res.times[static_cast<std::size_t>(idx)];
    const double gap = res.gap_alpha[static_cast<std::size_t>(idx)];
    res.delta = cfg.longtime_delta > 0.0 ? cfg.longtime_delta : 4.0 * gap * gap;
  } else if (cfg.longtime_delta > 0.0) {
    res.delta = cfg.longtime_delta;
    std::size_t i = res.gap_alpha.size();
    while (i > 0 && res.gap_alpha[i - 1] * res.gap_alpha[i - 1] <= cfg.longtime_delta / 4.0) --i;
    if (i == res.gap_alpha.size()) throw ConfigError("gap stays above delta/4 within sim.T; increase sim.T");
    res.tbar = res.times[i];
  }

  if (cfg.longtime_deterministic_only || !cfg.stochastic()) return res;
  if (!res.tbar) throw ConfigError("stochastic longtime needs longtime.tbar or longtime.delta");
  if (!(*res.tbar > 0.0)) {
    // Gap already within delta/4 at t = 0; check on [0, 0] is degenerate.
    throw ConfigError("Tbar is 0; choose a smaller delta");
  }
  const double steps_tbar = std::round(*res.tbar / cfg.dt);
  const auto intervals = static_cast<std::uint64_t>(cfg.longtime_checks - 1);
  const auto steps = static_cast<std::uint64_t>(steps_tbar);
  if (steps % intervals != 0) throw ConfigError("Tbar / dt must be divisible by longtime.checks - 1");
  SimConfig ens_sim = sim;
  ens_sim.t_end = 2.0 * static_cast<double>(steps) * cfg.dt;
  ens_sim.cadence = static_cast<int>(steps / intervals);
  const std::size_t samples = 2 * intervals + 1;
  const std::vector<LayeredField> targets(samples, qt);
  const NoiseConfig noise = make_noise(cfg, grid);
  const EnsembleResult ens = run_ensemble(q0, p, noise, ens_sim, static_cast<std::size_t>(cfg.members), targets,
                                          cfg.alpha, threads);
  res.bound_holds = true;
  for (std::size_t i = intervals; i < samples; ++i) {
    res.check_times.push_back(ens.sample_times[i]);
    res.check_errors.push_back(ens.per_time[i]);
    if (!(ens.per_time[i].mean <= *res.delta)) res.bound_holds = false;
  }
  return res;
}

inline int cmd_longtime(const ExperimentConfig& cfg, std::ostream& log) {
  const LongtimeResult res = longtime_experiment(cfg);
  const auto dir = detail::prepare_output_dir(cfg.output_dir);
  using detail::csv_number;
  std::ostringstream csv;
  csv << "time,gap_l2,gap_Hminus_alpha,enstrophy_weighted\n";
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    csv << csv_number(res.times[i]) << ',' << csv_number(res.gap_l2[i]) << ',' << csv_number(res.gap_alpha[i])
        << ',' << csv_number(res.enstrophy[i]) << '\n';
  }
  detail::write_text(dir / "longtime.csv", csv.str());

  Json doc;
  const auto& st = res.stationary;
  doc["picard"]["iterations"] = st.iterations;
  doc["picard"]["update_norms"] = st.update_norms;
  doc["picard"]["residual"] = st.residual;
  doc["picard"]["contraction_factor"] =
      st.contraction_factor ? Json(*st.contraction_factor) : Json(nullptr);
  doc["picard"]["m_kappa"] = std::isfinite(st.m_kappa) ? Json(st.m_kappa) : Json(nullptr);
  doc["picard"]["grad_norm"] = vector_sobolev_norm(*st.solution, 1.0);
  if (res.decay_fit) {
    doc["decay"]["rate"] = -res.decay_fit->slope;
    doc["decay"]["r_squared"] = res.decay_fit->r_squared;
    doc["decay"]["window_samples"] = res.window;
  }
  doc["tbar"] = res.tbar ? Json(*res.tbar) : Json(nullptr);
  doc["delta"] = res.delta ? Json(*res.delta) : Json(nullptr);
  if (!res.check_times.empty()) {
    Json checks = Json::array();
    for (std::size_t i = 0; i < res.check_times.size(); ++i) {
      checks.push_back({{"time", res.check_times[i]},
                        {"mean", res.check_errors[i].mean},
                        {"std_error", res.check_errors[i].std_error}});
    }
    doc["ensemble"]["members"] = cfg.members;
    doc["ensemble"]["checks"] = checks;
    doc["ensemble"]["bound_holds"] = res.bound_holds;
  }
  detail::write_text(dir / "longtime.json", doc.dump(2) + "\n");
  detail::write_text(dir / "effective.cfg", emit_config(cfg));
  log << doc.dump(2) << '\n';
  if (!res.check_times.empty() && !res.bound_holds) return kExitNumerical;
  return kExitOk;
}

/// Runs `body`, mapping library exceptions to exit codes.
inline int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace qg2l
