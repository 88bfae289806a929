#pragma once

// Experiment configuration.
//
// Grammar: one `section.key = value` per line, `#` starts a comment, blank
// lines ignored. Lists are comma separated; a mode or annulus is two
// whitespace separated integers, e.g.
//
//   forcing.modes = 1 0, 0 1
//   forcing.amplitudes = 1, 1
//   noise.layer1 = 1 8        # annulus 1 <= |k| <= 8, or `none`
//   compare.annuli = 1 2, 1 4, 1 8
//
// Unknown or repeated keys are rejected.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qg2l/diagnostics.hpp"
#include "qg2l/errors.hpp"
#include "qg2l/params.hpp"
#include "qg2l/spectral.hpp"
#include "qg2l/time_integration.hpp"
#include "qg2l/transport_noise.hpp"

namespace qg2l {

using Annulus = std::array<int, 2>;

struct ForcingMode {
  Wavevector k;
  double amplitude = 0.0;  ///< physical amplitude a of a cos(2 pi k.x / L)
  bool operator==(const ForcingMode& o) const {
    return k.k1 == o.k.k1 && k.k2 == o.k.k2 && amplitude == o.amplitude;
  }
};

struct ExperimentConfig {
  int n = 64;
  double length = 2.0 * std::numbers::pi;

  double nu = 1e-3;
  double r = 0.1;
  double beta = 1.0;
  double kappa = 0.0;
  double h1 = 1.0;
  double h2 = 1.0;
  double s1 = 1.0;
  double s2 = 1.0;
  bool advection = true;

  std::vector<ForcingMode> forcing{{{1, 0}, 1.0}, {{0, 1}, 1.0}};
  std::array<std::optional<Annulus>, 2> noise{};

  double dt = 1e-3;
  double t_end = 1.0;
  int cadence = 10;
  Scheme scheme = Scheme::ExponentialEuler;
  int members = 32;
  std::uint64_t seed = 1;
  double alpha = 0.5;
  int noise_substeps = 1;
  double cfl = 0.5;

  std::uint64_t init_seed = 7;
  int init_kmax = 4;
  double init_slope = 3.0;
  double init_enstrophy = 1.0;  ///< target |||q0|||^2

  std::vector<Annulus> compare_annuli{{1, 2}, {1, 4}, {1, 8}};

  double longtime_tol = 1e-10;
  int longtime_max_iter = 200;
  double longtime_delta = 0.0;  ///< 0: derive from longtime_tbar
  double longtime_tbar = 0.0;
  int longtime_checks = 5;
  bool longtime_deterministic_only = false;

  std::string output_dir = "out";
  bool output_snapshots = false;

  bool operator==(const ExperimentConfig&) const = default;

  bool stochastic() const { return kappa > 0.0 && (noise[0] || noise[1]); }
  void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

inline std::array<int, 2> parse_pair(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::string a, b, extra;
  if (!(in >> a >> b) || (in >> extra)) throw ConfigError("expected two integers for " + key + ": '" + text + "'");
  return {parse_number<int>(key, a), parse_number<int>(key, b)};
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses config text. `origin` labels error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config") {
  using detail::parse_number;
  ExperimentConfig c;
  std::vector<double> amplitudes;
  std::vector<Wavevector> modes;
  bool have_modes = false, have_amps = false;

  auto optional_annulus = [](const std::string& key, const std::string& v) -> std::optional<Annulus> {
    if (v == "none") return std::nullopt;
    return detail::parse_pair(key, v);
  };
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters{
      {"grid.N", [&](auto& k, auto& v) { c.n = parse_number<int>(k, v); }},
      {"grid.L", [&](auto& k, auto& v) { c.length = parse_number<double>(k, v); }},
      {"params.nu", [&](auto& k, auto& v) { c.nu = parse_number<double>(k, v); }},
      {"params.r", [&](auto& k, auto& v) { c.r = parse_number<double>(k, v); }},
      {"params.beta", [&](auto& k, auto& v) { c.beta = parse_number<double>(k, v); }},
      {"params.kappa", [&](auto& k, auto& v) { c.kappa = parse_number<double>(k, v); }},
      {"params.h1", [&](auto& k, auto& v) { c.h1 = parse_number<double>(k, v); }},
      {"params.h2", [&](auto& k, auto& v) { c.h2 = parse_number<double>(k, v); }},
      {"params.S1", [&](auto& k, auto& v) { c.s1 = parse_number<double>(k, v); }},
      {"params.S2", [&](auto& k, auto& v) { c.s2 = parse_number<double>(k, v); }},
      {"params.advection", [&](auto& k, auto& v) { c.advection = detail::parse_bool(k, v); }},
      {"forcing.modes",
       [&](auto& k, auto& v) {
         have_modes = true;
         if (v == "none") return;
         for (const auto& item : detail::split(v, ',')) {
           auto [a, b] = detail::parse_pair(k, item);
           modes.push_back({a, b});
         }
       }},
      {"forcing.amplitudes",
       [&](auto& k, auto& v) {
         have_amps = true;
         if (v == "none") return;
         for (const auto& item : detail::split(v, ',')) amplitudes.push_back(parse_number<double>(k, item));
       }},
      {"noise.layer1", [&](auto& k, auto& v) { c.noise[0] = optional_annulus(k, v); }},
      {"noise.layer2", [&](auto& k, auto& v) { c.noise[1] = optional_annulus(k, v); }},
      {"sim.dt", [&](auto& k, auto& v) { c.dt = parse_number<double>(k, v); }},
      {"sim.T", [&](auto& k, auto& v) { c.t_end = parse_number<double>(k, v); }},
      {"sim.cadence", [&](auto& k, auto& v) { c.cadence = parse_number<int>(k, v); }},
      {"sim.scheme", [&](auto&, auto& v) { c.scheme = scheme_from_string(v); }},
      {"sim.members", [&](auto& k, auto& v) { c.members = parse_number<int>(k, v); }},
      {"sim.seed", [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"sim.alpha", [&](auto& k, auto& v) { c.alpha = parse_number<double>(k, v); }},
      {"sim.noise_substeps", [&](auto& k, auto& v) { c.noise_substeps = parse_number<int>(k, v); }},
      {"sim.cfl", [&](auto& k, auto& v) { c.cfl = parse_number<double>(k, v); }},
      {"init.seed", [&](auto& k, auto& v) { c.init_seed = parse_number<std::uint64_t>(k, v); }},
      {"init.kmax", [&](auto& k, auto& v) { c.init_kmax = parse_number<int>(k, v); }},
      {"init.slope", [&](auto& k, auto& v) { c.init_slope = parse_number<double>(k, v); }},
      {"init.enstrophy", [&](auto& k, auto& v) { c.init_enstrophy = parse_number<double>(k, v); }},
      {"compare.annuli",
       [&](auto& k, auto& v) {
         c.compare_annuli.clear();
         for (const auto& item : detail::split(v, ',')) c.compare_annuli.push_back(detail::parse_pair(k, item));
       }},
      {"longtime.tol", [&](auto& k, auto& v) { c.longtime_tol = parse_number<double>(k, v); }},
      {"longtime.max_iter", [&](auto& k, auto& v) { c.longtime_max_iter = parse_number<int>(k, v); }},
      {"longtime.delta", [&](auto& k, auto& v) { c.longtime_delta = parse_number<double>(k, v); }},
      {"longtime.tbar", [&](auto& k, auto& v) { c.longtime_tbar = parse_number<double>(k, v); }},
      {"longtime.checks", [&](auto& k, auto& v) { c.longtime_checks = parse_number<int>(k, v); }},
      {"longtime.deterministic_only",
       [&](auto& k, auto& v) { c.longtime_deterministic_only = detail::parse_bool(k, v); }},
      {"output.dir", [&](auto&, auto& v) { c.output_dir = v; }},
      {"output.snapshots", [&](auto& k, auto& v) { c.output_snapshots = detail::parse_bool(k, v); }},
  };

  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'section.key = value'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (seen[key]++ > 0) throw ConfigError(where + "repeated key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "empty value for '" + key + "'");
    try {
      it->second(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (have_modes || have_amps) {
    if (modes.size() != amplitudes.size()) {
      throw ConfigError(origin + ": forcing.modes and forcing.amplitudes differ in length");
    }
    c.forcing.clear();
    for (std::size_t i = 0; i < modes.size(); ++i) c.forcing.push_back({modes[i], amplitudes[i]});
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// Canonical text of the configuration; parse_config(emit_config(c)) == c.
inline std::string emit_config(const ExperimentConfig& c) {
  using detail::format_double;
  std::ostringstream o;
  auto pair = [](const Annulus& a) { return std::to_string(a[0]) + " " + std::to_string(a[1]); };
  auto opt = [&](const std::optional<Annulus>& a) { return a ? pair(*a) : std::string("none"); };
  o << "grid.N = " << c.n << "\n";
  o << "grid.L = " << format_double(c.length) << "\n";
  o << "params.nu = " << format_double(c.nu) << "\n";
  o << "params.r = " << format_double(c.r) << "\n";
  o << "params.beta = " << format_double(c.beta) << "\n";
  o << "params.kappa = " << format_double(c.kappa) << "\n";
  o << "params.h1 = " << format_double(c.h1) << "\n";
  o << "params.h2 = " << format_double(c.h2) << "\n";
  o << "params.S1 = " << format_double(c.s1) << "\n";
  o << "params.S2 = " << format_double(c.s2) << "\n";
  o << "params.advection = " << (c.advection ? "true" : "false") << "\n";
  std::string modes, amps;
  for (std::size_t i = 0; i < c.forcing.size(); ++i) {
    if (i > 0) {
      modes += ", ";
      amps += ", ";
    }
    modes += std::to_string(c.forcing[i].k.k1) + " " + std::to_string(c.forcing[i].k.k2);
    amps += format_double(c.forcing[i].amplitude);
  }
  o << "forcing.modes = " << (modes.empty() ? "none" : modes) << "\n";
  o << "forcing.amplitudes = " << (amps.empty() ? "none" : amps) << "\n";
  o << "noise.layer1 = " << opt(c.noise[0]) << "\n";
  o << "noise.layer2 = " << opt(c.noise[1]) << "\n";
  o << "sim.dt = " << format_double(c.dt) << "\n";
  o << "sim.T = " << format_double(c.t_end) << "\n";
  o << "sim.cadence = " << c.cadence << "\n";
  o << "sim.scheme = " << to_string(c.scheme) << "\n";
  o << "sim.members = " << c.members << "\n";
  o << "sim.seed = " << c.seed << "\n";
  o << "sim.alpha = " << format_double(c.alpha) << "\n";
  o << "sim.noise_substeps = " << c.noise_substeps << "\n";
  o << "sim.cfl = " << format_double(c.cfl) << "\n";
  o << "init.seed = " << c.init_seed << "\n";
  o << "init.kmax = " << c.init_kmax << "\n";
  o << "init.slope = " << format_double(c.init_slope) << "\n";
  o << "init.enstrophy = " << format_double(c.init_enstrophy) << "\n";
  std::string annuli;
  for (std::size_t i = 0; i < c.compare_annuli.size(); ++i) annuli += (i ? ", " : "") + pair(c.compare_annuli[i]);
  if (!annuli.empty()) o << "compare.annuli = " << annuli << "\n";
  o << "longtime.tol = " << format_double(c.longtime_tol) << "\n";
  o << "longtime.max_iter = " << c.longtime_max_iter << "\n";
  o << "longtime.delta = " << format_double(c.longtime_delta) << "\n";
  o << "longtime.tbar = " << format_double(c.longtime_tbar) << "\n";
  o << "longtime.checks = " << c.longtime_checks << "\n";
  o << "longtime.deterministic_only = " << (c.longtime_deterministic_only ? "true" : "false") << "\n";
  o << "output.dir = " << c.output_dir << "\n";
  o << "output.snapshots = " << (c.output_snapshots ? "true" : "false") << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Builders

inline GridPtr make_grid(const ExperimentConfig& c) { return SpectralGrid::create(c.n, c.length); }

/// Physical amplitude a at +-k: coefficient a L / 2 in the e_k basis.
inline ScalarField make_forcing(const ExperimentConfig& c, const GridPtr& grid) {
  ScalarField f(grid);
  for (const auto& m : c.forcing) {
    if (m.k.k1 == 0 && m.k.k2 == 0) throw ConfigError("forcing mode (0,0) is not allowed");
    if (!grid->retained(m.k)) throw ConfigError("forcing mode outside the retained set");
    f += cosine_mode(grid, m.k, 0.5 * m.amplitude * c.length);
  }
  return f;
}

inline ModelParams make_params(const ExperimentConfig& c, const GridPtr& grid) {
  ModelParams p;
  p.nu = c.nu;
  p.r = c.r;
  p.beta = c.beta;
  p.kappa = c.kappa;
  p.h1 = c.h1;
  p.h2 = c.h2;
  p.s1 = c.s1;
  p.s2 = c.s2;
  p.advection = c.advection;
  if (!c.forcing.empty()) p.forcing = make_forcing(c, grid);
  p.validate();
  return p;
}

inline NoiseConfig make_noise(const ExperimentConfig& c, const GridPtr& grid) {
  if (!c.stochastic()) return NoiseConfig::none(grid, c.seed);
  std::array<LayerNoise, 2> layers{};
  for (int j = 0; j < 2; ++j) {
    if (c.noise[j]) layers[j] = build_theta((*c.noise[j])[0], (*c.noise[j])[1]);
  }
  return NoiseConfig(grid, c.kappa, layers, c.seed);
}

inline SimConfig make_sim(const ExperimentConfig& c) {
  SimConfig s;
  s.dt = c.dt;
  s.t_end = c.t_end;
  s.cadence = c.cadence;
  s.scheme = c.scheme;
  s.seed = c.seed;
  s.noise_substeps = static_cast<std::uint64_t>(c.noise_substeps);
  s.cfl_limit = c.cfl;
  return s;
}

/// Random band-limited field: modes 0 < |k| <= kmax with E|q_k|^2 ~ |k|^-slope,
/// rescaled so |||q0|||^2 = target. Deterministic in `seed`.
inline LayeredField random_initial_condition(const GridPtr& grid, const ModelParams& p, std::uint64_t seed,
                                             int kmax, double slope, double target) {
  if (kmax < 1 || kmax > grid->max_mode()) throw ConfigError("init.kmax must lie in [1, N/2-1]");
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  LayeredField q(grid);
  for (int j = 0; j < 2; ++j) {
    for (int k1 = 0; k1 <= kmax; ++k1) {
      for (int k2 = -kmax; k2 <= kmax; ++k2) {
        const Wavevector k{k1, k2};
        if (!in_positive_half(k) || k.norm_sq() > kmax * kmax) continue;
        const double amp = std::pow(static_cast<double>(k.norm_sq()), -0.25 * slope);
        const double re = normal(rng);
        const double im = normal(rng);
        const Complex v = amp * Complex{re, im};
        q[j](k1, k2) = v;
        q[j](-k1, -k2) = std::conj(v);
      }
    }
  }
  const double w = weighted_enstrophy(q, p);
  if (target > 0.0 && w > 0.0) q *= std::sqrt(target / w);
  if (target == 0.0) q = LayeredField(grid);
  return q;
}

inline LayeredField make_initial_condition(const ExperimentConfig& c, const GridPtr& grid, const ModelParams& p) {
  return random_initial_condition(grid, p, c.init_seed, c.init_kmax, c.init_slope, c.init_enstrophy);
}

inline void ExperimentConfig::validate() const {
  if (n < 16 || n % 2 != 0) throw ConfigError("grid.N must be even and at least 16");
  if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("grid.L must be positive");
  if (members < 1) throw ConfigError("sim.members must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("sim.alpha must lie in (0, 1)");
  if (!(cfl > 0.0)) throw ConfigError("sim.cfl must be positive");
  if (init_kmax < 1 || init_kmax > n / 2 - 1) throw ConfigError("init.kmax must lie in [1, N/2-1]");
  if (!(init_enstrophy >= 0.0)) throw ConfigError("init.enstrophy must be >= 0");
  if (!(longtime_tol > 0.0)) throw ConfigError("longtime.tol must be positive");
  if (longtime_max_iter < 1) throw ConfigError("longtime.max_iter must be >= 1");
  if (longtime_checks < 2) throw ConfigError("longtime.checks must be >= 2");
  if (!(longtime_delta >= 0.0) || !(longtime_tbar >= 0.0)) throw ConfigError("longtime.delta/tbar must be >= 0");
  if (scheme == Scheme::Rk4 && stochastic()) throw ConfigError("stochastic runs require sim.scheme = imex");
  for (const auto& a : compare_annuli) {
    if (a[0] < 1 || a[1] < a[0]) throw ConfigError("compare.annuli entries need 1 <= min <= max");
  }
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
  make_sim(*this).validate();
  const GridPtr grid = make_grid(*this);
  const ModelParams p = make_params(*this, grid);
  (void)p;
  (void)make_noise(*this, grid);
  for (const auto& a : compare_annuli) {
    if (kappa > 0.0) (void)NoiseConfig::annulus(grid, kappa, a[0], a[1]);
  }
}

}  // namespace qg2l
