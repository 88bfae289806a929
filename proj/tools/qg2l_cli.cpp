// Command-line front end: qg2l {check|simulate|compare|longtime}.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qg2l/qg2l.hpp"

namespace {

qg2l::ExperimentConfig load(const std::string& path, const std::string& output) {
  qg2l::ExperimentConfig cfg = path.empty() ? qg2l::ExperimentConfig{} : qg2l::load_config(path);
  if (!output.empty()) cfg.output_dir = output;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-layer quasi-geostrophic simulator with transport noise"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  qg2l::CheckHooks hooks;

  auto* check = app.add_subcommand("check", "run the invariant suites and print a JSON report");
  check->add_option("-c,--config", config_path, "config file (defaults to the built-in desk profile)");
  check->add_option("--inject-theta-scale", hooks.theta_scale, "test hook: scale every theta_k");
  check->add_flag("--inject-oversize-support", hooks.oversize_support,
                  "test hook: noise shell beyond the padded grid");

  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory and write a CSV time series");
  auto* compare = app.add_subcommand("compare", "ensemble error against the deterministic limit per noise annulus");
  auto* longtime = app.add_subcommand("longtime", "stationary solution, decay towards it, ensemble bound");
  for (auto* sub : {simulate, compare, longtime}) {
    sub->add_option("-c,--config", config_path, "config file")->required();
    sub->add_option("-o,--output", output, "output directory (overrides output.dir)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qg2l::kExitConfig;
  }

  return qg2l::run_guarded(
      [&]() -> int {
        const qg2l::ExperimentConfig cfg = load(config_path, output);
        if (*check) return qg2l::cmd_check(cfg, std::cout, hooks);
        if (*simulate) return qg2l::cmd_simulate(cfg, std::cout);
        if (*compare) return qg2l::cmd_compare(cfg, std::cout);
        return qg2l::cmd_longtime(cfg, std::cout);
      },
      std::cerr);
}
