// End-to-end checks of the command-line front end.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "qg2l/qg2l.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(QG2L_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("qg2l_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

const char* kSmall =
    "grid.N = 16\n"
    "sim.dt = 0.001\n"
    "sim.T = 0.01\n"
    "sim.cadence = 2\n";

TEST_F(CliTest, CheckPassesOnDefaults) {
  const Result r = run_cli("check");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_TRUE(doc["pass"].get<bool>());
  EXPECT_GE(doc["checks"].size(), 9u);
}

TEST_F(CliTest, CheckReportsInjectedFaults) {
  const auto cfg = write_config("small.cfg", "grid.N = 32\n");
  const Result theta = run_cli("check -c " + cfg.string() + " --inject-theta-scale 1.1");
  EXPECT_NE(theta.code, 0);
  EXPECT_NE(theta.out.find("theta normalization"), std::string::npos) << theta.out;
  const Result support = run_cli("check -c " + cfg.string() + " --inject-oversize-support");
  EXPECT_NE(support.code, 0);
  EXPECT_NE(support.out.find("support exceeds padded grid"), std::string::npos) << support.out;
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("simulate").code, 1);
  EXPECT_EQ(run_cli("simulate -c " + (dir_ / "missing.cfg").string()).code, 3);
  const auto bad = write_config("bad.cfg", "grid.N = 16\nbogus.key = 1\n");
  const Result r = run_cli("simulate -c " + bad.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bogus.key"), std::string::npos);
  // A Courant number far above the limit is a numerical failure.
  const auto cfl = write_config("cfl.cfg",
                                "grid.N = 16\nsim.dt = 0.5\nsim.T = 1\ninit.enstrophy = 1e4\n");
  EXPECT_EQ(run_cli("simulate -c " + cfl.string() + " -o " + (dir_ / "o").string()).code, 2);
}

TEST_F(CliTest, ZeroHorizonWritesHeaderAndOneRow) {
  const auto cfg = write_config("t0.cfg", "grid.N = 16\nsim.T = 0\n");
  const Result r = run_cli("simulate -c " + cfg.string() + " -o " + (dir_ / "out").string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream csv(slurp(dir_ / "out" / "trajectory.csv"));
  std::string header, row, extra;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_FALSE(std::getline(csv, extra));
  EXPECT_EQ(header,
            "time,enstrophy_weighted,grad_enstrophy,balance_residual,term_beta1,term_beta2,term_forcing,"
            "term_friction,term_Sr,term_Snu1,term_Snu2");
  EXPECT_EQ(row.rfind("0,1,", 0), 0u) << row;
}

TEST_F(CliTest, RerunsAreByteIdentical) {
  for (const std::string extra : {"", "params.kappa = 0.1\nnoise.layer1 = 1 3\nnoise.layer2 = 1 3\ncompare.annuli = 1 2\n"}) {
    const auto cfg = write_config("run.cfg", std::string(kSmall) + "output.snapshots = true\n" + extra);
    ASSERT_EQ(run_cli("simulate -c " + cfg.string() + " -o " + (dir_ / "a").string()).code, 0);
    ASSERT_EQ(run_cli("simulate -c " + cfg.string() + " -o " + (dir_ / "b").string()).code, 0);
    // effective.cfg differs only in output.dir
    for (const char* f : {"trajectory.csv", "snapshot_000000.qg2l", "snapshot_000005.qg2l"}) {
      EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    }
    EXPECT_FALSE(fs::exists(dir_ / "a" / "snapshot_000006.qg2l"));
    const std::string csv = slurp(dir_ / "a" / "trajectory.csv");
    EXPECT_EQ(csv.find("err_Hminus_alpha") != std::string::npos, !extra.empty());
  }
}

TEST_F(CliTest, EffectiveConfigReproducesRun) {
  const auto cfg = write_config("run.cfg", kSmall);
  ASSERT_EQ(run_cli("simulate -c " + cfg.string() + " -o " + (dir_ / "a").string()).code, 0);
  const auto effective = dir_ / "a" / "effective.cfg";
  ASSERT_EQ(run_cli("simulate -c " + effective.string() + " -o " + (dir_ / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "trajectory.csv"), slurp(dir_ / "b" / "trajectory.csv"));
}

TEST_F(CliTest, SnapshotCarriesState) {
  const auto cfg = write_config("run.cfg", std::string(kSmall) + "output.snapshots = true\n");
  ASSERT_EQ(run_cli("simulate -c " + cfg.string() + " -o " + (dir_ / "a").string()).code, 0);
  const auto s = qg2l::read_snapshot((dir_ / "a" / "snapshot_000000.qg2l").string());
  const auto c = qg2l::load_config(cfg.string());
  const auto grid = qg2l::make_grid(c);
  const auto p = qg2l::make_params(c, grid);
  EXPECT_TRUE(s.q == qg2l::make_initial_condition(c, grid, p));
  EXPECT_EQ(s.time, 0.0);
  EXPECT_EQ(qg2l::read_snapshot((dir_ / "a" / "snapshot_000005.qg2l").string()).time, 0.01);
}

TEST_F(CliTest, CompareWithoutNoiseHasZeroError) {
  const auto cfg = write_config("cmp.cfg", std::string(kSmall) +
                                               "params.kappa = 0\nsim.members = 2\ncompare.annuli = 1 2\n");
  const Result r = run_cli("compare -c " + cfg.string() + " -o " + (dir_ / "c").string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream csv(slurp(dir_ / "c" / "compare.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "annulus_min,annulus_max,modes,theta_sup,mean_sup_err2,std_error");
  EXPECT_EQ(row.rfind("1,2,12,", 0), 0u) << row;
  EXPECT_NE(row.find(",0,0"), std::string::npos) << row;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "c" / "compare.json"));
  EXPECT_TRUE(doc["exponent"].is_null());
}

TEST_F(CliTest, LongtimeWithZeroForcingFindsZero) {
  const auto cfg = write_config("lt.cfg",
                                "grid.N = 16\nparams.kappa = 2\nforcing.modes = none\nforcing.amplitudes = none\n"
                                "sim.T = 0.02\nsim.cadence = 5\ncompare.annuli = 1 2\n"
                                "longtime.deterministic_only = true\n");
  const Result r = run_cli("longtime -c " + cfg.string() + " -o " + (dir_ / "l").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto doc = nlohmann::json::parse(slurp(dir_ / "l" / "longtime.json"));
  EXPECT_EQ(doc["picard"]["iterations"].get<int>(), 1);
}

}  // namespace
