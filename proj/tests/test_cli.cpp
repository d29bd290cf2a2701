#include <dwlab/cli.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace dwlab;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "dwlab");
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dwlab_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, AdmissibleTable) {
  const auto r = run({"admissible", "--set", "n=1", "--set", "p=2"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("alpha"), std::string::npos);
  EXPECT_NE(r.out.find("overall: PASS"), std::string::npos);
}

TEST(Cli, AdmissibleRejection) {
  const auto r = run({"admissible", "--set", "n=2", "--set", "p=0.9"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("p > max{1, n/2}"), std::string::npos);
  EXPECT_EQ(run({"admissible", "--set", "n=3", "--set", "p=1.2"}).code, 2);
}

TEST(Cli, UsageErrors) {
  auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 64);
  EXPECT_NE(r.err.find("usage:"), std::string::npos);
  EXPECT_EQ(run({}).code, 64);
  EXPECT_EQ(run({"solve", "--bogus"}).code, 64);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"solve", "--config", "/nonexistent/run.cfg"}).code, 2);
  EXPECT_EQ(run({"solve", "--set", "dt=fast"}).code, 2);
}

TEST(Cli, SolveThenDecayFit) {
  const auto dir = scratch("solve");
  const auto cfg = dir.string() + ".cfg";
  write_text(cfg, "[grid]\npoints = 512\nhalf_length = 40\n[model]\np = 2\ns = 1\n[run]\nT = 20\ndt = 0.1\n");
  const auto r = run({"solve", "--config", cfg, "--out", dir.string(), "--seed", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "norms.csv"));
  const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
  EXPECT_EQ(meta["seed"].get<int>(), 5);
  EXPECT_EQ(meta["config"]["model.s"].get<std::string>(), "1");

  const auto fit = run({"decay-fit", "--set", "input=" + dir.string()});
  ASSERT_EQ(fit.code, 0) << fit.err;
  EXPECT_NE(fit.out.find("hs_dot_v"), std::string::npos);
  // The in-memory fit printed by solve and the on-disk refit agree to the last digit.
  const auto line = [](const std::string& s) { return s.substr(s.find("l_alpha")); };
  EXPECT_EQ(line(fit.out), line(r.out));
  fs::remove_all(dir);
  fs::remove(cfg);
}

TEST(Cli, DecayFitRefusesMismatchedPair) {
  const auto dir = scratch("mismatch");
  ASSERT_EQ(run({"linear", "--set", "points=256", "--set", "L=40", "--set", "T=20", "--set", "dt=0.1", "--out",
                 dir.string()})
                .code,
            0);
  write_text(dir / "norms.csv", read_text(dir / "norms.csv") + "99,1,1,1,1,1,1,1\n");
  EXPECT_EQ(run({"decay-fit", "--set", "input=" + dir.string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ReproducibleBytes) {
  const auto a = scratch("rep_a"), b = scratch("rep_b");
  const std::vector<std::string> common{"solve", "--set", "points=256", "--set", "L=40", "--set", "T=10",
                                        "--set", "dt=0.1", "--seed", "11"};
  auto args_a = common, args_b = common;
  args_a.insert(args_a.end(), {"--out", a.string()});
  args_b.insert(args_b.end(), {"--out", b.string()});
  ASSERT_EQ(run(args_a).code, 0);
  ASSERT_EQ(run(args_b).code, 0);
  EXPECT_EQ(read_text(a / "norms.csv"), read_text(b / "norms.csv"));
  EXPECT_EQ(read_text(a / "meta.json"), read_text(b / "meta.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, InstabilityExitsThreeWithPartialOutput) {
  const auto dir = scratch("blowup");
  const auto r = run({"solve", "--set", "points=64", "--set", "L=20", "--set", "eps=1000", "--set", "T=5",
                      "--set", "run.check_box=false", "--out", dir.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(fs::exists(dir / "norms.csv"));
  EXPECT_NE(read_text(dir / "meta.json").find("failure"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, EnvironmentOverridesOut) {
  const auto dir = scratch("env"), ignored = scratch("env_ignored");
  setenv("DWLAB_OUT", dir.c_str(), 1);
  const auto r = run({"admissible", "--out", ignored.string()});
  unsetenv("DWLAB_OUT");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir / "admissible.json"));
  EXPECT_FALSE(fs::exists(ignored));
  fs::remove_all(dir);
}

TEST(Cli, VerificationSubcommands) {
  EXPECT_EQ(run({"ineq-verify", "--set", "ineq.members=20"}).code, 0);
  EXPECT_EQ(run({"kernel-verify", "--set", "points=256", "--set", "T=10", "--set", "dt=0.1"}).code, 0);
  const auto p = run({"picard", "--set", "points=256", "--set", "T=10", "--set", "picard.nodes=128", "--set", "eps=0.05"});
  EXPECT_EQ(p.code, 0);
  EXPECT_NE(p.out.find("contraction: pass"), std::string::npos);
  EXPECT_EQ(run({"picard", "--set", "points=256", "--set", "T=10", "--set", "picard.nodes=128", "--set", "eps=5",
                 "--set", "picard.quad_tol=1"})
                .code,
            3);
}
