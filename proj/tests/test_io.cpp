#include <dwlab/io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dwlab;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dwlab_test_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, SectionsAliasesAndOverrides) {
  RunConfig c;
  c.merge_text("# comment\n[grid]\ndim = 2\npoints = 64   # trailing\n[model]\np=1.5\nn = 7\n");
  EXPECT_EQ(c.get_int("grid.dim", 0), 2);
  EXPECT_EQ(c.get_int("model.n", 0), 7);  // aliases only apply to unqualified keys
  c.merge_text("n = 1\n");
  EXPECT_EQ(c.get_int("grid.dim", 0), 1);
  EXPECT_EQ(c.get_int("points", 0), 64);
  EXPECT_DOUBLE_EQ(c.get_double("p", 0.0), 1.5);
  c.apply_override("eps=0.02");
  EXPECT_DOUBLE_EQ(c.get_double("ic.amplitude", 0.0), 0.02);
  EXPECT_EQ(c.get_string("missing", "x"), "x");
  EXPECT_THROW(c.apply_override("novalue"), ConfigError);
  EXPECT_THROW(c.merge_text("[broken\n"), ConfigError);
  EXPECT_THROW(c.merge_text("just words\n"), ConfigError);
  c.set("bad", "1.5x");
  EXPECT_THROW(c.get_double("bad", 0.0), ConfigError);
  EXPECT_THROW(c.get_bool("bad", false), ConfigError);
}

TEST(Config, HashIsOrderIndependent) {
  RunConfig a, b;
  a.merge_text("p = 2\nn = 1\n");
  b.merge_text("n = 1\np = 2\n");
  EXPECT_EQ(a.hash(), b.hash());
  b.set("p", "3");
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Norms, CsvRoundTripIsLossless) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1e10, 1e10);
  std::vector<NormRecord> recs;
  for (int i = 0; i < 20; ++i) recs.push_back({d(rng), d(rng), d(rng), d(rng), d(rng), d(rng), d(rng), 1.0 / 3.0});
  const auto text = norms_csv_text(recs);
  const auto back = parse_norms_csv(text);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].t, recs[i].t);
    EXPECT_EQ(back[i].hs_dot_v, recs[i].hs_dot_v);
    EXPECT_EQ(back[i].x_weighted_hs, recs[i].x_weighted_hs);
  }
  EXPECT_EQ(norms_csv_text(back), text);
  EXPECT_THROW(parse_norms_csv("t,x\n1,2\n"), IoError);
  EXPECT_THROW(parse_norms_csv(std::string(kNormsHeader) + "\n1,2,3\n"), IoError);
}

TEST(Trajectory, SingleSampleGivesTwoLines) {
  const auto dir = scratch("single");
  Trajectory traj;
  traj.params = derive_params(1, 2.0);
  traj.records.push_back({0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
  RunConfig cfg;
  write_trajectory(traj, dir, cfg, 42, 2.0);
  const auto csv = read_text(dir / "norms.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  const auto run = load_run(dir);
  EXPECT_EQ(run.meta.at("seed").get<std::uint64_t>(), 42u);
  EXPECT_EQ(run.meta.at("config_hash").get<std::string>(), cfg.hash());
  EXPECT_THROW(write_trajectory(Trajectory{}, dir, cfg, 0, 2.0), std::invalid_argument);
  fs::remove_all(dir);
}

TEST(Trajectory, DecayFitFromDiskMatchesInMemory) {
  const auto dir = scratch("fit");
  auto g = make_grid(1, 512, 40.0);
  const auto params = derive_params(1, 2.0, {.s = 1.0});
  SolveConfig sc;
  sc.T = 20.0;
  sc.dt = 0.1;
  sc.snapshot_times = {10.0};
  const auto traj = solve(make_initial({IcKind::gaussian, 0.01, 1.0}, g), params, sc);
  RunConfig cfg;
  write_trajectory(traj, dir, cfg, 1, 2.0);
  const auto run = load_run(dir);
  const auto w = default_fit_window(sc.T);
  const auto a = fit_decay(column(traj.records, &NormRecord::hs_dot_v), w.first, w.second, -1.75);
  const auto b = fit_decay(column(run.records, &NormRecord::hs_dot_v), w.first, w.second, -1.75);
  EXPECT_EQ(a.slope, b.slope);
  EXPECT_EQ(a.intercept, b.intercept);
  ASSERT_EQ(run.meta.at("snapshots").size(), 1u);
  const auto snap = read_snapshot(dir / run.meta["snapshots"][0]["file"].get<std::string>());
  EXPECT_EQ(snap.u, traj.snapshots[0].state.u.values);
  EXPECT_EQ(snap.v, traj.snapshots[0].state.v.values);
  fs::remove_all(dir);
}

TEST(Trajectory, TamperedCsvRefused) {
  const auto dir = scratch("tamper");
  Trajectory traj;
  traj.records.push_back({0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
  write_trajectory(traj, dir, RunConfig{}, 0, 2.0);
  write_text(dir / "norms.csv", read_text(dir / "norms.csv") + "1,1,1,1,1,1,1,1\n");
  EXPECT_THROW(load_run(dir), ConfigError);
  fs::remove_all(dir);
}

TEST(Trajectory, UnwritableDirectory) {
  Trajectory traj;
  traj.records.push_back({});
  EXPECT_THROW(write_trajectory(traj, "/proc/dwlab_cannot_write", RunConfig{}, 0, 2.0), IoError);
}

TEST(Snapshot, BitExactRoundTrip) {
  const auto dir = scratch("snap");
  fs::create_directories(dir);
  auto g = make_grid(2, 16, 3.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  State s{Field(g), Field(g), 0.1 + 0.2};
  for (auto& x : s.u.values) x = d(rng);
  for (auto& x : s.v.values) x = d(rng) * 1e-300;
  s.v.values[0] = -0.0;
  const auto snap = make_snapshot(s, 1.5);
  write_snapshot(dir / "a.dwsnap", snap);
  const auto back = read_snapshot(dir / "a.dwsnap");
  EXPECT_EQ(back, snap);
  EXPECT_TRUE(std::signbit(back.v[0]));
  write_snapshot(dir / "b.dwsnap", back);
  EXPECT_EQ(read_text(dir / "a.dwsnap"), read_text(dir / "b.dwsnap"));
  const auto st = snapshot_state(back);
  EXPECT_EQ(st.t, 0.1 + 0.2);
  EXPECT_TRUE(st.u.grid->same_shape(*g));

  const auto bytes = read_text(dir / "a.dwsnap");
  EXPECT_EQ(bytes.substr(0, 9), "DWSNAP01\n");
  EXPECT_EQ(bytes.size() - bytes.find("1.5\n") - 4, 2u * 256u * 8u);
  EXPECT_THROW(decode_snapshot(bytes.substr(0, bytes.size() - 1)), IoError);
  EXPECT_THROW(decode_snapshot("DWSNAP02\n" + bytes.substr(9)), IoError);
  fs::remove_all(dir);
}
