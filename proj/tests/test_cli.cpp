#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "leasch/cli.hpp"

using namespace leasch;
namespace fs = std::filesystem;

namespace {

config::ExperimentConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return config::load_ini(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

config::ExperimentConfig quick(const fs::path& out) {
  auto c = config::defaults();
  c.out_dir = out.string();
  c.cell.frames = 10;
  c.seeds = {1, 2, 3};
  c.dqn.hidden = {16};
  c.dqn.replay_capacity = 5000;
  c.episodes = 2;
  return c;
}

#ifdef LEASCH_TOOL
int run_tool(const std::string& args) {
  const std::string cmd = std::string(LEASCH_TOOL) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}
#endif

}  // namespace

TEST(Config, DefaultsValidate) {
  const auto c = config::defaults();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.seeds.size(), 100u);
  EXPECT_EQ(c.episodes, 500);
  EXPECT_EQ(c.cell.frames, 250);
}

TEST(Config, IniSectionsApply) {
  const auto c = from_text(
      "[train]\nepisodes = 12\nseed = 5\n"
      "[sandbox]\np_elig = 0.6\n"
      "[dqn]\nsmoothing = 0.05\nhidden = 32, 16\n"
      "[cell]\nnumerology = 1\nframes = 40\n"
      "[eval]\nschedulers = rr, pf\nseeds = 4\nseeds_pf = 1,2,3,4\n");
  EXPECT_EQ(c.episodes, 12);
  EXPECT_EQ(c.train_seed, 5u);
  EXPECT_DOUBLE_EQ(c.sandbox.p_elig, 0.6);
  EXPECT_DOUBLE_EQ(c.dqn.smoothing, 0.05);
  EXPECT_EQ(c.dqn.hidden, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.cell.numerology, 1);
  EXPECT_EQ(c.cell.bandwidth_mhz, 10);
  EXPECT_EQ(c.cell.n_rb, 24);
  EXPECT_EQ(c.cell.frames, 40);
  EXPECT_EQ(c.schedulers, (std::vector<std::string>{"rr", "pf"}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4}));
  EXPECT_EQ(c.seeds_for("pf").size(), 4u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, UnknownKeysAndSectionsRejected) {
  EXPECT_THROW(from_text("[dqn]\nlearning_rate = 1\n"), ConfigError);
  EXPECT_THROW(from_text("[mystery]\nx = 1\n"), ConfigError);
  EXPECT_THROW(from_text("[train]\nepisodes = many\n"), ConfigError);
}

TEST(Config, SeedLists) {
  EXPECT_EQ(config::parse_seeds("3"), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(config::parse_seeds("7, 9"), (std::vector<std::uint64_t>{7, 9}));
  EXPECT_THROW(config::parse_seeds("0"), ConfigError);
  EXPECT_THROW(config::parse_seeds("x"), ConfigError);
  auto c = config::defaults();
  c.seeds = {1, 1};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, FingerprintTracksResultRelevantSettings) {
  auto a = config::defaults(), b = config::defaults();
  EXPECT_EQ(config::fingerprint(a), config::fingerprint(b));
  EXPECT_EQ(config::fingerprint(a).size(), 16u);
  b.out_dir = "elsewhere";
  b.jobs = 4;
  EXPECT_EQ(config::fingerprint(a), config::fingerprint(b));
  b.cell.bler = 0.2;
  EXPECT_NE(config::fingerprint(a), config::fingerprint(b));
}

TEST(Commands, EvalWritesRunFiles) {
  TempDir dir("leasch_cli_eval");
  auto c = quick(dir.path);
  c.schedulers = {"rr"};
  std::ostringstream log;
  const auto out = cli::cmd_eval(c, log);
  ASSERT_EQ(out.runs.size(), 3u);
  for (int s = 1; s <= 3; ++s) EXPECT_TRUE(fs::exists(dir.path / "runs" / ("rr_seed" + std::to_string(s) + ".csv")));
  EXPECT_TRUE(fs::exists(dir.path / "summary.json"));
  EXPECT_TRUE(fs::exists(dir.path / "curves.csv"));
  for (const auto& r : out.runs) EXPECT_EQ(r.record.decisions.size(), 10u * 130u);
  const auto summary = nlohmann::json::parse(slurp(dir.path / "summary.json"));
  EXPECT_EQ(summary.at("fingerprint").get<std::string>(), config::fingerprint(c));
  EXPECT_NE(slurp(dir.path / "runs" / "rr_seed2.csv").find("seed=2"), std::string::npos);
}

TEST(Commands, CompareSameSchedulerGivesZeroDeltas) {
  TempDir dir("leasch_cli_compare");
  auto c = quick(dir.path);
  c.schedulers = {"rr", "rr"};
  std::ostringstream log;
  const auto out = cli::cmd_compare(c, log);
  ASSERT_EQ(out.aggregate.deltas.size(), 2u);
  for (const auto& d : out.aggregate.deltas) {
    EXPECT_EQ(d.throughput, 0.0);
    EXPECT_EQ(d.goodput, 0.0);
    EXPECT_EQ(d.jfi, 0.0);
  }
  EXPECT_TRUE(fs::exists(dir.path / "comparison.csv"));
  EXPECT_TRUE(fs::exists(dir.path / "comparison.json"));
}

TEST(Commands, CompareRefusesUnpairedSeeds) {
  TempDir dir("leasch_cli_unpaired");
  auto c = quick(dir.path);
  c.schedulers = {"rr", "pf"};
  c.seed_overrides["pf"] = {4, 5, 6};
  std::ostringstream log;
  EXPECT_THROW(cli::cmd_compare(c, log), ConfigError);
  c.seed_overrides.clear();
  c.schedulers = {"rr"};
  EXPECT_THROW(cli::cmd_compare(c, log), ConfigError);
}

TEST(Commands, TrainThenEvaluateCheckpoint) {
  TempDir dir("leasch_cli_train");
  auto c = quick(dir.path);
  std::ostringstream log;
  const auto trained = cli::cmd_train(c, log);
  EXPECT_EQ(trained.curve.size(), 2u);
  const auto first = slurp(trained.learning_curve);
  cli::cmd_train(c, log);
  EXPECT_EQ(slurp(trained.learning_curve), first);

  c.schedulers = {"leasch", "rr"};
  const auto out = cli::cmd_compare(c, log);
  EXPECT_EQ(out.aggregate.schedulers.size(), 2u);
}

TEST(Commands, ZeroEpisodesStoresInitialNetwork) {
  TempDir dir("leasch_cli_zero");
  auto c = quick(dir.path);
  c.episodes = 0;
  std::ostringstream log;
  cli::cmd_train(c, log);
  const auto ckpt = dqn::load_checkpoint(c.checkpoint_path());
  EXPECT_EQ(ckpt.network.weights[0], nn::init_params(c.dqn.layer_dims(4), c.train_seed).weights[0]);
  EXPECT_EQ(ckpt.train_steps, 0u);
}

TEST(Commands, MissingCheckpointAndUeMismatch) {
  TempDir dir("leasch_cli_missing");
  auto c = quick(dir.path);
  c.schedulers = {"leasch"};
  std::ostringstream log;
  EXPECT_THROW(cli::cmd_eval(c, log), ConfigError);

  auto small = quick(dir.path);
  small.sandbox.n_ue = small.cell.n_ue = 3;
  small.episodes = 0;
  cli::cmd_train(small, log);
  EXPECT_THROW(cli::cmd_eval(c, log), ConfigError);
}

TEST(Commands, ParallelJobsMatchSerial) {
  TempDir a("leasch_cli_serial"), b("leasch_cli_parallel");
  auto ca = quick(a.path), cb = quick(b.path);
  ca.schedulers = cb.schedulers = {"pf", "bestcqi"};
  cb.jobs = 3;
  std::ostringstream log;
  const auto ra = cli::cmd_eval(ca, log), rb = cli::cmd_eval(cb, log);
  for (std::size_t i = 0; i < ra.runs.size(); ++i) {
    EXPECT_EQ(ra.runs[i].record.scheduled_bits, rb.runs[i].record.scheduled_bits);
  }
  EXPECT_EQ(slurp(a.path / "runs" / "pf_seed3.csv"), slurp(b.path / "runs" / "pf_seed3.csv"));
}

#ifdef LEASCH_TOOL
TEST(Tool, ExitCodes) {
  TempDir dir("leasch_cli_tool");
  const std::string out = " --out " + dir.path.string();
  EXPECT_EQ(run_tool("eval --scheduler rr --frames 2 --seeds 2" + out), 0);
  EXPECT_EQ(run_tool("eval --scheduler nosuch --frames 2 --seeds 2" + out), 2);
  EXPECT_EQ(run_tool("eval --scheduler leasch --frames 2 --seeds 1 --checkpoint /nonexistent.json" + out), 2);
  EXPECT_EQ(run_tool("eval --frames" + out), 2);
  EXPECT_EQ(run_tool("frobnicate"), 2);
  EXPECT_EQ(run_tool("eval --config /nonexistent.ini" + out), 2);
  EXPECT_EQ(run_tool("compare --scheduler rr,rr --frames 2 --seeds 2" + out), 0);
}
#endif
