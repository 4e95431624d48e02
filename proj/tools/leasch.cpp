#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "leasch/cli.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string schedulers;
  std::optional<int> frames;
  std::string seeds;
  std::optional<int> episodes;
  std::optional<std::uint64_t> train_seed;
  std::string checkpoint;
  std::string out;
  std::optional<int> jobs;
};

void add_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config, "INI experiment config");
  cmd.add_option("--scheduler", o.schedulers, "rr|pf|bestcqi|leasch, comma separated");
  cmd.add_option("--frames", o.frames, "frames per run");
  cmd.add_option("--seeds", o.seeds, "N (seeds 1..N) or a comma-separated list");
  cmd.add_option("--episodes", o.episodes, "training episodes");
  cmd.add_option("--seed", o.train_seed, "training seed");
  cmd.add_option("--checkpoint", o.checkpoint, "checkpoint path");
  cmd.add_option("--out", o.out, "output directory");
  cmd.add_option("--jobs", o.jobs, "concurrent simulation runs");
}

leasch::config::ExperimentConfig resolve(const Overrides& o) {
  using namespace leasch::config;
  auto cfg = o.config.empty() ? defaults() : load_ini_file(o.config);
  if (!o.schedulers.empty()) cfg.schedulers = split_list(o.schedulers);
  if (o.frames) cfg.cell.frames = *o.frames;
  if (!o.seeds.empty()) cfg.seeds = parse_seeds(o.seeds);
  if (o.episodes) cfg.episodes = *o.episodes;
  if (o.train_seed) cfg.train_seed = *o.train_seed;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DQN radio-resource scheduler: training, evaluation and comparison"};
  app.require_subcommand(1);
  Overrides train_o, eval_o, compare_o;
  auto* train = app.add_subcommand("train", "train an agent in the sandbox and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "simulate every seed with the given scheduler(s)");
  auto* compare = app.add_subcommand("compare", "paired comparison of two or more schedulers");
  add_options(*train, train_o);
  add_options(*eval, eval_o);
  add_options(*compare, compare_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return leasch::cli::kExitUsage;
  }

  try {
    if (train->parsed()) {
      leasch::cli::cmd_train(resolve(train_o));
    } else if (eval->parsed()) {
      leasch::cli::cmd_eval(resolve(eval_o));
    } else if (compare->parsed()) {
      leasch::cli::cmd_compare(resolve(compare_o));
    }
  } catch (const leasch::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return leasch::cli::kExitUsage;
  } catch (const leasch::DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return leasch::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return leasch::cli::kExitRuntime;
  }
  return leasch::cli::kExitOk;
}
