#pragma once

// train / eval / compare commands behind the leasch executable.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "leasch/config.hpp"
#include "leasch/dqn.hpp"
#include "leasch/kpi.hpp"
#include "leasch/sandbox.hpp"
#include "leasch/sched.hpp"
#include "leasch/simnr.hpp"

namespace leasch::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

struct TrainOutput {
  std::string checkpoint;
  std::string learning_curve;
  std::vector<sandbox::CurvePoint> curve;
};

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

inline TrainOutput cmd_train(const config::ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  ensure_dir(cfg.out_dir);
  const auto fp = config::fingerprint(cfg);
  log << "training " << cfg.episodes << " episodes, seed " << cfg.train_seed << ", fingerprint " << fp << '\n';
  auto result = sandbox::train(cfg.sandbox, cfg.dqn, cfg.episodes, cfg.train_seed, [&](const sandbox::CurvePoint& p) {
    if (p.episode % 50 == 0) {
      log << "  episode " << p.episode << "  avg5 " << p.moving_avg_5 << "  eligible " << p.eligible_selection_prob
          << "  eps " << p.epsilon << '\n';
    }
  });

  TrainOutput out;
  out.checkpoint = cfg.checkpoint_path();
  if (const auto parent = fs::path(out.checkpoint).parent_path(); !parent.empty()) ensure_dir(parent.string());
  nlohmann::json lineage{{"train_seed", cfg.train_seed},
                         {"episodes", cfg.episodes},
                         {"fingerprint", fp},
                         {"init_stream", static_cast<int>(Stream::init)},
                         {"agent_stream", static_cast<int>(Stream::agent)},
                         {"sandbox_stream", static_cast<int>(Stream::sandbox)}};
  dqn::save_checkpoint(dqn::make_checkpoint(result.agent, cfg.dqn, lineage), out.checkpoint);

  out.learning_curve = cfg.out_dir + "/learning_curve.csv";
  sandbox::write_learning_curve(out.learning_curve, result.curve, fp, cfg.train_seed);
  kpi::write_json(cfg.out_dir + "/train_config.json",
                  {{"fingerprint", fp}, {"seed", cfg.train_seed}, {"config", config::to_json(cfg)}});
  out.curve = std::move(result.curve);
  log << "wrote " << out.checkpoint << " and " << out.learning_curve << '\n';
  return out;
}

struct RunResult {
  kpi::KpiRecord record;
  kpi::RunSummary summary;
};

struct Job {
  std::string label;      // scheduler name, suffixed when listed twice
  std::string scheduler;
  std::uint64_t seed;
};

/// Runs every job, up to `jobs` at a time; results keep the job order.
inline std::vector<RunResult> run_jobs(const config::ExperimentConfig& cfg, const std::vector<Job>& todo,
                                       std::shared_ptr<const nn::MlpParams> net, const std::string& fp) {
  std::vector<RunResult> results(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      try {
        std::unique_ptr<sched::Scheduler> s;
        if (todo[i].scheduler == "pf") {
          s = std::make_unique<sched::ProportionalFair>(cfg.pf_tau);
        } else {
          s = sched::make_scheduler(todo[i].scheduler, net);
        }
        auto rec = simnr::run_simulation(cfg.cell, *s, cfg.cell.frames, todo[i].seed);
        rec.scheduler = todo[i].label;
        rec.fingerprint = fp;
        auto summary = kpi::summarize_run(rec);
        results[i] = {std::move(rec), std::move(summary)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), std::max<std::size_t>(todo.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

inline std::shared_ptr<const nn::MlpParams> load_network_if_needed(const config::ExperimentConfig& cfg) {
  for (const auto& s : cfg.schedulers) {
    if (s != "leasch") continue;
    auto ckpt = dqn::load_checkpoint(cfg.checkpoint_path());
    if (ckpt.n_ue != cfg.cell.n_ue) {
      throw ConfigError("checkpoint was trained for " + std::to_string(ckpt.n_ue) + " UEs, cell has " +
                        std::to_string(cfg.cell.n_ue));
    }
    return std::make_shared<const nn::MlpParams>(std::move(ckpt.network));
  }
  return nullptr;
}

inline std::vector<Job> make_jobs(const config::ExperimentConfig& cfg) {
  std::vector<Job> todo;
  std::map<std::string, int> seen;
  for (const auto& s : cfg.schedulers) {
    const int n = ++seen[s];
    const std::string label = n == 1 ? s : s + "#" + std::to_string(n);
    for (auto seed : cfg.seeds_for(s)) todo.push_back({label, s, seed});
  }
  return todo;
}

struct EvalOutput {
  std::vector<RunResult> runs;
  kpi::Aggregate aggregate;
};

inline EvalOutput cmd_eval(const config::ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  const auto fp = config::fingerprint(cfg);
  auto net = load_network_if_needed(cfg);
  ensure_dir(cfg.out_dir + "/runs");
  const auto todo = make_jobs(cfg);
  log << "evaluating " << todo.size() << " runs of " << cfg.cell.frames << " frames, fingerprint " << fp << '\n';
  EvalOutput out;
  out.runs = run_jobs(cfg, todo, net, fp);

  std::vector<kpi::RunSummary> summaries;
  std::ofstream curves(cfg.out_dir + "/curves.csv");
  if (!curves) throw ConfigError("cannot write " + cfg.out_dir + "/curves.csv");
  curves << "# fingerprint=" << fp << " schema_version=" << kpi::kSchemaVersion << '\n' << kpi::curves_csv_header();
  for (const auto& r : out.runs) {
    kpi::write_run_csv(cfg.out_dir + "/runs/" + r.record.scheduler + "_seed" + std::to_string(r.record.seed) + ".csv",
                       r.record);
    if (r.record.n_slots >= cfg.curve_units) {
      kpi::write_curves_csv(curves, r.record, kpi::quantize_curves(r.record, cfg.curve_units));
    }
    summaries.push_back(r.summary);
  }
  out.aggregate = kpi::aggregate_runs(summaries, false);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : summaries) runs.push_back(kpi::to_json(s));
  kpi::write_json(cfg.out_dir + "/summary.json", {{"schema_version", kpi::kSchemaVersion},
                                                  {"fingerprint", fp},
                                                  {"config", config::to_json(cfg)},
                                                  {"runs", runs},
                                                  {"aggregate", kpi::to_json(out.aggregate)}});
  for (const auto& a : out.aggregate.schedulers) {
    log << "  " << a.scheduler << ": throughput " << a.throughput_bps.mean << " bit/s, goodput "
        << a.goodput_bps.mean << " bit/s, JFI " << a.jfi_throughput.mean << ", invalid " << a.invalid_rate.mean << '\n';
  }
  return out;
}

inline EvalOutput cmd_compare(const config::ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  cfg.validate();
  if (cfg.schedulers.size() < 2) throw ConfigError("compare needs at least two schedulers");
  const auto& reference = cfg.seeds_for(cfg.schedulers.front());
  for (const auto& s : cfg.schedulers) {
    if (std::set<std::uint64_t>(cfg.seeds_for(s).begin(), cfg.seeds_for(s).end()) !=
        std::set<std::uint64_t>(reference.begin(), reference.end())) {
      throw ConfigError("compare runs every scheduler on the same seeds; '" + s + "' has a different seed list");
    }
  }
  const auto fp = config::fingerprint(cfg);
  auto net = load_network_if_needed(cfg);
  ensure_dir(cfg.out_dir);
  const auto todo = make_jobs(cfg);
  log << "comparing " << cfg.schedulers.size() << " schedulers over " << reference.size() << " seeds\n";
  EvalOutput out;
  out.runs = run_jobs(cfg, todo, net, fp);
  std::vector<kpi::RunSummary> summaries;
  for (const auto& r : out.runs) summaries.push_back(r.summary);
  out.aggregate = kpi::aggregate_runs(summaries, true);

  kpi::write_json(cfg.out_dir + "/comparison.json", {{"schema_version", kpi::kSchemaVersion},
                                                     {"fingerprint", fp},
                                                     {"config", config::to_json(cfg)},
                                                     {"aggregate", kpi::to_json(out.aggregate)}});
  std::ofstream csv(cfg.out_dir + "/comparison.csv");
  if (!csv) throw ConfigError("cannot write " + cfg.out_dir + "/comparison.csv");
  csv.precision(17);
  csv << "# fingerprint=" << fp << " schema_version=" << kpi::kSchemaVersion << '\n';
  csv << "scheduler,baseline,throughput_bps,goodput_bps,jfi,delta_throughput,delta_goodput,delta_jfi\n";
  for (const auto& d : out.aggregate.deltas) {
    const auto& a = out.aggregate.of(d.scheduler);
    csv << d.scheduler << ',' << d.baseline << ',' << a.throughput_bps.mean << ',' << a.goodput_bps.mean << ','
        << a.jfi_throughput.mean << ',' << d.throughput << ',' << d.goodput << ',' << d.jfi << '\n';
  }
  for (const auto& d : out.aggregate.deltas) {
    log << "  " << d.scheduler << " vs " << d.baseline << ": throughput " << 100.0 * d.throughput << "%, goodput "
        << 100.0 * d.goodput << "%, JFI " << 100.0 * d.jfi << "%\n";
  }
  return out;
}

}  // namespace leasch::cli
