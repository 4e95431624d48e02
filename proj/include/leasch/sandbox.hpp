#pragma once

// Off-simulator training environment: agent state construction (eligibility,
// normalized rates, allocation log), reward, synthetic dynamics and the
// episodic training driver.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leasch/dqn.hpp"
#include "leasch/errors.hpp"
#include "leasch/mcs.hpp"
#include "leasch/rng.hpp"

namespace leasch::sandbox {

using BitVector = std::vector<std::uint8_t>;
using AllocationLog = std::vector<std::int64_t>;

struct SchedState {
  BitVector g;                 // eligibility
  std::vector<int> mcs;        // per-UE MCS index
  std::vector<double> d;       // normalized spectral efficiency
  std::vector<double> d_hat;   // d masked by g
  AllocationLog f;             // allocation log, raw counts
  std::vector<double> s;       // [d_hat, f / max(f)]
  int step = 0;                // steps since episode start

  int n_ue() const { return static_cast<int>(g.size()); }
};

struct SandboxConfig {
  int n_ue = 4;
  int episode_length = 150;
  double penalty = 1.0;             // K
  double p_elig = 0.7;
  int channel_redraw_period = 25;   // steps; <= 0 holds the channel for the whole episode

  void validate() const {
    if (n_ue < 1) throw ConfigError("sandbox needs at least one UE");
    if (episode_length < 1) throw ConfigError("episode length must be >= 1");
    if (!(penalty > 0.0)) throw ConfigError("penalty K must be positive");
    if (!(p_elig > 0.0 && p_elig <= 1.0)) throw ConfigError("p_elig must be in (0, 1]");
  }
};

inline BitVector eligibility_vector(std::span<const std::uint8_t> buffered,
                                    std::span<const std::uint8_t> harq_busy) {
  if (buffered.size() != harq_busy.size()) throw DimensionError("buffer/HARQ vectors differ in length");
  BitVector g(buffered.size());
  for (std::size_t u = 0; u < g.size(); ++u) g[u] = (buffered[u] && !harq_busy[u]) ? 1 : 0;
  return g;
}

inline std::vector<double> data_rate_vector(std::span<const int> mcs) {
  std::vector<double> d(mcs.size());
  for (std::size_t u = 0; u < mcs.size(); ++u) {
    d[u] = mcs_entry(mcs[u]).spectral_efficiency() / kMaxSpectralEfficiency;
  }
  return d;
}

inline std::vector<double> mask_rates(std::span<const double> d, std::span<const std::uint8_t> g) {
  if (d.size() != g.size()) throw DimensionError("rate/eligibility vectors differ in length");
  std::vector<double> out(d.size());
  for (std::size_t u = 0; u < d.size(); ++u) out[u] = g[u] ? d[u] : 0.0;
  return out;
}

/// Selected UE: max(f - 1, 0). Other buffered UEs: f + 1. Others unchanged.
inline AllocationLog fairness_update(AllocationLog f, std::optional<int> selected,
                                     std::span<const std::uint8_t> buffered) {
  if (buffered.size() != f.size()) throw DimensionError("allocation log/buffer vectors differ in length");
  if (selected && (*selected < 0 || *selected >= static_cast<int>(f.size()))) {
    throw IndexError("selected UE " + std::to_string(*selected) + " out of range");
  }
  for (std::size_t u = 0; u < f.size(); ++u) {
    if (selected && static_cast<int>(u) == *selected) {
      f[u] = std::max<std::int64_t>(f[u] - 1, 0);
    } else if (buffered[u]) {
      f[u] += 1;
    }
  }
  return f;
}

inline std::vector<double> compose_state(std::span<const double> d_hat, std::span<const std::int64_t> f) {
  if (d_hat.size() != f.size()) throw DimensionError("rate/log vectors differ in length");
  const std::int64_t peak = std::max<std::int64_t>(
      f.empty() ? 0 : *std::max_element(f.begin(), f.end()), 1);
  std::vector<double> s(d_hat.begin(), d_hat.end());
  for (auto v : f) s.push_back(static_cast<double>(v) / static_cast<double>(peak));
  return s;
}

/// min(f)/max(f) over all UEs, 1 when the log is all zero.
inline double fairness_ratio(std::span<const std::int64_t> f) {
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  if (*hi == 0) return 1.0;
  return static_cast<double>(*lo) / static_cast<double>(*hi);
}

/// `f_after` is the allocation log after this action's fairness update.
inline double reward(std::span<const std::uint8_t> g, std::span<const double> d_hat,
                     std::span<const std::int64_t> f_after, int action, double penalty) {
  if (action < 0 || action >= static_cast<int>(g.size())) throw IndexError("action out of range");
  if (!g[static_cast<std::size_t>(action)]) return -penalty;
  return d_hat[static_cast<std::size_t>(action)] * fairness_ratio(f_after);
}

inline SchedState make_state(BitVector g, std::vector<int> mcs, AllocationLog f, int step = 0) {
  if (g.size() != mcs.size() || g.size() != f.size()) throw DimensionError("state vectors differ in length");
  SchedState st;
  st.d = data_rate_vector(mcs);
  st.d_hat = mask_rates(st.d, g);
  st.s = compose_state(st.d_hat, f);
  st.g = std::move(g);
  st.mcs = std::move(mcs);
  st.f = std::move(f);
  st.step = step;
  return st;
}

inline BitVector draw_eligibility(const SandboxConfig& cfg, Rng& rng) {
  BitVector g(static_cast<std::size_t>(cfg.n_ue));
  for (auto& v : g) v = bernoulli(rng, cfg.p_elig) ? 1 : 0;
  return g;
}

inline std::vector<int> draw_mcs(int n_ue, Rng& rng) {
  std::vector<int> mcs(static_cast<std::size_t>(n_ue));
  for (auto& m : mcs) m = uniform_int(rng, 0, kMaxMcs);
  return mcs;
}

inline SchedState random_initial_state(const SandboxConfig& cfg, Rng& rng) {
  cfg.validate();
  auto g = draw_eligibility(cfg, rng);
  auto mcs = draw_mcs(cfg.n_ue, rng);
  AllocationLog f(static_cast<std::size_t>(cfg.n_ue));
  for (auto& v : f) v = uniform_int(rng, 0, cfg.episode_length - 1);
  return make_state(std::move(g), std::move(mcs), std::move(f));
}

struct StepResult {
  SchedState next;
  double reward = 0.0;
  bool eligible = false;
};

/// In the sandbox a UE is eligible exactly when it has buffered data; there
/// is no HARQ process to block it.
inline StepResult sandbox_step(const SchedState& state, int action, const SandboxConfig& cfg, Rng& rng) {
  if (action < 0 || action >= state.n_ue()) throw IndexError("action out of range");
  const bool eligible = state.g[static_cast<std::size_t>(action)] != 0;
  const std::optional<int> selected = eligible ? std::optional<int>(action) : std::nullopt;
  auto f = fairness_update(state.f, selected, state.g);
  const double r = reward(state.g, state.d_hat, f, action, cfg.penalty);

  const int step = state.step + 1;
  auto g = draw_eligibility(cfg, rng);
  auto mcs = state.mcs;
  if (cfg.channel_redraw_period > 0 && step % cfg.channel_redraw_period == 0) {
    mcs = draw_mcs(cfg.n_ue, rng);
  }
  return {make_state(std::move(g), std::move(mcs), std::move(f), step), r, eligible};
}

struct EpisodeStats {
  double total_reward = 0.0;
  double mean_reward = 0.0;
  int steps = 0;
  int invalid_actions = 0;
  int eligible_selections = 0;
  double positive_reward_sum = 0.0;  // over eligible selections
  double final_epsilon = 0.0;
  double mean_loss = 0.0;
};

/// One training episode: random start, then per step select, anneal, reward,
/// transition, store, train.
inline EpisodeStats run_episode(dqn::Agent& agent, const SandboxConfig& cfg, const dqn::DqnHyperparams& hp,
                                Rng& env_rng) {
  if (agent.n_ue != cfg.n_ue) throw ConfigError("agent and sandbox disagree on the UE count");
  EpisodeStats stats;
  SchedState s = random_initial_state(cfg, env_rng);
  double loss_sum = 0.0;
  for (int i = 0; i < cfg.episode_length; ++i) {
    const int u = dqn::select_action(agent, s.s, false, agent.rng);
    agent.epsilon = dqn::anneal_epsilon(agent.epsilon, hp.eps_decay, hp.eps_floor);
    auto step = sandbox_step(s, u, cfg, env_rng);
    agent.replay.push({s.s, u, step.reward, step.next.s});
    loss_sum += dqn::train_step(agent, hp, agent.rng);

    stats.total_reward += step.reward;
    if (step.eligible) {
      stats.eligible_selections += 1;
      stats.positive_reward_sum += step.reward;
    } else {
      stats.invalid_actions += 1;
    }
    s = std::move(step.next);
  }
  stats.steps = cfg.episode_length;
  stats.mean_reward = stats.total_reward / stats.steps;
  stats.mean_loss = loss_sum / stats.steps;
  stats.final_epsilon = agent.epsilon;
  return stats;
}

struct CurvePoint {
  int episode = 0;  // 1-based
  double mean_reward = 0.0;
  double moving_avg_5 = 0.0;
  double eligible_selection_prob = 0.0;
  double mean_positive_reward = 0.0;
  int invalid_actions = 0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
};

struct TrainResult {
  dqn::Agent agent;
  std::vector<CurvePoint> curve;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

inline TrainResult train(const SandboxConfig& cfg, const dqn::DqnHyperparams& hp, int n_episodes,
                         std::uint64_t seed, const ProgressFn& progress = {}) {
  cfg.validate();
  hp.validate();
  if (n_episodes < 0) throw ConfigError("episode count must be non-negative");
  TrainResult out{dqn::Agent::create(cfg.n_ue, hp, seed), {}};
  Rng env_rng = make_rng(seed, Stream::sandbox);
  for (int e = 1; e <= n_episodes; ++e) {
    const auto st = run_episode(out.agent, cfg, hp, env_rng);
    CurvePoint p;
    p.episode = e;
    p.mean_reward = st.mean_reward;
    const int window = std::min(5, e);
    double acc = st.mean_reward;
    for (int k = 1; k < window; ++k) acc += out.curve[out.curve.size() - static_cast<std::size_t>(k)].mean_reward;
    p.moving_avg_5 = acc / window;
    p.eligible_selection_prob = static_cast<double>(st.eligible_selections) / st.steps;
    p.mean_positive_reward = st.eligible_selections > 0 ? st.positive_reward_sum / st.eligible_selections : 0.0;
    p.invalid_actions = st.invalid_actions;
    p.epsilon = st.final_epsilon;
    p.mean_loss = st.mean_loss;
    out.curve.push_back(p);
    if (progress) progress(p);
  }
  return out;
}

inline void write_learning_curve(const std::string& path, const std::vector<CurvePoint>& curve,
                                 const std::string& fingerprint, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out.precision(17);
  out << "# fingerprint=" << fingerprint << " seed=" << seed << '\n';
  out << "episode,mean_reward,moving_avg_5,eligible_selection_prob,mean_positive_reward,invalid_actions,epsilon,mean_loss\n";
  for (const auto& p : curve) {
    out << p.episode << ',' << p.mean_reward << ',' << p.moving_avg_5 << ',' << p.eligible_selection_prob << ','
        << p.mean_positive_reward << ',' << p.invalid_actions << ',' << p.epsilon << ',' << p.mean_loss << '\n';
  }
}

}  // namespace leasch::sandbox
