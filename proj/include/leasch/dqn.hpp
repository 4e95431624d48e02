#pragma once

// Double-DQN agent: epsilon-greedy selection, cyclic replay memory, DDQN
// targets, minibatch Adam training and periodic soft target updates.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leasch/errors.hpp"
#include "leasch/nn.hpp"
#include "leasch/rng.hpp"

namespace leasch::dqn {

struct DqnHyperparams {
  double lr = 1e-4;
  // Not given with the other training constants; assumed.
  double gamma = 0.99;
  int minibatch = 64;
  int target_period = 20;
  double smoothing = 1e-3;
  double eps_start = 0.99;
  double eps_floor = 0.01;
  double eps_decay = 1e-4;
  double grad_threshold = 1.0;
  std::size_t replay_capacity = 1'000'000;
  std::vector<int> hidden = {128, 128};

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in [0, 1)");
    if (!(smoothing > 0.0 && smoothing <= 1.0)) throw ConfigError("smoothing must be in (0, 1]");
    if (minibatch < 1) throw ConfigError("minibatch must be >= 1");
    if (target_period < 1) throw ConfigError("target period must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(eps_floor >= 0.0 && eps_floor <= eps_start && eps_start <= 1.0)) {
      throw ConfigError("need 0 <= eps_floor <= eps_start <= 1");
    }
    if (eps_decay < 0.0) throw ConfigError("eps_decay must be non-negative");
    if (!(grad_threshold > 0.0)) throw ConfigError("gradient threshold must be positive");
    if (replay_capacity < 1) throw ConfigError("replay capacity must be positive");
    for (int h : hidden) {
      if (h < 1) throw ConfigError("hidden layer sizes must be positive");
    }
  }

  std::vector<int> layer_dims(int n_ue) const {
    std::vector<int> dims{2 * n_ue};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(n_ue);
    return dims;
  }
};

inline void to_json(nlohmann::json& j, const DqnHyperparams& hp) {
  j = nlohmann::json{{"lr", hp.lr},
                     {"gamma", hp.gamma},
                     {"minibatch", hp.minibatch},
                     {"target_period", hp.target_period},
                     {"smoothing", hp.smoothing},
                     {"eps_start", hp.eps_start},
                     {"eps_floor", hp.eps_floor},
                     {"eps_decay", hp.eps_decay},
                     {"grad_threshold", hp.grad_threshold},
                     {"replay_capacity", hp.replay_capacity},
                     {"hidden", hp.hidden}};
}

inline void from_json(const nlohmann::json& j, DqnHyperparams& hp) {
  j.at("lr").get_to(hp.lr);
  j.at("gamma").get_to(hp.gamma);
  j.at("minibatch").get_to(hp.minibatch);
  j.at("target_period").get_to(hp.target_period);
  j.at("smoothing").get_to(hp.smoothing);
  j.at("eps_start").get_to(hp.eps_start);
  j.at("eps_floor").get_to(hp.eps_floor);
  j.at("eps_decay").get_to(hp.eps_decay);
  j.at("grad_threshold").get_to(hp.grad_threshold);
  j.at("replay_capacity").get_to(hp.replay_capacity);
  j.at("hidden").get_to(hp.hidden);
}

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
};

/// Fixed-capacity FIFO; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int n_actions)
      : capacity_(capacity), n_actions_(n_actions) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    if (n_actions < 1) throw ConfigError("replay needs at least one action");
  }

  void push(Transition t) {
    const auto len = static_cast<std::size_t>(2 * n_actions_);
    if (t.state.size() != len || t.next_state.size() != len) {
      throw ValidationError("transition state length must be " + std::to_string(len));
    }
    if (t.action < 0 || t.action >= n_actions_) throw ValidationError("transition action out of range");
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  int n_actions() const { return n_actions_; }

  /// i = 0 is the oldest retained transition.
  const Transition& at_age(std::size_t i) const {
    if (i >= items_.size()) throw IndexError("replay index out of range");
    const std::size_t start = items_.size() < capacity_ ? 0 : cursor_;
    return items_[(start + i) % items_.size()];
  }

  /// Uniform draws of storage slots, with replacement.
  std::vector<std::size_t> sample_indices(std::size_t m, Rng& rng) const {
    if (items_.empty()) throw StateError("cannot sample from an empty replay memory");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

  const Transition& slot(std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  int n_actions_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

inline std::vector<Transition> sample_minibatch(const ReplayBuffer& buffer, std::size_t m, Rng& rng) {
  std::vector<Transition> out;
  out.reserve(m);
  for (std::size_t i : buffer.sample_indices(m, rng)) out.push_back(buffer.slot(i));
  return out;
}

struct Agent {
  int n_ue = 0;
  nn::MlpParams online;
  nn::MlpParams target;
  nn::AdamState opt;
  ReplayBuffer replay;
  double epsilon = 0.99;
  std::uint64_t train_steps = 0;
  Rng rng;
  std::uint64_t seed = 0;

  /// Online and target networks start identical.
  static Agent create(int n_ue, const DqnHyperparams& hp, std::uint64_t seed) {
    hp.validate();
    if (n_ue < 1) throw ConfigError("need at least one UE");
    auto params = nn::init_params(hp.layer_dims(n_ue), seed);
    Agent a{n_ue,
            params,
            params,
            nn::AdamState::for_params(params),
            ReplayBuffer(hp.replay_capacity, n_ue),
            hp.eps_start,
            0,
            make_rng(seed, Stream::agent),
            seed};
    return a;
  }
};

inline double anneal_epsilon(double eps, double delta, double floor) {
  return std::max(eps - delta, floor);
}

inline int select_action(const Agent& agent, std::span<const double> state, bool greedy, Rng& rng) {
  if (static_cast<int>(state.size()) != 2 * agent.n_ue) {
    throw DimensionError("state length must be 2 x number of UEs");
  }
  // Always consume the exploration draw so the stream does not depend on
  // the greedy flag.
  const double draw = uniform01(rng);
  if (greedy || draw >= agent.epsilon) return nn::argmax(nn::forward(agent.online, state));
  return uniform_int(rng, 0, agent.n_ue - 1);
}

/// r + gamma * Q_target(s', argmax_a Q_online(s', a)); no terminal branch.
inline double ddqn_target(const Agent& agent, const Transition& t, double gamma) {
  const auto q_online = nn::forward(agent.online, t.next_state);
  const auto q_target = nn::forward(agent.target, t.next_state);
  return t.reward + gamma * q_target(nn::argmax(q_online));
}

/// Max-form target evaluated with a single network.
inline double max_form_target(const nn::MlpParams& net, const Transition& t, double gamma) {
  return t.reward + gamma * nn::forward(net, t.next_state).maxCoeff();
}

/// One minibatch update of the online network; returns the mean squared TD
/// error before the update.
inline double train_step(Agent& agent, const DqnHyperparams& hp, Rng& rng) {
  if (agent.replay.empty()) throw StateError("train_step on an empty replay memory");
  const auto idx = agent.replay.sample_indices(static_cast<std::size_t>(hp.minibatch), rng);
  const auto dim = static_cast<Eigen::Index>(2 * agent.n_ue);
  const auto m = static_cast<Eigen::Index>(idx.size());

  nn::Matrix states(dim, m);
  nn::Matrix next_states(dim, m);
  std::vector<int> actions(idx.size());
  std::vector<double> rewards(idx.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& t = agent.replay.slot(idx[static_cast<std::size_t>(j)]);
    states.col(j) = Eigen::Map<const nn::Vector>(t.state.data(), dim);
    next_states.col(j) = Eigen::Map<const nn::Vector>(t.next_state.data(), dim);
    actions[static_cast<std::size_t>(j)] = t.action;
    rewards[static_cast<std::size_t>(j)] = t.reward;
  }

  const nn::Matrix q_online = nn::forward_batch(agent.online, next_states);
  const nn::Matrix q_target = nn::forward_batch(agent.target, next_states);
  std::vector<double> targets(idx.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < q_online.rows(); ++a) {
      if (q_online(a, j) > q_online(best, j)) best = a;
    }
    targets[static_cast<std::size_t>(j)] = rewards[static_cast<std::size_t>(j)] + hp.gamma * q_target(best, j);
  }

  auto td = nn::batch_td_gradients(agent.online, states, actions, targets);
  auto grads = nn::clip_gradients(std::move(td.grads), hp.grad_threshold);
  nn::adam_step(agent.online, grads, agent.opt, hp.lr);
  agent.train_steps += 1;
  if (agent.train_steps % static_cast<std::uint64_t>(hp.target_period) == 0) {
    agent.target = nn::soft_update(agent.online, std::move(agent.target), hp.smoothing);
  }
  return td.loss;
}

// ---------------------------------------------------------------------------
// Checkpoints hold the deployable network, not the replay memory.

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  nn::MlpParams network;
  DqnHyperparams hp;
  int n_ue = 0;
  double epsilon = 0.0;
  std::uint64_t train_steps = 0;
  nlohmann::json lineage = nlohmann::json::object();
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  return nlohmann::json{{"format", "leasch-checkpoint"},
                        {"format_version", kCheckpointVersion},
                        {"n_ue", c.n_ue},
                        {"network", nn::to_json(c.network)},
                        {"hyperparams", c.hp},
                        {"epsilon", c.epsilon},
                        {"train_steps", c.train_steps},
                        {"lineage", c.lineage}};
}

inline Checkpoint make_checkpoint(const Agent& agent, const DqnHyperparams& hp,
                                  nlohmann::json lineage = nlohmann::json::object()) {
  lineage["agent_seed"] = agent.seed;
  return Checkpoint{agent.online, hp, agent.n_ue, agent.epsilon, agent.train_steps, std::move(lineage)};
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out << checkpoint_to_json(c).dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path);
  try {
    nlohmann::json j;
    in >> j;
    if (j.at("format").get<std::string>() != "leasch-checkpoint" ||
        j.at("format_version").get<int>() != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint format in " + path);
    }
    Checkpoint c;
    c.network = nn::params_from_json(j.at("network"));
    c.hp = j.at("hyperparams").get<DqnHyperparams>();
    c.n_ue = j.at("n_ue").get<int>();
    c.epsilon = j.at("epsilon").get<double>();
    c.train_steps = j.at("train_steps").get<std::uint64_t>();
    c.lineage = j.value("lineage", nlohmann::json::object());
    if (c.network.input_size() != 2 * c.n_ue || c.network.output_size() != c.n_ue) {
      throw ConfigError("checkpoint network does not match its UE count");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint " + path + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ConfigError("malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace leasch::dqn
