#pragma once

// Per-RBG scheduler suite: round robin, proportional fair, best CQI, and the
// DQN deployment wrapper. The simulator talks to all of them through
// Scheduler.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leasch/dqn.hpp"
#include "leasch/errors.hpp"
#include "leasch/nn.hpp"
#include "leasch/sandbox.hpp"

namespace leasch::sched {

/// What the scheduler sees for one RBG.
struct RbgObservation {
  std::span<const std::uint8_t> eligible;
  std::span<const std::uint8_t> buffered;
  std::span<const int> mcs;
  std::span<const double> achievable;  // bits if granted this RBG
};

struct SchedulerDecision {
  std::optional<int> ue;               // none: RBG left idle
  bool rejected_by_membership = false;  // DQN picked an ineligible UE
  std::vector<double> metrics;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string name() const = 0;
  virtual void reset(int n_ue) = 0;
  virtual SchedulerDecision decide(const RbgObservation& obs) = 0;
  /// Called once per slot after grants and HARQ, with bits delivered in the slot.
  virtual void end_slot(std::span<const double> /*delivered_bits*/) {}
};

inline bool any_eligible(std::span<const std::uint8_t> eligible) {
  for (auto e : eligible) {
    if (e) return true;
  }
  return false;
}

inline void require_eligible(std::span<const std::uint8_t> eligible) {
  if (!any_eligible(eligible)) throw ContractViolation("scheduler invoked with an empty eligible set");
}

/// Highest metric among eligible UEs, lowest index on ties.
inline int argmax_eligible(std::span<const std::uint8_t> eligible, std::span<const double> metric) {
  int best = -1;
  for (std::size_t u = 0; u < eligible.size(); ++u) {
    if (!eligible[u]) continue;
    if (best < 0 || metric[u] > metric[static_cast<std::size_t>(best)]) best = static_cast<int>(u);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Round robin

struct RrState {
  int pointer = 0;  // last served UE
};

/// Starting pointer so that the first grant goes to UE 0.
inline RrState rr_initial(int n_ue) { return RrState{n_ue - 1}; }

inline SchedulerDecision rr_decide(RrState& state, std::span<const std::uint8_t> eligible) {
  require_eligible(eligible);
  const int n = static_cast<int>(eligible.size());
  for (int k = 1; k <= n; ++k) {
    const int u = (state.pointer + k) % n;
    if (eligible[static_cast<std::size_t>(u)]) {
      state.pointer = u;
      return {u, false, {}};
    }
  }
  throw ContractViolation("unreachable: eligible set became empty");
}

class RoundRobin final : public Scheduler {
 public:
  std::string name() const override { return "rr"; }
  void reset(int n_ue) override { state_ = rr_initial(n_ue); }
  SchedulerDecision decide(const RbgObservation& obs) override { return rr_decide(state_, obs.eligible); }
  const RrState& state() const { return state_; }

 private:
  RrState state_;
};

// ---------------------------------------------------------------------------
// Proportional fair: achievable / EWMA(delivered bits per slot)

struct PfState {
  std::vector<double> avg;
  double tau = 100.0;   // slots
  double floor = 1e-6;
};

inline PfState pf_initial(int n_ue, double tau = 100.0, double floor = 1e-6) {
  if (!(tau >= 1.0)) throw ConfigError("PF time constant must be >= 1 slot");
  return PfState{std::vector<double>(static_cast<std::size_t>(n_ue), 0.0), tau, floor};
}

inline std::vector<double> pf_metrics(const PfState& state, std::span<const double> achievable) {
  std::vector<double> m(achievable.size());
  for (std::size_t u = 0; u < m.size(); ++u) m[u] = achievable[u] / std::max(state.avg[u], state.floor);
  return m;
}

inline SchedulerDecision pf_decide(const PfState& state, std::span<const std::uint8_t> eligible,
                                   std::span<const double> achievable) {
  require_eligible(eligible);
  auto m = pf_metrics(state, achievable);
  const int u = argmax_eligible(eligible, m);
  return {u, false, std::move(m)};
}

inline void pf_update(PfState& state, std::span<const double> delivered) {
  const double a = 1.0 / state.tau;
  for (std::size_t u = 0; u < state.avg.size(); ++u) state.avg[u] = (1.0 - a) * state.avg[u] + a * delivered[u];
}

class ProportionalFair final : public Scheduler {
 public:
  explicit ProportionalFair(double tau = 100.0, double floor = 1e-6) : tau_(tau), floor_(floor) {}
  std::string name() const override { return "pf"; }
  void reset(int n_ue) override { state_ = pf_initial(n_ue, tau_, floor_); }
  SchedulerDecision decide(const RbgObservation& obs) override {
    return pf_decide(state_, obs.eligible, obs.achievable);
  }
  void end_slot(std::span<const double> delivered) override { pf_update(state_, delivered); }
  const PfState& state() const { return state_; }

 private:
  double tau_;
  double floor_;
  PfState state_;
};

// ---------------------------------------------------------------------------
// Best CQI

inline SchedulerDecision best_cqi_decide(std::span<const std::uint8_t> eligible, std::span<const double> achievable) {
  require_eligible(eligible);
  const int u = argmax_eligible(eligible, achievable);
  return {u, false, std::vector<double>(achievable.begin(), achievable.end())};
}

class BestCqi final : public Scheduler {
 public:
  std::string name() const override { return "bestcqi"; }
  void reset(int) override {}
  SchedulerDecision decide(const RbgObservation& obs) override {
    return best_cqi_decide(obs.eligible, obs.achievable);
  }
};

// ---------------------------------------------------------------------------
// DQN deployment: greedy argmax, granted only if the chosen UE is eligible.

struct LeaschState {
  sandbox::AllocationLog f;
  std::int64_t invalid_actions = 0;
};

inline SchedulerDecision leasch_decide(const nn::MlpParams& net, LeaschState& state, const RbgObservation& obs) {
  const auto n = static_cast<int>(obs.eligible.size());
  if (net.input_size() != 2 * n || net.output_size() != n) {
    throw ConfigError("checkpoint expects " + std::to_string(net.output_size()) + " UEs, cell has " +
                      std::to_string(n));
  }
  require_eligible(obs.eligible);
  const auto d = sandbox::data_rate_vector(obs.mcs);
  const auto d_hat = sandbox::mask_rates(d, obs.eligible);
  const auto s = sandbox::compose_state(d_hat, state.f);
  const auto q = nn::forward(net, s);
  const int u = nn::argmax(q);

  SchedulerDecision out;
  out.metrics.assign(q.data(), q.data() + q.size());
  if (obs.eligible[static_cast<std::size_t>(u)]) {
    out.ue = u;
  } else {
    out.rejected_by_membership = true;
    state.invalid_actions += 1;
  }
  state.f = sandbox::fairness_update(std::move(state.f), out.ue, obs.buffered);
  return out;
}

class Leasch final : public Scheduler {
 public:
  explicit Leasch(std::shared_ptr<const nn::MlpParams> net) : net_(std::move(net)) {
    if (!net_) throw ConfigError("leasch scheduler needs a network");
  }
  std::string name() const override { return "leasch"; }
  void reset(int n_ue) override {
    if (net_->output_size() != n_ue || net_->input_size() != 2 * n_ue) {
      throw ConfigError("checkpoint is for " + std::to_string(net_->output_size()) + " UEs, cell has " +
                        std::to_string(n_ue));
    }
    state_ = LeaschState{sandbox::AllocationLog(static_cast<std::size_t>(n_ue), 0), 0};
  }
  SchedulerDecision decide(const RbgObservation& obs) override {
    return leasch_decide(*net_, state_, obs);
  }
  const LeaschState& state() const { return state_; }

 private:
  std::shared_ptr<const nn::MlpParams> net_;
  LeaschState state_;
};

inline const std::vector<std::string>& scheduler_names() {
  static const std::vector<std::string> names{"rr", "pf", "bestcqi", "leasch"};
  return names;
}

/// `net` is required for "leasch" and ignored otherwise.
inline std::unique_ptr<Scheduler> make_scheduler(const std::string& name,
                                                 std::shared_ptr<const nn::MlpParams> net = nullptr) {
  if (name == "rr") return std::make_unique<RoundRobin>();
  if (name == "pf") return std::make_unique<ProportionalFair>();
  if (name == "bestcqi") return std::make_unique<BestCqi>();
  if (name == "leasch") return std::make_unique<Leasch>(std::move(net));
  throw ConfigError("unknown scheduler '" + name + "' (valid: rr, pf, bestcqi, leasch)");
}

}  // namespace leasch::sched
